//! Preconditioned conjugate gradients.

use super::{axpy, dot, norm};
use crate::error::{Error, Result};

/// Result of a conjugate gradient run. `iterations` counts completed
/// iterations (a zero right-hand side converges in 0).
#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// final unpreconditioned relative residual |r| / |b|
    pub relative_residual: f64,
}

/// Solve A x = b with preconditioner application `apply_m` (an approximation
/// of A^-1). Starts from x = 0 and stops at the first iterate with
/// |r| / |b| < rtol, measured on the true recurrence residual. Reaching
/// `max_iter` is reported through `converged = false`, not as an error;
/// a nonpositive search curvature is an error because it certifies that the
/// operator pair is not positive definite.
pub fn pcg(
    apply_a: impl Fn(&[f64]) -> Vec<f64>,
    apply_m: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> Result<PcgOutcome> {
    let nb = norm(b);
    if nb == 0.0 {
        return Ok(PcgOutcome {
            x: vec![0.0; b.len()],
            iterations: 0,
            converged: true,
            relative_residual: 0.0,
        });
    }
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut z = apply_m(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let q = apply_a(&p);
        let pq = dot(&p, &q);
        if pq <= 0.0 || !pq.is_finite() {
            return Err(Error::IndefiniteOperator { iteration: it, curvature: pq });
        }
        let alpha = rz / pq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        let rel = norm(&r) / nb;
        if rel < rtol {
            return Ok(PcgOutcome { x, iterations: it, converged: true, relative_residual: rel });
        }
        z = apply_m(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        rz = rz_next;
    }
    let rel = norm(&r) / nb;
    Ok(PcgOutcome { x, iterations: max_iter, converged: false, relative_residual: rel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{Csr, SkylineFactor};

    fn laplacian_1d(n: usize) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        Csr::from_triplets(n, n, &t)
    }

    #[test]
    fn exact_preconditioner_converges_in_one_iteration() {
        for n in [5, 40, 200] {
            let a = laplacian_1d(n);
            let f = SkylineFactor::new(&a).unwrap();
            let b: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
            let out = pcg(|x| a.matvec(x), |r| f.solve(r), &b, 1e-10, 50).unwrap();
            assert_eq!(out.iterations, 1, "n={n}");
            assert!(out.converged);
        }
    }

    #[test]
    fn zero_rhs_is_zero_iterations() {
        let a = laplacian_1d(8);
        let out = pcg(|x| a.matvec(x), |r| r.to_vec(), &[0.0; 8], 1e-8, 10).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.converged);
        assert_eq!(out.x, vec![0.0; 8]);
    }

    #[test]
    fn unpreconditioned_reaches_tolerance() {
        let n = 60;
        let a = laplacian_1d(n);
        let b = vec![1.0; n];
        let out = pcg(|x| a.matvec(x), |r| r.to_vec(), &b, 1e-9, 500).unwrap();
        assert!(out.converged);
        let mut res = b.clone();
        a.matvec_acc(&out.x, &mut res, -1.0);
        assert!(crate::sparse::norm(&res) / crate::sparse::norm(&b) < 1e-9);
    }

    #[test]
    fn indefinite_operator_is_reported() {
        // diag(1, -1) is symmetric but indefinite
        let a = Csr::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        let out = pcg(|x| a.matvec(x), |r| r.to_vec(), &[0.0, 1.0], 1e-8, 10);
        assert!(matches!(out, Err(Error::IndefiniteOperator { .. })));
    }

    #[test]
    fn max_iter_reports_unconverged() {
        let n = 400;
        let a = laplacian_1d(n);
        let b = vec![1.0; n];
        let out = pcg(|x| a.matvec(x), |r| r.to_vec(), &b, 1e-12, 3).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 3);
        assert!(out.relative_residual > 1e-12);
    }

    #[test]
    fn deterministic_counts() {
        let n = 120;
        let a = laplacian_1d(n);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11).cos()).collect();
        let first = pcg(|x| a.matvec(x), |r| r.to_vec(), &b, 1e-7, 1000).unwrap();
        for _ in 0..3 {
            let again = pcg(|x| a.matvec(x), |r| r.to_vec(), &b, 1e-7, 1000).unwrap();
            assert_eq!(again.iterations, first.iterations);
            assert_eq!(again.x, first.x);
        }
    }
}
