//! Dense eigenvalue helpers on top of nalgebra, for the spectral checks.

use crate::error::{Error, Result};
use nalgebra::linalg::Schur;
use nalgebra::{Complex, DMatrix};

/// Column-by-column materialization of a linear operator: column j is
/// op(e_j). Exact by linearity.
pub fn materialize(dim: usize, op: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    for j in 0..dim {
        e[j] = 1.0;
        let col = op(&e);
        for i in 0..dim {
            m[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    m
}

/// Eigenvalues of a symmetric matrix, ascending. The input is symmetrized
/// first so harmless roundoff asymmetry cannot leak into complex arithmetic.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Generalized eigenvalues of the pencil (A, B) with B symmetric positive
/// definite: the eigenvalues of B^-1 A, computed through the Cholesky
/// congruence L^-1 A L^-T which keeps the problem symmetric.
pub fn pencil_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let bs = (b + b.transpose()) * 0.5;
    let chol = bs
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { index: 0, pivot: f64::NAN })?;
    let l = chol.l();
    // X solves L X = A, then C solves L C^T = X^T, so C = L^-1 A L^-T
    let x = l.solve_lower_triangular(a).expect("nonsingular triangular factor");
    let c = l
        .solve_lower_triangular(&x.transpose())
        .expect("nonsingular triangular factor")
        .transpose();
    Ok(symmetric_eigenvalues(&c))
}

/// Eigenvalues of a general square matrix. Numerically symmetric input is
/// routed through the symmetric solver, which always converges; anything
/// else goes through a step-capped Schur iteration. The cap matters: the
/// unbounded QR sweep can cycle forever on matrices whose spectrum collapses
/// to a single cluster (a near-multiple of the identity, for instance), and
/// those are exactly the matrices the contraction studies produce.
pub fn general_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let skew = (a - a.transpose()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if skew <= 1e-11 * scale {
        return Ok(symmetric_eigenvalues(a)
            .into_iter()
            .map(|x| Complex::new(x, 0.0))
            .collect());
    }
    let schur = Schur::try_new(a.clone(), 1e-13, 200 * a.nrows().max(16))
        .ok_or(Error::EigenIterationStalled { dim: a.nrows() })?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Spectral radius of a general (possibly nonsymmetric) matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    Ok(general_eigenvalues(a)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}
