//! Profile (skyline) LDL^T factorization for symmetric positive definite
//! matrices.
//!
//! Row i stores the contiguous range first[i]..=i of the lower triangle.
//! Inside the profile, fill-in stays inside the profile, so factorization can
//! run in place. The factor is
//!
//!   A = L D L^T,  L unit lower triangular, D diagonal,
//!
//! and positive definiteness is certified for free: every pivot d_i must come
//! out positive, otherwise factorization aborts with the offending row. The
//! solvers rely on that certificate (a Robin shift that is too small shows up
//! here first).

use super::Csr;
use crate::error::{Error, Result};

/// LDL^T factor of a symmetric positive definite matrix in profile storage.
pub struct SkylineFactor {
    n: usize,
    /// first stored column of each row
    first: Vec<usize>,
    /// offset of row i's first entry in `data`
    start: Vec<usize>,
    /// strictly-lower profile entries of L, row by row
    data: Vec<f64>,
    /// pivots
    diag: Vec<f64>,
}

impl SkylineFactor {
    /// Factor the symmetric matrix given by its full sparsity (both triangles
    /// or lower only; upper entries are ignored). Fails with the row index of
    /// the first nonpositive pivot.
    pub fn new(a: &Csr) -> Result<SkylineFactor> {
        assert_eq!(a.rows(), a.cols(), "skyline factor needs a square matrix");
        let n = a.rows();
        let mut first: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for (j, _) in a.row(i) {
                // symmetry: an entry (i,j) widens whichever row is later
                if j < first[i] {
                    first[i] = j;
                }
                if j > i && i < first[j] {
                    first[j] = i;
                }
            }
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i]);
        }
        let mut data = vec![0.0; start[n]];
        let mut diag = vec![0.0; n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                use std::cmp::Ordering::*;
                match j.cmp(&i) {
                    Less => data[start[i] + (j - first[i])] += v,
                    Equal => diag[i] += v,
                    Greater => {}
                }
            }
        }

        // in-place LDL^T: data holds A's profile coming in, L going out
        for i in 0..n {
            let fi = first[i];
            // split borrow: rows before i are finished, row i is being built
            let (done, cur) = data.split_at_mut(start[i]);
            let row_i = &mut cur[..i - fi];
            for j in fi..i {
                let fj = first[j];
                let row_j = &done[start[j]..start[j + 1]];
                let lo = fi.max(fj);
                let mut s = row_i[j - fi];
                for k in lo..j {
                    s -= row_i[k - fi] * diag[k] * row_j[k - fj];
                }
                row_i[j - fi] = s / diag[j];
            }
            let mut d = diag[i];
            for k in fi..i {
                let l = row_i[k - fi];
                d -= l * l * diag[k];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { index: i, pivot: d });
            }
            diag[i] = d;
        }
        Ok(SkylineFactor { n, first, start, data, diag })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Smallest pivot of D, a cheap lower-bound witness of definiteness.
    pub fn min_pivot(&self) -> f64 {
        self.diag.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        // L z = b
        for i in 0..self.n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let mut s = x[i];
            for k in fi..i {
                s -= row[k - fi] * x[k];
            }
            x[i] = s;
        }
        // D y = z
        for (xi, di) in x.iter_mut().zip(&self.diag) {
            *xi /= di;
        }
        // L^T x = y
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let xi = x[i];
            for k in fi..i {
                x[k] -= row[k - fi] * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::norm;

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
    fn solves_against_known_solution() {
        let n = 40;
        let a = laplacian_1d(n);
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.matvec(&xs);
        let f = SkylineFactor::new(&a).unwrap();
        let x = f.solve(&b);
        let err: Vec<f64> = x.iter().zip(&xs).map(|(a, b)| a - b).collect();
        assert!(norm(&err) / norm(&xs) < 1e-12);
    }

    #[test]
    fn residual_small_for_random_spd() {
        // dense-ish random SPD matrix via A = B^T B + n I given as triplets
        let n = 25;
        let mut b = vec![0.0; n * n];
        let mut state = 0x9e3779b97f4a7c15u64;
        for v in b.iter_mut() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        }
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += b[k * n + i] * b[k * n + j];
                }
                if i == j {
                    s += n as f64;
                }
                t.push((i, j, s));
            }
        }
        let a = Csr::from_triplets(n, n, &t);
        let rhs: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let f = SkylineFactor::new(&a).unwrap();
        let x = f.solve(&rhs);
        let mut r = rhs.clone();
        a.matvec_acc(&x, &mut r, -1.0);
        // factor-solve round trip keeps a tiny relative residual
        assert!(norm(&r) / norm(&rhs) < 1e-12, "residual {}", norm(&r) / norm(&rhs));
    }

    #[test]
    fn reports_indefinite_pivot_row() {
        let a = Csr::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        match SkylineFactor::new(&a) {
            Err(Error::NotPositiveDefinite { index, pivot }) => {
                assert_eq!(index, 1);
                assert!(pivot < 0.0);
            }
            other => panic!("expected pivot failure, got {:?}", other.map(|_| ())),
        }
    }
}
