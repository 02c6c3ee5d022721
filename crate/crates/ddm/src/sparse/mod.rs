//! Minimal sparse and dense linear algebra kernels.
//!
//! Everything the solvers need is covered by four pieces: a compressed-row
//! matrix for assembly and block extraction, a profile (skyline) LDL^T
//! factorization for the symmetric positive definite systems that
//! substructuring produces, preconditioned conjugate gradients, and a Lanczos
//! routine plus dense eigenvalue wrappers for the spectral checks.
//!
//! Substructuring never needs a general fill-reducing ordering: interior
//! blocks are banded in lexicographic node order and the condensed interface
//! operators stay narrow in the same order, so a profile factorization is
//! both simple and adequate.

mod csr;
mod dense;
mod lanczos;
mod pcg;
mod skyline;

pub use csr::Csr;
pub use dense::{
    general_eigenvalues, materialize, pencil_eigenvalues, spectral_radius, symmetric_eigenvalues,
};
pub use lanczos::extreme_eigenvalues;
pub use pcg::{pcg, PcgOutcome};
pub use skyline::SkylineFactor;

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean inner product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
