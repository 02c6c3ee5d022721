//! Nonoverlapping domain decomposition solvers for the variable-coefficient
//! Poisson equation -div(nu grad u) = f on the unit square with homogeneous
//! Dirichlet boundary data.
//!
//! The problem is discretized with piecewise-linear finite elements on a
//! structured triangulation. Two families of solvers operate on the interface
//! unknowns that remain after eliminating subdomain interiors:
//!
//! * two subdomains split at a vertical line: stationary Dirichlet-Neumann,
//!   Neumann-Neumann, Dirichlet-Dirichlet and Robin-Robin iterations with a
//!   relaxation parameter ([`two_domain`]),
//! * an N x N checkerboard of square subdomains: conjugate gradients on the
//!   condensed interface systems with the matching substructuring
//!   preconditioners and a cross-point coarse problem ([`many_domain`]).
//!
//! [`spectral`] materializes the small error and preconditioned operators so
//! their spectra can be checked against the closed-form rates, and [`cli`]
//! drives parameter-sweep experiments producing CSV and markdown tables.

pub mod assembly;
pub mod cli;
pub mod error;
pub mod many_domain;
pub mod mesh;
pub mod sparse;
pub mod spectral;
pub mod two_domain;

pub use error::{Error, Result};
