//! Dense spectral diagnostics for the interface operators.
//!
//! The two-subdomain iterations are governed by four interface error
//! operators. With Schur complements S_1, S_2 and weights D_i = delta_i I:
//!
//! ```text
//! R_1 = I - theta S_2^-1 (S_1 + S_2)
//! R_2 = I - theta (D_1 S_1^-1 D_1 + D_2 S_2^-1 D_2)(S_1 + S_2)
//! R_3 = I - theta (D_1 S_1 D_1 + D_2 S_2 D_2)(S_1^-1 + S_2^-1)
//! R_4 = I - theta (I - (g_1 I - S_2)(g_2 I + S_2)^-1 (g_2 I - S_1)(g_1 I + S_1)^-1)
//! ```
//!
//! For the mirrored split the S_i are exact multiples of one shared operator
//! and each R collapses to a multiple of the identity, which pins its whole
//! spectrum to a closed form; this module materializes the operators as
//! dense matrices so those formulas, the Robin damping profile omega(lambda)
//! and the condition numbers of the many-subdomain preconditioned systems
//! can be measured rather than trusted.
//!
//! Everything here is diagnostic machinery at desk scale: materialization is
//! capped, eigenvalues come from dense solvers, and reports are plain data
//! with a CSV rendering.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::many_domain::{scaling_weights, Checkerboard, Color};
use crate::sparse::{general_eigenvalues, materialize, pencil_eigenvalues, symmetric_eigenvalues};
use crate::two_domain::{Method, MethodParams, TwoDomainSystem};

/// Spectrum summary of one materialized operator.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub method: String,
    /// real eigenvalues when the spectrum is real, moduli otherwise
    pub spectrum: Vec<f64>,
    pub rho: f64,
    pub kappa: Option<f64>,
    pub theta: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub h: f64,
    pub big_h: f64,
}

pub fn csv_header() -> &'static str {
    "method,nu1,nu2,h,H,theta,rho,kappa"
}

impl SpectralReport {
    pub fn csv_row(&self) -> String {
        let kappa = self.kappa.map(|k| format!("{k:.16e}")).unwrap_or_default();
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.method, self.nu1, self.nu2, self.h, self.big_h, self.theta, self.rho, kappa
        )
    }
}

/// Column-by-column materialization, capped at desk scale.
pub fn materialize_operator(
    dim: usize,
    op: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<DMatrix<f64>> {
    if dim > 512 {
        return Err(Error::DimensionCap { dim, cap: 512 });
    }
    Ok(materialize(dim, op))
}

/// Dense interface Schur complement of one side.
pub fn dense_schur(td: &TwoDomainSystem, side: usize) -> Result<DMatrix<f64>> {
    materialize_operator(td.interface_len(), |x| td.schur_apply(side, x))
}

/// The coefficient-free average (S_1 + S_2)/(nu_1 + nu_2); in the mirrored
/// configuration both sides equal their coefficient times this matrix.
pub fn mean_schur(td: &TwoDomainSystem) -> Result<DMatrix<f64>> {
    let s1 = dense_schur(td, 1)?;
    let s2 = dense_schur(td, 2)?;
    Ok((s1 + s2) / (td.nu1 + td.nu2))
}

/// Extreme eigenvalues of the averaged Schur complement in the Euclidean
/// sense; the theorem-regime Robin parameters are built from these.
pub fn mean_schur_extremes(td: &TwoDomainSystem) -> Result<(f64, f64)> {
    let eigs = symmetric_eigenvalues(&mean_schur(td)?);
    Ok((eigs[0], eigs[eigs.len() - 1]))
}

/// Measured interface spectrum bounds (c0, C1) such that the generalized
/// eigenvalues of the averaged Schur complement against the interface mass
/// lie in [c0, C1/h]; c0 is h-stable and C1 = h * lambda_max.
pub fn interface_spectrum_bounds(td: &TwoDomainSystem) -> Result<(f64, f64)> {
    let s = mean_schur(td)?;
    let m = td.mass.to_dense();
    let eigs = pencil_eigenvalues(&s, &m)?;
    let h = td.system.mesh.h;
    Ok((eigs[0], eigs[eigs.len() - 1] * h))
}

fn solve_dense(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Config("singular operator in dense composition".into()))
}

/// Materialize the interface error operator of one stationary method.
pub fn error_operator(
    td: &TwoDomainSystem,
    method: Method,
    params: &MethodParams,
) -> Result<DMatrix<f64>> {
    let n = td.system.mesh.n;
    if n > 64 {
        return Err(Error::DimensionCap { dim: n, cap: 64 });
    }
    let m = td.interface_len();
    let eye = DMatrix::<f64>::identity(m, m);
    let s1 = dense_schur(td, 1)?;
    let s2 = dense_schur(td, 2)?;
    let theta = params.theta;
    let composed = match method {
        Method::DirichletNeumann => solve_dense(&s2, &(&s1 + &s2))?,
        Method::NeumannNeumann => {
            let inv1 = solve_dense(&s1, &eye)?;
            let inv2 = solve_dense(&s2, &eye)?;
            let blend = inv1 * (params.delta1 * params.delta1)
                + inv2 * (params.delta2 * params.delta2);
            blend * (&s1 + &s2)
        }
        Method::DirichletDirichlet => {
            let inv1 = solve_dense(&s1, &eye)?;
            let inv2 = solve_dense(&s2, &eye)?;
            let blend = &s1 * (params.delta1 * params.delta1)
                + &s2 * (params.delta2 * params.delta2);
            blend * (inv1 + inv2)
        }
        Method::RobinRobin => {
            let (g1, g2) = (params.gamma1, params.gamma2);
            let t1 = solve_dense(&(&eye * g1 + &s1), &eye)?;
            let t2 = (&eye * g2 - &s1) * t1;
            let t3 = solve_dense(&(&eye * g2 + &s2), &t2)?;
            let t4 = (&eye * g1 - &s2) * t3;
            &eye - t4
        }
    };
    Ok(eye.clone() - composed * theta)
}

/// Eigenvalues of a possibly nonsymmetric matrix: real parts when the
/// spectrum is numerically real, moduli otherwise, sorted ascending.
pub fn general_spectrum(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let eigs = general_eigenvalues(a)?;
    let scale = eigs.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(1e-300);
    let real = eigs.iter().all(|z| z.im.abs() <= 1e-9 * scale);
    let mut out: Vec<f64> =
        if real { eigs.iter().map(|z| z.re).collect() } else { eigs.iter().map(|z| z.norm()).collect() };
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(out)
}

/// Spectral radius of a materialized error operator.
pub fn error_spectrum_report(
    td: &TwoDomainSystem,
    method: Method,
    params: &MethodParams,
) -> Result<SpectralReport> {
    let r = error_operator(td, method, params)?;
    let spectrum = general_spectrum(&r)?;
    let rho = general_eigenvalues(&r)?.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    Ok(SpectralReport {
        method: method.short_name().to_string(),
        spectrum,
        rho,
        kappa: None,
        theta: params.theta,
        nu1: td.nu1,
        nu2: td.nu2,
        h: td.system.mesh.h,
        big_h: 0.5,
    })
}

/// The Robin damping factor of the alternating iteration at interface
/// frequency lambda.
pub fn omega(gamma1: f64, gamma2: f64, nu1: f64, nu2: f64, lambda: f64) -> f64 {
    -((gamma1 - nu2 * lambda) / (gamma1 + nu1 * lambda))
        * ((gamma2 - nu1 * lambda) / (gamma2 + nu2 * lambda))
}

/// omega evaluated over a frequency grid, with its measured maximizer and
/// the analytic one.
#[derive(Debug, Clone)]
pub struct OmegaProfile {
    pub lambdas: Vec<f64>,
    pub omegas: Vec<f64>,
    pub argmax_lambda: f64,
    pub max_omega: f64,
    /// analytic maximizer sqrt(g1 g2 / (nu1 nu2))
    pub lambda0: f64,
}

pub fn rr_omega_profile(
    gamma1: f64,
    gamma2: f64,
    nu1: f64,
    nu2: f64,
    grid: &[f64],
) -> OmegaProfile {
    assert!(
        gamma1 > 0.0 && gamma2 > 0.0 && nu1 > 0.0 && nu2 > 0.0,
        "omega profile needs positive parameters"
    );
    let omegas: Vec<f64> = grid.iter().map(|&l| omega(gamma1, gamma2, nu1, nu2, l)).collect();
    let (mut argmax, mut max_omega) = (grid[0], omegas[0]);
    for (&l, &w) in grid.iter().zip(&omegas) {
        if w > max_omega {
            max_omega = w;
            argmax = l;
        }
    }
    OmegaProfile {
        lambdas: grid.to_vec(),
        omegas,
        argmax_lambda: argmax,
        max_omega,
        lambda0: (gamma1 * gamma2 / (nu1 * nu2)).sqrt(),
    }
}

/// Eigenvalues of Pinv * A for symmetric A and SPD Pinv, computed through
/// the congruent symmetric form L^T A L with Pinv = L L^T.
pub fn preconditioned_spectrum(a: &DMatrix<f64>, pinv: &DMatrix<f64>) -> Result<Vec<f64>> {
    let sym_p = (pinv + pinv.transpose()) * 0.5;
    let chol = sym_p
        .cholesky()
        .ok_or_else(|| Error::Config("preconditioner is not positive definite".into()))?;
    let l = chol.l();
    let c = l.transpose() * a * &l;
    Ok(symmetric_eigenvalues(&c))
}

/// Condition number report of one primal preconditioned pair on the edge
/// space.
pub fn condition_report(cb: &Checkerboard, method: Method) -> Result<SpectralReport> {
    let nd = cb.edge_count();
    let st = materialize_operator(nd, |x| cb.primal_apply(x))?;
    let pinv = match method {
        Method::DirichletNeumann => {
            let f = cb.interface_factor(Color::Black, 0.0, 1.0)?;
            materialize_operator(nd, |r| cb.edge_restricted_solve(&f, r))?
        }
        Method::NeumannNeumann => {
            let fr = cb.interface_factor(Color::Red, 0.0, 1.0)?;
            let fb = cb.interface_factor(Color::Black, 0.0, 1.0)?;
            let w = scaling_weights(cb.nu_red, cb.nu_black);
            materialize_operator(nd, |r| {
                let mut z = cb.edge_restricted_solve(&fr, r);
                let zb = cb.edge_restricted_solve(&fb, r);
                for (a, b) in z.iter_mut().zip(&zb) {
                    *a = w.red * w.red * *a + w.black * w.black * b;
                }
                z
            })?
        }
        other => {
            return Err(Error::Config(format!(
                "condition reports cover the primal preconditioners, not {other:?}"
            )))
        }
    };
    let eigs = preconditioned_spectrum(&st, &pinv)?;
    let (min, max) = (eigs[0], eigs[eigs.len() - 1]);
    Ok(SpectralReport {
        method: method.short_name().to_string(),
        spectrum: eigs,
        rho: max,
        kappa: Some(max / min),
        theta: 0.0,
        nu1: cb.nu_red,
        nu2: cb.nu_black,
        h: cb.system.mesh.h,
        big_h: 1.0 / cb.n_sub as f64,
    })
}
