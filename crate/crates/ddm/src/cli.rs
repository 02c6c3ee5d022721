//! Experiment runner behind the `ddm` binary.
//!
//! A plain-text `KEY=VALUE` configuration (file and/or `--set` flags) selects
//! one of the canned iteration-count experiments (`table1` .. `table6`), a
//! spectral sweep (`spectra`), or a `custom` run. Every key takes the last
//! assignment; list-valued keys (`method=dn,rr`) take comma-separated values
//! so that a later `--set` cleanly replaces a file's choice. Results are
//! rendered as an aligned markdown table on stdout and, with `--out`,
//! written as markdown plus a machine-readable CSV whose reals carry 17
//! significant digits so repeated runs are byte-identical.
//!
//! The canned experiments fix their own sweeps:
//!
//! * `table1`/`table2`: two mirrored subdomains, h in {1/16, 1/32, 1/64} and
//!   coefficient pairs (1e-2, 1e2), (1e-4, 1e4), (1e-6, 1e6), three
//!   relaxation choices per method (D-N/N-N and D-D/R-R respectively),
//! * `table3`: interface at x = 1/4 and x = 3/4 on h = 1/64 with growing
//!   jumps, optimal mirrored-case parameters,
//! * `table4`: 8 x 8 checkerboard, uniform coefficients, H/h in {4..64},
//! * `table5`: H/h = 8, N in {4, 8, 16, 24, 32},
//! * `table6`: 8 x 8 checkerboard at H/h = 8 with jump 10^k .. 10^-k.
//!
//! `DDM_THREADS` sets the worker-pool size for sweep rows (default 1); the
//! output order is fixed by the sweep definition regardless of scheduling.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::many_domain::{scaling_weights, Checkerboard, ScalingWeights};
use crate::spectral::{self, error_spectrum_report, rr_omega_profile};
use crate::two_domain::{optimal_params, Method, MethodParams, TwoDomainSystem};

/// Stationary two-domain stopping tolerance (relative interface error).
pub const DEFAULT_TOL: f64 = 1e-8;
/// Conjugate-gradient relative residual tolerance for checkerboard runs.
pub const DEFAULT_RTOL: f64 = 1e-6;
/// Iteration cap shared by both solver families.
pub const DEFAULT_MAX_ITERATIONS: usize = 400;

/// Which experiment a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Table1,
    Table2,
    Table3,
    Table4,
    Table5,
    Table6,
    Spectra,
    Custom,
}

impl ExperimentKind {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        match text {
            "table1" => Ok(ExperimentKind::Table1),
            "table2" => Ok(ExperimentKind::Table2),
            "table3" => Ok(ExperimentKind::Table3),
            "table4" => Ok(ExperimentKind::Table4),
            "table5" => Ok(ExperimentKind::Table5),
            "table6" => Ok(ExperimentKind::Table6),
            "spectra" => Ok(ExperimentKind::Spectra),
            "custom" => Ok(ExperimentKind::Custom),
            other => Err(format!(
                "unknown experiment '{other}' (expected table1..table6, spectra or custom)"
            )),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Table1 => "table1",
            ExperimentKind::Table2 => "table2",
            ExperimentKind::Table3 => "table3",
            ExperimentKind::Table4 => "table4",
            ExperimentKind::Table5 => "table5",
            ExperimentKind::Table6 => "table6",
            ExperimentKind::Spectra => "spectra",
            ExperimentKind::Custom => "custom",
        }
    }
}

/// Which artifact files `--out` produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
    Both,
}

/// Fully-resolved experiment settings. The defaults reproduce the reference
/// setup: forcing f = -2(x^2 + y^2 - x - y), optimal relaxation and weights,
/// Robin parameters gamma1 = nu2/h, gamma2 = nu1 for the two-domain iteration
/// and gamma_r = 16 nu_b/h, gamma_b = nu_r H/2 for the checkerboard solver.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Two-domain mesh resolution (cells per side).
    pub n: usize,
    /// Two-domain interface position.
    pub split: f64,
    /// Checkerboard partition: N (custom runs use the two-domain path when
    /// this is unset).
    pub subdomains: Option<usize>,
    /// Checkerboard cells per subdomain side (H/h).
    pub cells: usize,
    /// Coefficient pairs to sweep: (nu1, nu2), or (nu_red, nu_black) for
    /// checkerboard runs.
    pub pairs: Vec<(f64, f64)>,
    pub methods: Vec<Method>,
    pub theta: Option<f64>,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub gamma_r: Option<f64>,
    pub gamma_b: Option<f64>,
    pub tol: f64,
    pub rtol: f64,
    pub max_iterations: usize,
    pub format: OutputFormat,
    /// Coefficient ratios nu1/nu2 swept by the spectra experiment.
    pub eps: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::Custom,
            n: 16,
            split: 0.5,
            subdomains: None,
            cells: 8,
            pairs: vec![(1.0, 1.0)],
            methods: Method::ALL.to_vec(),
            theta: None,
            delta1: None,
            delta2: None,
            gamma1: None,
            gamma2: None,
            gamma_r: None,
            gamma_b: None,
            tol: DEFAULT_TOL,
            rtol: DEFAULT_RTOL,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            format: OutputFormat::Both,
            eps: vec![1e-2, 1e-4],
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("key '{key}': '{value}' is not {what}"))
}

fn parse_method(text: &str) -> std::result::Result<Method, String> {
    match text {
        "dn" => Ok(Method::DirichletNeumann),
        "nn" => Ok(Method::NeumannNeumann),
        "dd" => Ok(Method::DirichletDirichlet),
        "rr" => Ok(Method::RobinRobin),
        other => Err(format!("unknown method '{other}' (expected dn, nn, dd or rr)")),
    }
}

/// Apply a single `KEY=VALUE` setting to a config. Unknown keys and
/// out-of-domain values are rejected with a message naming the key.
fn apply_setting(
    config: &mut ExperimentConfig,
    token: &str,
) -> std::result::Result<(), String> {
    let (key, value) = token
        .split_once('=')
        .ok_or_else(|| format!("'{token}' is not of the form KEY=VALUE"))?;
    match key {
        "experiment" => config.experiment = ExperimentKind::parse(value)?,
        "n" => {
            let n: usize = parse_value(key, value, "a positive integer")?;
            if n < 2 || !n.is_multiple_of(2) {
                return Err(format!(
                    "n={n} rejected: the mesh resolution must be even and at least 2 \
                     (the interface lines must land on mesh lines)"
                ));
            }
            config.n = n;
        }
        "a" => {
            let a: f64 = parse_value(key, value, "a number")?;
            if !(a > 0.0 && a < 1.0) {
                return Err(format!("a={value} rejected: the split must lie strictly in (0, 1)"));
            }
            config.split = a;
        }
        "subdomains" => {
            let n: usize = parse_value(key, value, "a positive integer")?;
            if n < 2 || !n.is_multiple_of(2) {
                return Err(format!(
                    "subdomains={n} rejected: the checkerboard needs an even count of at least 2"
                ));
            }
            config.subdomains = Some(n);
        }
        "cells" => {
            let s: usize = parse_value(key, value, "a positive integer")?;
            if s < 2 {
                return Err(format!("cells={s} rejected: each subdomain needs at least 2 cells"));
            }
            config.cells = s;
        }
        "nu1" | "nu_red" => {
            let v: f64 = parse_value(key, value, "a number")?;
            if v <= 0.0 {
                return Err(format!("{key}={value} rejected: coefficients must be positive"));
            }
            config.pairs.truncate(1);
            config.pairs[0].0 = v;
        }
        "nu2" | "nu_black" => {
            let v: f64 = parse_value(key, value, "a number")?;
            if v <= 0.0 {
                return Err(format!("{key}={value} rejected: coefficients must be positive"));
            }
            config.pairs.truncate(1);
            config.pairs[0].1 = v;
        }
        "method" => {
            let mut methods = Vec::new();
            for part in value.split(',').filter(|p| !p.is_empty()) {
                methods.push(parse_method(part)?);
            }
            config.methods = methods;
        }
        "theta" => config.theta = Some(parse_value(key, value, "a number")?),
        "delta1" => config.delta1 = Some(parse_value(key, value, "a number")?),
        "delta2" => config.delta2 = Some(parse_value(key, value, "a number")?),
        "gamma1" => config.gamma1 = Some(parse_value(key, value, "a number")?),
        "gamma2" => config.gamma2 = Some(parse_value(key, value, "a number")?),
        "gamma_r" => config.gamma_r = Some(parse_value(key, value, "a number")?),
        "gamma_b" => config.gamma_b = Some(parse_value(key, value, "a number")?),
        "tol" => {
            let t: f64 = parse_value(key, value, "a number")?;
            if !(t.is_finite() && t > 0.0) {
                return Err(format!("tol={value} rejected: tolerance must be positive"));
            }
            config.tol = t;
        }
        "rtol" => {
            let t: f64 = parse_value(key, value, "a number")?;
            if !(t.is_finite() && t > 0.0) {
                return Err(format!("rtol={value} rejected: tolerance must be positive"));
            }
            config.rtol = t;
        }
        "maxit" => {
            let m: usize = parse_value(key, value, "a positive integer")?;
            if m == 0 {
                return Err("maxit=0 rejected: at least one iteration is needed".to_string());
            }
            config.max_iterations = m;
        }
        "format" => {
            config.format = match value {
                "csv" => OutputFormat::Csv,
                "markdown" => OutputFormat::Markdown,
                "both" => OutputFormat::Both,
                other => {
                    return Err(format!(
                        "unknown format '{other}' (expected csv, markdown or both)"
                    ))
                }
            };
        }
        "eps" => {
            let mut eps = Vec::new();
            for part in value.split(',').filter(|p| !p.is_empty()) {
                let e: f64 = parse_value(key, part, "a number")?;
                if !(e > 0.0 && e <= 1.0) {
                    return Err(format!("eps={part} rejected: ratios must lie in (0, 1]"));
                }
                eps.push(e);
            }
            config.eps = eps;
        }
        other => return Err(format!("unknown key '{other}'")),
    }
    Ok(())
}

/// Parse plain-text configuration: whitespace-separated `KEY=VALUE` tokens,
/// `#` starting a comment. An empty text yields the defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        for token in line.split_whitespace() {
            apply_setting(&mut config, token)
                .map_err(|msg| Error::Config(format!("line {}: {msg}", idx + 1)))?;
        }
    }
    Ok(config)
}

/// Apply `--set KEY=VALUE` overrides on top of a parsed config.
pub fn apply_overrides(config: &mut ExperimentConfig, sets: &[String]) -> Result<()> {
    for token in sets {
        apply_setting(config, token)
            .map_err(|msg| Error::Config(format!("--set {token}: {msg}")))?;
    }
    Ok(())
}

/// A rendered experiment: the markdown table plus per-run CSV rows.
#[derive(Debug, Clone)]
pub struct TableArtifact {
    pub kind: ExperimentKind,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub csv_rows: Vec<String>,
    pub all_converged: bool,
}

/// Schema of the per-run CSV: one row per solver invocation, in sweep order.
pub const RUN_CSV_HEADER: &str = "experiment,method,n,subdomains,cells,split,nu1,nu2,\
theta,delta1,delta2,gamma1,gamma2,iterations,converged,final_error";

impl TableArtifact {
    /// Aligned markdown rendering: heading, then a padded pipe table.
    pub fn markdown(&self) -> String {
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.len()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut text = format!("# {}\n\n", self.title);
        let emit = |text: &mut String, cells: &[String]| {
            text.push('|');
            for (w, cell) in widths.iter().zip(cells) {
                text.push_str(&format!(" {cell:<w$} |"));
            }
            text.push('\n');
        };
        emit(&mut text, &self.columns);
        text.push('|');
        for w in &widths {
            text.push_str(&format!(" {} |", "-".repeat(*w)));
        }
        text.push('\n');
        for row in &self.rows {
            emit(&mut text, row);
        }
        text
    }

    pub fn csv(&self) -> String {
        let mut text = String::from(RUN_CSV_HEADER);
        text.push('\n');
        for row in &self.csv_rows {
            text.push_str(row);
            text.push('\n');
        }
        text
    }
}

fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Short scientific display for table cells (1e-2, 1e4, ...).
fn fmt_nu(x: f64) -> String {
    format!("{x:e}")
}

/// One solver invocation rendered as a table cell plus a CSV row.
struct RunCell {
    text: String,
    csv: String,
    converged: bool,
}

struct TwoDomainCellSpec<'a> {
    kind: ExperimentKind,
    td: &'a TwoDomainSystem,
    method: Method,
    params: MethodParams,
    tol: f64,
    max_iterations: usize,
}

fn two_domain_cell(spec: TwoDomainCellSpec<'_>) -> Result<RunCell> {
    let out = spec.td.run(spec.method, &spec.params, spec.tol, spec.max_iterations)?;
    let text = if out.log.diverged {
        "div".to_string()
    } else if out.log.converged {
        out.log.iterations.to_string()
    } else {
        format!(">{}", spec.max_iterations)
    };
    let final_error = out.log.error_history.last().copied().unwrap_or(1.0);
    let p = &spec.params;
    let csv = format!(
        "{},{},{},,,{},{},{},{},{},{},{},{},{},{},{}",
        spec.kind.name(),
        spec.method.short_name(),
        spec.td.system.mesh.n,
        fmt_real(spec.td.split),
        fmt_real(spec.td.nu1),
        fmt_real(spec.td.nu2),
        fmt_real(p.theta),
        fmt_real(p.delta1),
        fmt_real(p.delta2),
        fmt_real(p.gamma1),
        fmt_real(p.gamma2),
        out.log.iterations,
        out.log.converged,
        fmt_real(final_error),
    );
    Ok(RunCell { text, csv, converged: out.log.converged })
}

struct CheckerboardCellSpec<'a> {
    kind: ExperimentKind,
    cb: &'a Checkerboard,
    method: Method,
    weights: Option<ScalingWeights>,
    shifts: Option<(f64, f64)>,
    rtol: f64,
    max_iterations: usize,
}

fn checkerboard_cell(spec: CheckerboardCellSpec<'_>) -> RunCell {
    let cb = spec.cb;
    let (delta1, delta2, gamma1, gamma2) = match spec.method {
        Method::NeumannNeumann => {
            let w = spec.weights.unwrap_or_else(|| scaling_weights(cb.nu_red, cb.nu_black));
            (fmt_real(w.red), fmt_real(w.black), String::new(), String::new())
        }
        Method::DirichletDirichlet => {
            let w = spec
                .weights
                .unwrap_or_else(|| scaling_weights(cb.nu_red, cb.nu_black).swapped());
            (fmt_real(w.red), fmt_real(w.black), String::new(), String::new())
        }
        Method::RobinRobin => {
            let (g_r, g_b) = spec.shifts.unwrap_or_else(|| cb.robin_shifts());
            (String::new(), String::new(), fmt_real(g_r), fmt_real(g_b))
        }
        Method::DirichletNeumann => {
            (String::new(), String::new(), String::new(), String::new())
        }
    };
    let outcome = cb.solve_interface_with(
        spec.method,
        spec.rtol,
        spec.max_iterations,
        spec.weights,
        spec.shifts,
    );
    let (text, iterations, converged, final_error) = match &outcome {
        Ok(report) if report.converged => {
            (report.iterations.to_string(), report.iterations, true, fmt_real(report.relative_residual))
        }
        Ok(report) => (
            format!(">{}", spec.max_iterations),
            report.iterations,
            false,
            fmt_real(report.relative_residual),
        ),
        Err(_) => ("err".to_string(), 0, false, String::new()),
    };
    let csv = format!(
        "{},{},{},{},{},,{},{},,{},{},{},{},{},{},{}",
        spec.kind.name(),
        spec.method.short_name(),
        cb.n_sub * cb.cells_per_sub,
        cb.n_sub,
        cb.cells_per_sub,
        fmt_real(cb.nu_red),
        fmt_real(cb.nu_black),
        delta1,
        delta2,
        gamma1,
        gamma2,
        iterations,
        converged,
        final_error,
    );
    RunCell { text, csv, converged }
}

type RowResult = (Vec<String>, Vec<String>, bool);

fn assemble_table(
    kind: ExperimentKind,
    title: &str,
    columns: Vec<String>,
    rows: Vec<RowResult>,
) -> TableArtifact {
    let mut table_rows = Vec::with_capacity(rows.len());
    let mut csv_rows = Vec::new();
    let mut all_converged = true;
    for (cells, csvs, converged) in rows {
        table_rows.push(cells);
        csv_rows.extend(csvs);
        all_converged &= converged;
    }
    TableArtifact {
        kind,
        title: title.to_string(),
        columns,
        rows: table_rows,
        csv_rows,
        all_converged,
    }
}

/// Coefficient pairs of the mirrored-split sweeps.
const MIRRORED_PAIRS: [(f64, f64); 3] = [(1e-2, 1e2), (1e-4, 1e4), (1e-6, 1e6)];

/// Per-method relaxation columns: label suffix and the relaxation override
/// (None keeps the optimum).
type RelaxationSweep = [(Method, [(&'static str, Option<f64>); 3]); 2];

/// The two-method relaxation sweeps of the mirrored tables.
fn mirrored_sweep(kind: ExperimentKind) -> RelaxationSweep {
    match kind {
        ExperimentKind::Table1 => [
            (
                Method::DirichletNeumann,
                [("theta_opt", None), ("1/2", Some(0.5)), ("1", Some(1.0))],
            ),
            (
                Method::NeumannNeumann,
                [("theta_opt", None), ("1/3", Some(1.0 / 3.0)), ("2/3", Some(2.0 / 3.0))],
            ),
        ],
        _ => [
            (
                Method::DirichletDirichlet,
                [("theta_opt", None), ("1/3", Some(1.0 / 3.0)), ("2/3", Some(2.0 / 3.0))],
            ),
            (
                Method::RobinRobin,
                [("theta_opt", None), ("1/2", Some(0.5)), ("1", Some(1.0))],
            ),
        ],
    }
}

fn mirrored_table(config: &ExperimentConfig, kind: ExperimentKind) -> Result<TableArtifact> {
    let sweep = mirrored_sweep(kind);
    let mut columns = vec!["nu1".to_string(), "nu2".to_string(), "h".to_string()];
    for (method, thetas) in &sweep {
        for (label, _) in thetas {
            columns.push(format!("{} {label}", method.short_name()));
        }
    }
    let mut jobs = Vec::new();
    for n in [16usize, 32, 64] {
        for pair in MIRRORED_PAIRS {
            jobs.push((n, pair));
        }
    }
    let rows: Vec<RowResult> = jobs
        .par_iter()
        .map(|&(n, (nu1, nu2))| -> Result<RowResult> {
            let td = TwoDomainSystem::new(n, 0.5, nu1, nu2)?;
            let h = td.system.mesh.h;
            let mut cells =
                vec![fmt_nu(nu1), fmt_nu(nu2), format!("1/{n}")];
            let mut csvs = Vec::new();
            let mut converged = true;
            for (method, thetas) in &sweep {
                for (_, theta) in thetas {
                    let mut params = optimal_params(*method, nu1, nu2, h);
                    if let Some(t) = theta {
                        params.theta = *t;
                    }
                    let cell = two_domain_cell(TwoDomainCellSpec {
                        kind,
                        td: &td,
                        method: *method,
                        params,
                        tol: config.tol,
                        max_iterations: config.max_iterations,
                    })?;
                    cells.push(cell.text);
                    csvs.push(cell.csv);
                    converged &= cell.converged;
                }
            }
            Ok((cells, csvs, converged))
        })
        .collect::<Result<_>>()?;
    let title = match kind {
        ExperimentKind::Table1 => {
            "table1: two mirrored subdomains, D-N and N-N iteration counts"
        }
        _ => "table2: two mirrored subdomains, D-D and R-R iteration counts",
    };
    Ok(assemble_table(kind, title, columns, rows))
}

fn offset_interface_table(config: &ExperimentConfig) -> Result<TableArtifact> {
    let kind = ExperimentKind::Table3;
    let n = 64usize;
    let splits = [0.25f64, 0.75];
    let mut columns = vec!["nu1".to_string(), "nu2".to_string()];
    for method in Method::ALL {
        for split in ["1/4", "3/4"] {
            columns.push(format!("{} {split}", method.short_name()));
        }
    }
    let jobs: Vec<(f64, f64)> =
        (1..=6).map(|k| (10f64.powi(-k), 10f64.powi(k))).collect();
    let rows: Vec<RowResult> = jobs
        .par_iter()
        .map(|&(nu1, nu2)| -> Result<RowResult> {
            let systems = [
                TwoDomainSystem::new(n, splits[0], nu1, nu2)?,
                TwoDomainSystem::new(n, splits[1], nu1, nu2)?,
            ];
            let h = systems[0].system.mesh.h;
            let mut cells = vec![fmt_nu(nu1), fmt_nu(nu2)];
            let mut csvs = Vec::new();
            let mut converged = true;
            for method in Method::ALL {
                for td in &systems {
                    // relaxation and weights stay at the mirrored-case optimum
                    let params = optimal_params(method, nu1, nu2, h);
                    let cell = two_domain_cell(TwoDomainCellSpec {
                        kind,
                        td,
                        method,
                        params,
                        tol: config.tol,
                        max_iterations: config.max_iterations,
                    })?;
                    cells.push(cell.text);
                    csvs.push(cell.csv);
                    converged &= cell.converged;
                }
            }
            Ok((cells, csvs, converged))
        })
        .collect::<Result<_>>()?;
    Ok(assemble_table(
        kind,
        "table3: two subdomains split at x=1/4 and x=3/4, growing coefficient jumps",
        columns,
        rows,
    ))
}

/// Checkerboard job list: one (N, H/h, nu_red, nu_black) tuple per row.
type CheckerboardJobs = Vec<(usize, usize, f64, f64)>;

fn checkerboard_table(config: &ExperimentConfig, kind: ExperimentKind) -> Result<TableArtifact> {
    let (title, lead_columns, jobs): (&str, Vec<&str>, CheckerboardJobs) = match kind {
        ExperimentKind::Table4 => (
            "table4: 8x8 checkerboard, uniform coefficients, mesh refinement",
            vec!["H/h"],
            [4usize, 8, 16, 32, 64].iter().map(|&s| (8, s, 1.0, 1.0)).collect(),
        ),
        ExperimentKind::Table5 => (
            "table5: checkerboard at H/h=8, uniform coefficients, growing partition",
            vec!["NxN"],
            [4usize, 8, 16, 24, 32].iter().map(|&n| (n, 8, 1.0, 1.0)).collect(),
        ),
        _ => (
            "table6: 8x8 checkerboard at H/h=8, growing coefficient jumps",
            vec!["nu_black", "nu_red"],
            (1..=6).map(|k| (8, 8, 10f64.powi(-k), 10f64.powi(k))).collect(),
        ),
    };
    let mut columns: Vec<String> = lead_columns.iter().map(|c| c.to_string()).collect();
    for method in Method::ALL {
        columns.push(method.short_name().to_string());
    }
    let rows: Vec<RowResult> = jobs
        .par_iter()
        .map(|&(n_sub, cells_per_sub, nu_red, nu_black)| -> Result<RowResult> {
            let cb = Checkerboard::new(n_sub, cells_per_sub, nu_red, nu_black)?;
            let mut cells = match kind {
                ExperimentKind::Table4 => vec![cells_per_sub.to_string()],
                ExperimentKind::Table5 => vec![format!("{n_sub}x{n_sub}")],
                _ => vec![fmt_nu(nu_black), fmt_nu(nu_red)],
            };
            let mut csvs = Vec::new();
            let mut converged = true;
            for method in Method::ALL {
                let cell = checkerboard_cell(CheckerboardCellSpec {
                    kind,
                    cb: &cb,
                    method,
                    weights: None,
                    shifts: None,
                    rtol: config.rtol,
                    max_iterations: config.max_iterations,
                });
                cells.push(cell.text);
                csvs.push(cell.csv);
                converged &= cell.converged;
            }
            Ok((cells, csvs, converged))
        })
        .collect::<Result<_>>()?;
    Ok(assemble_table(kind, title, columns, rows))
}

/// Resolve two-domain method parameters: start from the optimum and apply
/// any overrides. A single weight override is completed to a unit sum.
fn resolve_params(
    config: &ExperimentConfig,
    method: Method,
    nu1: f64,
    nu2: f64,
    h: f64,
) -> MethodParams {
    let mut p = optimal_params(method, nu1, nu2, h);
    if let Some(t) = config.theta {
        p.theta = t;
    }
    match (config.delta1, config.delta2) {
        (Some(a), Some(b)) => {
            p.delta1 = a;
            p.delta2 = b;
        }
        (Some(a), None) => {
            p.delta1 = a;
            p.delta2 = 1.0 - a;
        }
        (None, Some(b)) => {
            p.delta1 = 1.0 - b;
            p.delta2 = b;
        }
        (None, None) => {}
    }
    if let Some(g) = config.gamma1 {
        p.gamma1 = g;
    }
    if let Some(g) = config.gamma2 {
        p.gamma2 = g;
    }
    p
}

fn custom_weights(config: &ExperimentConfig) -> Option<ScalingWeights> {
    match (config.delta1, config.delta2) {
        (None, None) => None,
        (a, b) => {
            let red = a.unwrap_or_else(|| 1.0 - b.unwrap());
            Some(ScalingWeights { red, black: b.unwrap_or(1.0 - red) })
        }
    }
}

fn custom_table(config: &ExperimentConfig) -> Result<TableArtifact> {
    let kind = ExperimentKind::Custom;
    if let Some(n_sub) = config.subdomains {
        let mut columns = vec!["nu_red".to_string(), "nu_black".to_string()];
        for method in &config.methods {
            columns.push(method.short_name().to_string());
        }
        let rows: Vec<RowResult> = config
            .pairs
            .par_iter()
            .map(|&(nu_red, nu_black)| -> Result<RowResult> {
                let cb = Checkerboard::new(n_sub, config.cells, nu_red, nu_black)?;
                let shifts = match (config.gamma_r, config.gamma_b) {
                    (None, None) => None,
                    (a, b) => {
                        let d = cb.robin_shifts();
                        Some((a.unwrap_or(d.0), b.unwrap_or(d.1)))
                    }
                };
                let mut cells = vec![fmt_nu(nu_red), fmt_nu(nu_black)];
                let mut csvs = Vec::new();
                let mut converged = true;
                for &method in &config.methods {
                    let cell = checkerboard_cell(CheckerboardCellSpec {
                        kind,
                        cb: &cb,
                        method,
                        weights: custom_weights(config),
                        shifts,
                        rtol: config.rtol,
                        max_iterations: config.max_iterations,
                    });
                    cells.push(cell.text);
                    csvs.push(cell.csv);
                    converged &= cell.converged;
                }
                Ok((cells, csvs, converged))
            })
            .collect::<Result<_>>()?;
        return Ok(assemble_table(kind, "custom: checkerboard interface solves", columns, rows));
    }
    let mut columns = vec!["nu1".to_string(), "nu2".to_string(), "h".to_string()];
    for method in &config.methods {
        columns.push(method.short_name().to_string());
    }
    let rows: Vec<RowResult> = config
        .pairs
        .par_iter()
        .map(|&(nu1, nu2)| -> Result<RowResult> {
            let td = TwoDomainSystem::new(config.n, config.split, nu1, nu2)?;
            let h = td.system.mesh.h;
            let mut cells = vec![fmt_nu(nu1), fmt_nu(nu2), format!("1/{}", config.n)];
            let mut csvs = Vec::new();
            let mut converged = true;
            for &method in &config.methods {
                let cell = two_domain_cell(TwoDomainCellSpec {
                    kind,
                    td: &td,
                    method,
                    params: resolve_params(config, method, nu1, nu2, h),
                    tol: config.tol,
                    max_iterations: config.max_iterations,
                })?;
                cells.push(cell.text);
                csvs.push(cell.csv);
                converged &= cell.converged;
            }
            Ok((cells, csvs, converged))
        })
        .collect::<Result<_>>()?;
    Ok(assemble_table(kind, "custom: two-domain stationary iterations", columns, rows))
}

/// Run a table experiment. `spectra` configs belong to [`run_spectra`].
pub fn run_table(config: &ExperimentConfig) -> Result<TableArtifact> {
    match config.experiment {
        ExperimentKind::Table1 | ExperimentKind::Table2 => {
            mirrored_table(config, config.experiment)
        }
        ExperimentKind::Table3 => offset_interface_table(config),
        ExperimentKind::Table4 | ExperimentKind::Table5 | ExperimentKind::Table6 => {
            checkerboard_table(config, config.experiment)
        }
        ExperimentKind::Custom => custom_table(config),
        ExperimentKind::Spectra => Err(Error::Config(
            "the spectra experiment produces a spectral report, not a table; \
             use the spectra subcommand"
                .to_string(),
        )),
    }
}

/// Spectral sweep output: the report CSV and, when the Robin method is
/// included, a damping-profile CSV with the analytic and measured peaks.
#[derive(Debug, Clone)]
pub struct SpectraArtifact {
    pub csv: String,
    pub omega_csv: Option<String>,
}

pub const OMEGA_CSV_HEADER: &str =
    "nu1,nu2,gamma1,gamma2,lambda0,argmax_lambda,max_omega";

/// Materialize the two-domain error operators over the configured ratio
/// sweep and report their spectra, one CSV row per (ratio, method).
pub fn run_spectra(config: &ExperimentConfig) -> Result<SpectraArtifact> {
    let mut csv = String::from(spectral::csv_header());
    csv.push('\n');
    let mut omega_rows = Vec::new();
    for &eps in &config.eps {
        // a ratio eps with nu1*nu2 = 1 mirrors the table convention
        let nu1 = eps.sqrt();
        let nu2 = 1.0 / eps.sqrt();
        let td = TwoDomainSystem::new(config.n, 0.5, nu1, nu2).map_err(grow_cap_hint)?;
        let h = td.system.mesh.h;
        for &method in &config.methods {
            let params = resolve_params(config, method, nu1, nu2, h);
            let report =
                error_spectrum_report(&td, method, &params).map_err(grow_cap_hint)?;
            csv.push_str(&report.csv_row());
            csv.push('\n');
            if method == Method::RobinRobin {
                let lambda0 =
                    (params.gamma1 * params.gamma2 / (nu1 * nu2)).sqrt();
                // geometric grid two decades around the analytic peak
                let grid: Vec<f64> = (0..=4000)
                    .map(|i| lambda0 * 100f64.powf(i as f64 / 2000.0 - 1.0))
                    .collect();
                let prof = rr_omega_profile(params.gamma1, params.gamma2, nu1, nu2, &grid);
                omega_rows.push(format!(
                    "{},{},{},{},{},{},{}",
                    fmt_real(nu1),
                    fmt_real(nu2),
                    fmt_real(params.gamma1),
                    fmt_real(params.gamma2),
                    fmt_real(prof.lambda0),
                    fmt_real(prof.argmax_lambda),
                    fmt_real(prof.max_omega),
                ));
            }
        }
    }
    let omega_csv = if omega_rows.is_empty() {
        None
    } else {
        let mut text = String::from(OMEGA_CSV_HEADER);
        text.push('\n');
        for row in omega_rows {
            text.push_str(&row);
            text.push('\n');
        }
        Some(text)
    };
    Ok(SpectraArtifact { csv, omega_csv })
}

fn grow_cap_hint(e: Error) -> Error {
    match e {
        Error::DimensionCap { dim, cap } => Error::Config(format!(
            "dense materialization of dimension {dim} exceeds cap {cap}; \
             shrink n or use the iterative extreme-eigenvalue estimates instead"
        )),
        other => other,
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "ddm",
    about = "Domain decomposition experiment runner for the unit-square Poisson problem"
)]
pub struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand, Debug)]
enum CliCommand {
    /// Reproduce an iteration-count experiment (table1..table6 or custom)
    Run(RunArgs),
    /// Materialize two-domain error operators and report their spectra
    Spectra(SpectraArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment kind: table1..table6, spectra or custom
    #[arg(long)]
    experiment: Option<String>,
    /// Plain-text KEY=VALUE configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving the markdown and CSV artifacts
    #[arg(long)]
    out: Option<PathBuf>,
    /// Inline override, KEY=VALUE (repeatable; applied after the file)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct SpectraArgs {
    /// Mesh resolution of the materialized operators
    #[arg(long)]
    n: Option<usize>,
    /// Coefficient ratio nu1/nu2 (repeatable)
    #[arg(long)]
    eps: Vec<f64>,
    /// Plain-text KEY=VALUE configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving the CSV artifacts
    #[arg(long)]
    out: Option<PathBuf>,
    /// Inline override, KEY=VALUE (repeatable; applied after the file)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn load_config(path: Option<&Path>, sets: &[String]) -> Result<ExperimentConfig> {
    let text = match path {
        Some(p) => fs::read_to_string(p)
            .map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut config = parse_config(&text)?;
    apply_overrides(&mut config, sets)?;
    Ok(config)
}

fn write_artifact(dir: &Path, name: &str, content: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Execute a resolved config: print the artifact to stdout and write files
/// under `out` according to the configured format. Returns whether every run
/// converged.
pub fn execute(config: &ExperimentConfig, out: Option<&Path>) -> Result<bool> {
    if config.experiment == ExperimentKind::Spectra {
        let artifact = run_spectra(config)?;
        print!("{}", artifact.csv);
        if let Some(dir) = out {
            write_artifact(dir, "spectra.csv", &artifact.csv)?;
            if let Some(omega) = &artifact.omega_csv {
                write_artifact(dir, "omega_profile.csv", omega)?;
            }
        }
        return Ok(true);
    }
    let artifact = run_table(config)?;
    print!("{}", artifact.markdown());
    if let Some(dir) = out {
        let name = artifact.kind.name();
        if matches!(config.format, OutputFormat::Markdown | OutputFormat::Both) {
            write_artifact(dir, &format!("{name}.md"), &artifact.markdown())?;
        }
        if matches!(config.format, OutputFormat::Csv | OutputFormat::Both) {
            write_artifact(dir, &format!("{name}.csv"), &artifact.csv())?;
        }
    }
    Ok(artifact.all_converged)
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("DDM_THREADS") {
        Ok(text) => text
            .parse::<usize>()
            .ok()
            .filter(|&t| t >= 1)
            .ok_or_else(|| {
                Error::Config(format!("DDM_THREADS='{text}' is not a positive integer"))
            })?,
        Err(_) => 1,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn run_cli(cli: Cli) -> Result<bool> {
    let (config, out) = match cli.command {
        CliCommand::Run(args) => {
            let mut config = load_config(args.config.as_deref(), &[])?;
            if let Some(kind) = &args.experiment {
                config.experiment =
                    ExperimentKind::parse(kind).map_err(Error::Config)?;
            }
            apply_overrides(&mut config, &args.set)?;
            (config, args.out)
        }
        CliCommand::Spectra(args) => {
            let mut config = load_config(args.config.as_deref(), &[])?;
            config.experiment = ExperimentKind::Spectra;
            if let Some(n) = args.n {
                apply_setting(&mut config, &format!("n={n}"))
                    .map_err(|msg| Error::Config(format!("--n: {msg}")))?;
            }
            if !args.eps.is_empty() {
                for &e in &args.eps {
                    if !(e > 0.0 && e <= 1.0) {
                        return Err(Error::Config(format!(
                            "--eps {e}: ratios must lie in (0, 1]"
                        )));
                    }
                }
                config.eps = args.eps.clone();
            }
            apply_overrides(&mut config, &args.set)?;
            (config, args.out)
        }
    };
    let pool = thread_pool()?;
    pool.install(|| execute(&config, out.as_deref()))
}

/// Binary entry point: parse arguments, run, map the outcome to an exit
/// code (0 all converged, 1 some run failed to converge, 2 error).
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run_cli(cli) {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("warning: at least one run did not converge");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.experiment, ExperimentKind::Custom);
        assert_eq!(c.n, 16);
        assert_eq!(c.tol, DEFAULT_TOL);
        assert_eq!(c.rtol, DEFAULT_RTOL);
        assert_eq!(c.methods, Method::ALL.to_vec());
        assert!(c.theta.is_none() && c.subdomains.is_none());
    }

    #[test]
    fn inline_overrides_apply() {
        let c = parse_config("theta=0.5 method=dn n=16").unwrap();
        assert_eq!(c.theta, Some(0.5));
        assert_eq!(c.methods, vec![Method::DirichletNeumann]);
        assert_eq!(c.n, 16);
    }

    #[test]
    fn odd_resolution_is_rejected_with_location() {
        let err = parse_config("# leading comment\nn=15").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("line 2"), "{text}");
        assert!(text.contains("even"), "{text}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config("bogus=1").unwrap_err();
        assert!(err.to_string().contains("unknown key 'bogus'"));
        let mut c = ExperimentConfig::default();
        let err = apply_overrides(&mut c, &["theta".to_string()]).unwrap_err();
        assert!(err.to_string().contains("KEY=VALUE"));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let c = parse_config("\n# full line\nn=8   # trailing\n\nmethod=nn,rr\n").unwrap();
        assert_eq!(c.n, 8);
        assert_eq!(c.methods, vec![Method::NeumannNeumann, Method::RobinRobin]);
    }

    #[test]
    fn custom_two_domain_table_shape_and_determinism() {
        let c = parse_config("n=8 nu1=1e-2 nu2=1e2 method=dn,rr").unwrap();
        let a = run_table(&c).unwrap();
        assert_eq!(a.columns, vec!["nu1", "nu2", "h", "DN", "RR"]);
        assert_eq!(a.rows.len(), 1);
        assert_eq!(a.rows[0][0], "1e-2");
        assert_eq!(a.rows[0][3], "1"); // optimal relaxation is a direct solve
        assert!(a.all_converged);
        let b = run_table(&c).unwrap();
        assert_eq!(a.csv(), b.csv(), "repeated runs must be byte-identical");
        assert!(a.csv().starts_with(RUN_CSV_HEADER));
        assert_eq!(a.csv_rows.len(), 2);
    }

    #[test]
    fn spectra_rows_match_the_relaxed_rate_formula() {
        let c = parse_config("experiment=spectra n=8 method=dn theta=0.7 eps=1e-2,1e-4").unwrap();
        let artifact = run_spectra(&c).unwrap();
        let lines: Vec<&str> = artifact.csv.lines().collect();
        assert_eq!(lines[0], spectral::csv_header());
        assert_eq!(lines.len(), 3);
        for (line, eps) in lines[1..].iter().zip([1e-2f64, 1e-4]) {
            let rho: f64 = line.split(',').nth(6).unwrap().parse().unwrap();
            let expect = (1.0 - 0.7 * (1.0 + eps)).abs();
            assert!((rho - expect).abs() <= 1e-10, "{rho} vs {expect}");
        }
        assert!(artifact.omega_csv.is_none());
    }

    #[test]
    fn spectra_with_no_methods_is_header_only() {
        let c = parse_config("experiment=spectra method= n=8").unwrap();
        assert!(c.methods.is_empty());
        let artifact = run_spectra(&c).unwrap();
        assert_eq!(artifact.csv, format!("{}\n", spectral::csv_header()));
    }

    #[test]
    fn omega_profile_peak_lands_on_the_analytic_frequency() {
        let c = parse_config("experiment=spectra n=8 method=rr eps=1e-2").unwrap();
        let artifact = run_spectra(&c).unwrap();
        let omega = artifact.omega_csv.expect("Robin sweep emits the profile");
        let lines: Vec<&str> = omega.lines().collect();
        assert_eq!(lines[0], OMEGA_CSV_HEADER);
        let fields: Vec<f64> =
            lines[1].split(',').map(|f| f.parse().unwrap()).collect();
        let (lambda0, argmax) = (fields[4], fields[5]);
        assert!(
            (argmax - lambda0).abs() <= 0.01 * lambda0,
            "argmax {argmax} vs lambda0 {lambda0}"
        );
    }

    #[test]
    fn markdown_columns_are_aligned() {
        let artifact = TableArtifact {
            kind: ExperimentKind::Custom,
            title: "t".to_string(),
            columns: vec!["a".to_string(), "long_header".to_string()],
            rows: vec![vec!["wide_cell".to_string(), "1".to_string()]],
            csv_rows: vec![],
            all_converged: true,
        };
        let md = artifact.markdown();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[2], "| a         | long_header |");
        assert_eq!(lines[3], "| --------- | ----------- |");
        assert_eq!(lines[4], "| wide_cell | 1           |");
    }

    #[test]
    fn checkerboard_custom_runs_when_subdomains_set() {
        let c = parse_config("subdomains=4 cells=4 method=dd nu_red=1e-1 nu_black=1e1").unwrap();
        let artifact = run_table(&c).unwrap();
        assert_eq!(artifact.columns, vec!["nu_red", "nu_black", "DD"]);
        assert!(artifact.all_converged);
        let count: usize = artifact.rows[0][2].parse().unwrap();
        assert!((1..=40).contains(&count));
    }
}
