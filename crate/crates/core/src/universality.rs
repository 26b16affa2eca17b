//! Convergence sweeps: finite-n quantities against their large-n limits.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{self, energy, EquilibriumMeasure};
use crate::error::{invalid, Error, Result};
use crate::gap::{self, hole_probability, sine_gap, sine_kernel};
use crate::kernel::KernelField;
use crate::potential::PotentialSpec;

/// Points per axis in the kernel-error lattice on `[-box, box]²`.
const KERNEL_LATTICE: usize = 41;
const DENSITY_POINTS: usize = 257;
pub const DEFAULT_WINDOW: f64 = 16.0;

/// `sup |ρ_n − ρ|` over 257 points of `[a+d, b−d]`.
pub fn density_error(f: &KernelField, eq: &EquilibriumMeasure, d: f64) -> Result<f64> {
    let (a, b) = eq.support();
    let (lo, hi) = (a + d, b - d);
    if !(lo < hi) {
        return invalid(format!("bulk window [{lo}, {hi}] is empty"));
    }
    Ok((0..DENSITY_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (DENSITY_POINTS - 1) as f64)
        .map(|x| (f.density(x) - eq.rho(x)).abs())
        .fold(0.0, f64::max))
}

fn check_bulk(eq: &EquilibriumMeasure, lambda0: f64) -> Result<()> {
    let (a, b) = eq.support();
    if !(lambda0 > a && lambda0 < b) {
        return invalid(format!("λ0 = {lambda0} is outside the support [{a}, {b}]"));
    }
    Ok(())
}

/// `sup_{|x|,|y| ≤ box} |(nρ_n)⁻¹ K_n(λ0 + x/(nρ_n), λ0 + y/(nρ_n)) − S(x − y)|`.
pub fn kernel_error(f: &KernelField, eq: &EquilibriumMeasure, lambda0: f64, half: f64) -> Result<f64> {
    check_bulk(eq, lambda0)?;
    if !(half > 0.0 && half <= 4.0) {
        return invalid(format!("box must be in (0, 4], got {half}"));
    }
    let scale = f.n() as f64 * f.density(lambda0);
    let grid: Vec<f64> =
        (0..KERNEL_LATTICE).map(|i| -half + 2.0 * half * i as f64 / (KERNEL_LATTICE - 1) as f64).collect();
    Ok(grid
        .iter()
        .flat_map(|&x| grid.iter().map(move |&y| (x, y)))
        .map(|(x, y)| (f.kernel(lambda0 + x / scale, lambda0 + y / scale) / scale - sine_kernel(x - y)).abs())
        .fold(0.0, f64::max))
}

/// Rescaled `l`-point marginal at `λ0 + x_i/(nρ_n)` and its limit `det{S(x_i − x_j)}`.
pub fn marginal_universality(f: &KernelField, lambda0: f64, points: &[f64]) -> Result<(f64, f64)> {
    let l = points.len();
    if !(1..=4).contains(&l) {
        return invalid(format!("marginal order must be in 1..=4, got {l}"));
    }
    if points.iter().any(|x| x.abs() > 4.0) {
        return invalid("marginal points must lie in [-4, 4]");
    }
    let n = f.n();
    let scale = n as f64 * f.density(lambda0);
    let lam: Vec<f64> = points.iter().map(|x| lambda0 + x / scale).collect();
    let p = f.marginal(&lam)?;
    let falling: f64 = (0..l).map(|i| (n - i) as f64).product();
    let computed = p * falling / scale.powi(l as i32);
    let universal = DMatrix::from_fn(l, l, |i, j| sine_kernel(points[i] - points[j])).determinant();
    Ok((computed, universal))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierDiagnostic {
    pub lambda0: f64,
    pub window: f64,
    pub p: Vec<f64>,
    /// `F_n(p) = ∫₀^p K̂*_n`.
    pub f: Vec<f64>,
    pub total_jump: f64,
    /// `F_n'(0)`, central difference.
    pub slope_at_zero: f64,
    /// `max |Im F_n(p)|`, the contribution of the odd part of `𝒦*_n`.
    pub asymmetry: f64,
    /// Largest decrease of `F_n` between consecutive grid points.
    pub monotonicity_defect: f64,
}

pub const FOURIER_X_STEP: f64 = 0.05;
pub const FOURIER_P_MAX: f64 = 10.0;
pub const FOURIER_P_STEP: f64 = 0.05;

/// `F_n` for the tapered rescaled kernel `𝒦*_n(x)` on `|x| ≤ window + 1`.
pub fn fourier_diagnostic(f: &KernelField, lambda0: f64, window: f64) -> Result<FourierDiagnostic> {
    if !(window >= 8.0) {
        return invalid(format!("window must be at least 8, got {window}"));
    }
    let k_at = |x: f64| f.rescaled(lambda0, x, 0.0);
    let (kl, kr) = (k_at(-window), k_at(window));
    let tapered = |x: f64| {
        if x.abs() <= window {
            k_at(x)
        } else if x > window {
            kr * (1.0 + window - x)
        } else {
            kl * (1.0 + window + x)
        }
    };
    let steps = ((window + 1.0) / FOURIER_X_STEP).round() as i64;
    let xs: Vec<(f64, f64)> = (-steps..=steps)
        .map(|i| {
            let x = i as f64 * FOURIER_X_STEP;
            let w = if i.abs() == steps { 0.5 * FOURIER_X_STEP } else { FOURIER_X_STEP };
            (x, w * tapered(x))
        })
        .collect();
    // F_n(p) = ∫ K*(x) sin(px)/x dx + i ∫ K*(x)(1 − cos px)/x dx
    let fn_at = |p: f64| -> f64 {
        xs.iter()
            .map(|&(x, wk)| if x == 0.0 { wk * p } else { wk * (p * x).sin() / x })
            .sum()
    };
    let imag_at = |p: f64| -> f64 {
        xs.iter().filter(|(x, _)| *x != 0.0).map(|&(x, wk)| wk * (1.0 - (p * x).cos()) / x).sum()
    };
    let np = (FOURIER_P_MAX / FOURIER_P_STEP).round() as i64;
    let p: Vec<f64> = (-np..=np).map(|i| i as f64 * FOURIER_P_STEP).collect();
    let fv: Vec<f64> = p.par_iter().map(|&q| fn_at(q)).collect();
    let mid = np as usize;
    let total_jump = fv[fv.len() - 1] - fv[0];
    let h = 1e-3;
    let slope_at_zero = (fn_at(h) - fn_at(-h)) / (2.0 * h);
    let asymmetry = p[mid..].par_iter().map(|&q| imag_at(q).abs()).reduce(|| 0.0, f64::max);
    let monotonicity_defect = fv.windows(2).map(|w| (w[0] - w[1]).max(0.0)).fold(0.0, f64::max);
    Ok(FourierDiagnostic {
        lambda0,
        window,
        p,
        f: fv,
        total_jump,
        slope_at_zero,
        asymmetry,
        monotonicity_defect,
    })
}

impl FourierDiagnostic {
    pub fn monotone_within(&self, slack: f64) -> bool {
        self.monotonicity_defect <= slack
    }
}

pub fn write_fourier_csv<W: std::io::Write>(d: &FourierDiagnostic, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["p", "F_n"])?;
    for (p, v) in d.p.iter().zip(&d.f) {
        w.write_record([crate::io_fmt(*p), crate::io_fmt(*v)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub potential: PotentialSpec,
    pub n_list: Vec<usize>,
    pub lambda0: f64,
    /// Bulk margin: densities are compared on `[a+d, b−d]`.
    pub d: f64,
    /// Half-width of the kernel-error box.
    pub kernel_box: f64,
    /// Offset of the second base point in the λ0-independence probe.
    pub lambda0_shift: f64,
    pub gap_s: Vec<f64>,
    pub gap_order: usize,
    pub fourier_window: f64,
    pub grid_order: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            potential: PotentialSpec::gaussian(),
            n_list: vec![8, 16, 32, 64],
            lambda0: 0.0,
            d: 0.5,
            kernel_box: 2.0,
            lambda0_shift: 0.2,
            gap_s: (0..=8).map(|i| 0.25 * i as f64).collect(),
            gap_order: gap::DEFAULT_ORDER,
            fourier_window: DEFAULT_WINDOW,
            grid_order: equilibrium::DEFAULT_GRID_ORDER,
        }
    }
}

impl SuiteConfig {
    pub fn for_potential(potential: PotentialSpec) -> Self {
        SuiteConfig { potential, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub n: usize,
    pub sup_density_error: f64,
    pub kernel_sup_error: f64,
    /// Kernel error at `λ0 + lambda0_shift`.
    pub kernel_sup_error_shifted: f64,
    pub gap_sup_error: f64,
    pub free_energy: f64,
    pub free_energy_error: f64,
    pub fourier_total_jump: f64,
    pub fourier_slope_at_zero: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slopes {
    pub density: Option<f64>,
    pub kernel: Option<f64>,
    pub gap: Option<f64>,
    pub free_energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: SuiteConfig,
    pub support: (f64, f64),
    pub window: (f64, f64),
    pub equilibrium_energy: f64,
    pub records: Vec<ConvergenceRecord>,
    pub slopes: Slopes,
    pub invariants: Vec<InvariantCheck>,
    pub notes: Vec<String>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(|c| c.passed)
    }
}

/// Least-squares slope of `log y` against `log n`.
pub fn loglog_slope(ns: &[usize], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        ns.iter().zip(ys).filter(|(_, y)| **y > 0.0).map(|(n, y)| ((*n as f64).ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

const FREE_ENERGY_CONSTANT: f64 = 5.0;

fn context(n: usize, e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("n = {n}: {m}")),
        Error::Resolution { k, detail } => Error::Resolution { k, detail: format!("n = {n}: {detail}") },
        other => other,
    }
}

fn record(cfg: &SuiteConfig, eq: &EquilibriumMeasure, e_eq: f64, n: usize) -> Result<ConvergenceRecord> {
    let f = KernelField::build(&cfg.potential, n)?;
    let sup_density_error = density_error(&f, eq, cfg.d)?;
    let kernel_sup_error = kernel_error(&f, eq, cfg.lambda0, cfg.kernel_box)?;
    let kernel_sup_error_shifted = kernel_error(&f, eq, cfg.lambda0 + cfg.lambda0_shift, cfg.kernel_box)?;
    let mut gap_sup_error: f64 = 0.0;
    for &s in &cfg.gap_s {
        let en = hole_probability(&f, cfg.lambda0, s, cfg.gap_order)?.value;
        let lim = sine_gap(s, cfg.gap_order)?.value;
        gap_sup_error = gap_sup_error.max((en - lim).abs());
    }
    let free_energy = f.evaluator().table().free_energy();
    let fd = fourier_diagnostic(&f, cfg.lambda0, cfg.fourier_window)?;
    Ok(ConvergenceRecord {
        n,
        sup_density_error,
        kernel_sup_error,
        kernel_sup_error_shifted,
        gap_sup_error,
        free_energy,
        free_energy_error: (free_energy - e_eq).abs(),
        fourier_total_jump: fd.total_jump,
        fourier_slope_at_zero: fd.slope_at_zero,
    })
}

fn check(name: &str, passed: bool, detail: String) -> InvariantCheck {
    InvariantCheck { name: name.into(), passed, detail }
}

fn invariants(records: &[ConvergenceRecord]) -> Vec<InvariantCheck> {
    let mut out = Vec::new();
    if records.len() < 2 {
        return out;
    }
    let first = &records[0];
    let last = &records[records.len() - 1];
    let dens: Vec<f64> = records.iter().map(|r| r.sup_density_error).collect();
    out.push(check(
        "density-error-decreasing",
        dens.windows(2).all(|w| w[1] < w[0]),
        format!("{dens:?}"),
    ));
    out.push(check(
        "kernel-error-decreasing",
        last.kernel_sup_error < first.kernel_sup_error,
        format!("n={}: {:.3e}, n={}: {:.3e}", first.n, first.kernel_sup_error, last.n, last.kernel_sup_error),
    ));
    out.push(check(
        "gap-error-decreasing",
        last.gap_sup_error < first.gap_sup_error,
        format!("n={}: {:.3e}, n={}: {:.3e}", first.n, first.gap_sup_error, last.n, last.gap_sup_error),
    ));
    let scaled: Vec<f64> =
        records.iter().map(|r| r.free_energy_error * r.n as f64 / (r.n as f64).ln().max(1.0)).collect();
    out.push(check(
        "free-energy-rate",
        scaled.iter().all(|&c| c < FREE_ENERGY_CONSTANT) && last.free_energy_error < first.free_energy_error,
        format!("error·n/log n = {scaled:?}"),
    ));
    let uniform = records.iter().all(|r| {
        let (e0, e1) = (r.kernel_sup_error, r.kernel_sup_error_shifted);
        e0 < 2.0 * e1 && e1 < 2.0 * e0
    });
    out.push(check(
        "lambda0-independence",
        uniform,
        records
            .iter()
            .map(|r| format!("n={}: {:.3e}/{:.3e}", r.n, r.kernel_sup_error, r.kernel_sup_error_shifted))
            .collect::<Vec<_>>()
            .join(", "),
    ));
    out
}

/// Runs the sweep over `cfg.n_list`; records are computed in parallel and
/// returned sorted by `n`.
pub fn run_suite(cfg: &SuiteConfig) -> Result<ConvergenceReport> {
    let eq = equilibrium::solve(&cfg.potential, cfg.grid_order)?;
    let (a, b) = eq.support();
    let e_eq = energy(&cfg.potential, &eq);
    let mut ns = cfg.n_list.clone();
    ns.sort_unstable();
    ns.dedup();
    let records = ns
        .par_iter()
        .map(|&n| record(cfg, &eq, e_eq, n).map_err(|e| context(n, e)))
        .collect::<Result<Vec<_>>>()?;
    let col = |f: fn(&ConvergenceRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
    let slopes = Slopes {
        density: loglog_slope(&ns, &col(|r| r.sup_density_error)),
        kernel: loglog_slope(&ns, &col(|r| r.kernel_sup_error)),
        gap: loglog_slope(&ns, &col(|r| r.gap_sup_error)),
        free_energy: loglog_slope(&ns, &col(|r| r.free_energy_error)),
    };
    Ok(ConvergenceReport {
        config: cfg.clone(),
        support: (a, b),
        window: (a + cfg.d, b - cfg.d),
        equilibrium_energy: e_eq,
        invariants: invariants(&records),
        records,
        slopes,
        notes: vec![format!(
            "Fourier window fixed at {} for every n rather than growing like log n",
            cfg.fourier_window
        )],
    })
}

/// Writes one two-column CSV per error column into `dir`: `density_error.csv`,
/// `kernel_error.csv`, `gap_error.csv`, `free_energy_error.csv`.
pub fn write_report_csvs(report: &ConvergenceReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let columns: [(&str, fn(&ConvergenceRecord) -> f64); 4] = [
        ("density_error", |r| r.sup_density_error),
        ("kernel_error", |r| r.kernel_sup_error),
        ("gap_error", |r| r.gap_sup_error),
        ("free_energy_error", |r| r.free_energy_error),
    ];
    for (name, get) in columns {
        let file = std::fs::File::create(dir.join(format!("{name}.csv")))?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
        w.write_record(["n", name])?;
        for r in &report.records {
            w.write_record([r.n.to_string(), crate::io_fmt(get(r))])?;
        }
        w.flush()?;
    }
    Ok(())
}

/// `2πρ(λ0)`, the limit of the Fourier total jump.
pub fn expected_jump(eq: &EquilibriumMeasure, lambda0: f64) -> f64 {
    2.0 * PI * eq.rho(lambda0)
}
