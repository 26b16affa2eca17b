use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};

use mml::equilibrium::{self, energy};
use mml::gap::{hole_probability, sine_gap};
use mml::kernel::KernelField;
use mml::loggas::{self, GasConfig};
use mml::orthopoly::build_recurrence;
use mml::potential::{self, PotentialSpec};
use mml::universality::{self, SuiteConfig};

use crate::args::{EqArgs, GapArgs, KernelArgs, OrthoArgs, SampleArgs, UniversalityArgs};

/// A bad flag value or a missing referenced file; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

/// Result of one subcommand, before the manifest is written.
pub struct Outcome {
    pub potential: PotentialSpec,
    pub params: Value,
    pub files: Vec<PathBuf>,
    pub summary: Value,
    pub text: Vec<String>,
    /// Asserted invariants held.
    pub passed: bool,
}

pub fn load_potential(arg: Option<&str>) -> Result<PotentialSpec> {
    let p: PotentialSpec = match arg.map(str::trim) {
        None => PotentialSpec::gaussian(),
        Some(s @ ("gaussian" | "quartic")) => s.parse()?,
        Some(s) if s.starts_with('{') => s.parse()?,
        Some(path) => {
            if !Path::new(path).is_file() {
                return usage(format!("potential file '{path}' does not exist"));
            }
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            text.parse().with_context(|| format!("parsing potential file {path}"))?
        }
    };
    let report = potential::validate(&p);
    if !report.passed() {
        let failed: Vec<String> =
            report.failures().iter().map(|c| format!("{} ({}; worst value {})", c.name, c.detail, c.worst_value)).collect();
        return Err(mml::Error::Validation(failed.join("; ")).into());
    }
    Ok(p)
}

/// Parses `lo..hi:step` (inclusive) or a comma-separated list.
pub fn parse_grid(arg: &str) -> Result<Vec<f64>> {
    let bad = || UsageError(format!("invalid grid '{arg}': expected lo..hi:step or a comma-separated list"));
    if let Some((range, step)) = arg.split_once(':') {
        let (lo, hi) = range.split_once("..").ok_or_else(bad)?;
        let (lo, hi, step): (f64, f64, f64) = (
            lo.trim().parse().map_err(|_| bad())?,
            hi.trim().parse().map_err(|_| bad())?,
            step.trim().parse().map_err(|_| bad())?,
        );
        if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(bad().into());
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|i| lo + step * i as f64).collect());
    }
    arg.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| bad().into())).collect()
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn eq(a: &EqArgs, out: &Path) -> Result<Outcome> {
    let p = load_potential(a.common.potential.as_deref())?;
    if a.points < 2 {
        return usage("--points must be at least 2");
    }
    let m = equilibrium::solve(&p, a.grid_order)?;
    let (lo, hi) = m.support();
    let e = energy(&p, &m);
    write_json(out, "equilibrium.json", &m)?;
    equilibrium::write_density_csv(&m, a.points, create(out, "density.csv")?)?;
    Ok(Outcome {
        potential: p,
        params: json!({ "grid_order": a.grid_order, "points": a.points }),
        files: vec!["equilibrium.json".into(), "density.csv".into()],
        summary: json!({ "support": [lo, hi], "u_star": m.u_star(), "energy": e }),
        text: vec![
            format!("support: [{lo:.6}, {hi:.6}]"),
            format!("u_star: {:.6}", m.u_star()),
            format!("energy: {e:.6}"),
        ],
        passed: true,
    })
}

pub fn ortho(a: &OrthoArgs, out: &Path) -> Result<Outcome> {
    let p = load_potential(a.common.potential.as_deref())?;
    let t = build_recurrence(&p, a.n)?;
    write_json(out, "recurrence.json", &t)?;
    t.write_csv(create(out, "recurrence.csv")?)?;
    let f = t.free_energy();
    let j_last = *t.off_diag.last().unwrap_or(&0.0);
    Ok(Outcome {
        potential: p,
        params: json!({ "n": a.n }),
        files: vec!["recurrence.json".into(), "recurrence.csv".into()],
        summary: json!({ "n": a.n, "free_energy": f, "j_last": j_last }),
        text: vec![format!("n: {}", a.n), format!("J_(n-1): {j_last:.10}"), format!("free energy: {f:.10}")],
        passed: true,
    })
}

pub fn kernel(a: &KernelArgs, out: &Path) -> Result<Outcome> {
    let p = load_potential(a.common.potential.as_deref())?;
    if a.points < 2 || a.steps < 2 || !(a.half > 0.0) {
        return usage("--points and --steps must be at least 2 and --half positive");
    }
    let f = KernelField::build(&p, a.n)?;
    let (lo, hi) = f.evaluator().window();
    f.write_density_csv(lo, hi, a.points, create(out, "kernel_density.csv")?)?;
    f.write_rescaled_csv(a.lambda0, a.half, a.steps, create(out, "kernel_rescaled.csv")?)?;
    let ids = f.cd_identities();
    write_json(out, "identities.json", &ids)?;
    let rho = f.density(a.lambda0);
    Ok(Outcome {
        potential: p,
        params: json!({ "n": a.n, "lambda0": a.lambda0, "points": a.points, "half": a.half, "steps": a.steps }),
        files: vec!["kernel_density.csv".into(), "kernel_rescaled.csv".into(), "identities.json".into()],
        summary: json!({ "n": a.n, "rho_n_at_lambda0": rho, "identities": ids }),
        text: vec![
            format!("rho_n({}) = {rho:.10}", a.lambda0),
            format!("second-moment residual: {:.3e}", ids.second_moment_residual),
            format!("first-moment residual: {:.3e}", ids.first_moment_residual),
            format!("derivative residual: {:.3e}", ids.derivative_residual),
        ],
        passed: true,
    })
}

pub fn gap(a: &GapArgs, out: &Path) -> Result<Outcome> {
    let p = load_potential(a.common.potential.as_deref())?;
    let s = parse_grid(&a.s)?;
    if s.iter().any(|x| *x < 0.0) {
        return usage("gap lengths must be nonnegative");
    }
    let mut text = Vec::new();
    let (file, summary) = if a.sine {
        let rows = s.iter().map(|&x| Ok((x, sine_gap(x, a.order)?))).collect::<Result<Vec<_>>>()?;
        mml::gap::write_sine_csv(&rows, create(out, "sine_gap.csv")?)?;
        let worst = rows.iter().map(|r| r.1.richardson_error_estimate).fold(0.0, f64::max);
        text.push(format!("{} points, max error estimate {worst:.3e}", rows.len()));
        ("sine_gap.csv", json!({ "points": rows.len(), "max_error_estimate": worst }))
    } else {
        let n = a.n.expect("clap enforces --n without --sine");
        let f = KernelField::build(&p, n)?;
        let rows = s
            .iter()
            .map(|&x| Ok((x, hole_probability(&f, a.lambda0, x, a.order)?.value, sine_gap(x, a.order)?.value)))
            .collect::<Result<Vec<_>>>()?;
        mml::gap::write_gap_csv(&rows, create(out, "gap.csv")?)?;
        let worst = rows.iter().map(|r| (r.1 - r.2).abs()).fold(0.0, f64::max);
        text.push(format!("{} points, sup |E_n - det(1-S)| = {worst:.3e}", rows.len()));
        ("gap.csv", json!({ "points": rows.len(), "sup_abs_diff": worst }))
    };
    Ok(Outcome {
        potential: p,
        params: json!({ "sine": a.sine, "n": a.n, "lambda0": a.lambda0, "s": s, "order": a.order }),
        files: vec![file.into()],
        summary,
        text,
        passed: true,
    })
}

pub fn sample(a: &SampleArgs, out: &Path) -> Result<Outcome> {
    let p = load_potential(a.common.potential.as_deref())?;
    if a.chains == 0 || a.samples % a.chains != 0 {
        return usage(format!("--samples ({}) must be a multiple of --chains ({})", a.samples, a.chains));
    }
    let mut cfg = GasConfig::new(p.clone(), a.n, a.beta).with_seed(a.common.seed);
    if let Some(b) = a.burn_in {
        cfg = cfg.with_burn_in(b);
    }
    if let Some(t) = a.thin {
        cfg = cfg.with_thin(t);
    }
    // an empty request skips burn-in entirely
    let s = if a.samples == 0 {
        loggas::sample(&cfg.clone().with_burn_in(0), 0)?
    } else {
        loggas::sample_chains(&cfg, a.samples / a.chains, a.chains)?
    };
    s.write_csv(create(out, "sample.csv")?)?;
    let mut files: Vec<PathBuf> = vec!["sample.csv".into()];
    let mut text = vec![format!("{} configurations, acceptance rate {:.3}", s.configurations.len(), s.acceptance_rate)];
    let mut summary = json!({
        "configurations": s.configurations.len(),
        "acceptance_rate": s.acceptance_rate,
        "proposal_scale": s.proposal_scale,
        "flagged": s.flagged,
    });
    if !s.configurations.is_empty() {
        let eq = equilibrium::solve(&p, equilibrium::DEFAULT_GRID_ORDER)?;
        let r = loggas::ncm_statistics(&s, &eq, &p)?;
        write_json(out, "ncm_report.json", &r)?;
        files.push("ncm_report.json".into());
        text.push(format!("CDF distance to equilibrium: {:.4}", r.cdf_distance));
        summary["ncm"] = serde_json::to_value(&r)?;
    }
    if s.flagged {
        text.push("warning: acceptance rate outside [0.1, 0.9] after tuning".into());
    }
    Ok(Outcome {
        potential: p,
        params: json!({
            "n": a.n, "beta": a.beta, "samples": a.samples, "chains": a.chains,
            "burn_in": cfg.burn_in, "thin": cfg.thin,
        }),
        files,
        summary,
        text,
        passed: true,
    })
}

pub fn universality(a: &UniversalityArgs, out: &Path) -> Result<Outcome> {
    let mut cfg = match &a.config {
        Some(path) => {
            if !path.is_file() {
                return usage(format!("config file '{}' does not exist", path.display()));
            }
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<SuiteConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SuiteConfig::default(),
    };
    if a.common.potential.is_some() || a.config.is_none() {
        cfg.potential = load_potential(a.common.potential.as_deref())?;
    } else {
        let report = potential::validate(&cfg.potential);
        if !report.passed() {
            let names: Vec<&str> = report.failures().iter().map(|c| c.name.as_str()).collect();
            return Err(mml::Error::Validation(names.join(", ")).into());
        }
    }
    if let Some(n) = &a.n {
        cfg.n_list = n.clone();
    }
    if let Some(x) = a.lambda0 {
        cfg.lambda0 = x;
    }
    if let Some(d) = a.d {
        cfg.d = d;
    }
    if let Some(b) = a.kernel_box {
        cfg.kernel_box = b;
    }
    let report = universality::run_suite(&cfg)?;
    write_json(out, "report.json", &report)?;
    universality::write_report_csvs(&report, out)?;
    let mut files: Vec<PathBuf> =
        ["report.json", "density_error.csv", "kernel_error.csv", "gap_error.csv", "free_energy_error.csv"]
            .iter()
            .map(PathBuf::from)
            .collect();
    let mut text: Vec<String> = report
        .records
        .iter()
        .map(|r| {
            format!(
                "n={:<4} density {:.3e}  kernel {:.3e}  gap {:.3e}  free energy {:.3e}",
                r.n, r.sup_density_error, r.kernel_sup_error, r.gap_sup_error, r.free_energy_error
            )
        })
        .collect();
    let mut summary = json!({ "records": report.records.len(), "passed": report.passed(), "invariants": report.invariants });
    if let Some(&n_max) = cfg.n_list.iter().max() {
        let f = KernelField::build(&cfg.potential, n_max)?;
        let d = universality::fourier_diagnostic(&f, cfg.lambda0, cfg.fourier_window)?;
        universality::write_fourier_csv(&d, create(out, "fourier.csv")?)?;
        files.push("fourier.csv".into());
        text.push(format!(
            "Fourier (n={n_max}): total jump {:.4}, slope at 0 {:.4}, monotonicity defect {:.2e}",
            d.total_jump, d.slope_at_zero, d.monotonicity_defect
        ));
        summary["fourier"] = json!({
            "n": n_max, "total_jump": d.total_jump, "slope_at_zero": d.slope_at_zero,
            "asymmetry": d.asymmetry, "monotonicity_defect": d.monotonicity_defect,
        });
    }
    for c in &report.invariants {
        text.push(format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    Ok(Outcome {
        potential: cfg.potential.clone(),
        params: serde_json::to_value(&cfg)?,
        files,
        summary,
        text,
        passed: report.passed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0..3:0.1").unwrap();
        assert_eq!(g.len(), 31);
        assert!((g[30] - 3.0).abs() < 1e-12);
        assert_eq!(parse_grid("0.5, 1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        for bad in ["0..3", "3..0:0.1", "0..1:0", "a,b", "0..1:-1"] {
            assert!(parse_grid(bad).unwrap_err().downcast_ref::<UsageError>().is_some(), "{bad}");
        }
    }

    #[test]
    fn potential_arguments() {
        assert_eq!(load_potential(None).unwrap(), PotentialSpec::gaussian());
        assert_eq!(load_potential(Some("quartic")).unwrap(), PotentialSpec::quartic(1.0, 0.0));
        let q = load_potential(Some(r#"{"kind": "quartic", "params": {"g": 1, "t": 0.5}}"#)).unwrap();
        assert_eq!(q, PotentialSpec::quartic(1.0, 0.5));
        let e = load_potential(Some("/nonexistent/v.json")).unwrap_err();
        assert!(e.downcast_ref::<UsageError>().is_some());
        let e = load_potential(Some(r#"{"kind": "even-polynomial", "params": {"coefficients": [0, 0, -1]}}"#)).unwrap_err();
        assert!(matches!(e.downcast_ref::<mml::Error>(), Some(mml::Error::Validation(_))));
    }
}
