//! Orthonormal polynomials for the weight `e^{-nV}`.
//!
//! The recurrence is computed by a discretized Stieltjes (Lanczos) procedure
//! with full reorthogonalization on a composite Gauss–Legendre rule over
//! `[-L-2, L+2]`, `L` the clip radius. Nodes whose weight underflows are
//! dropped. The weight is shifted by `min V` so that `e^{-n(V - V_min)} ≤ 1`
//! and the shift is carried in `log μ_0`.
//!
//! The orthonormal functions `ψ_k = p_k e^{-nV/2}` satisfy
//!
//! ```text
//! λ ψ_k = J_k ψ_{k+1} + b_k ψ_k + J_{k-1} ψ_{k-1}
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::potential::PotentialSpec;
use crate::quadrature::composite;

pub const MAX_N: usize = 256;
const PANEL_ORDER: usize = 24;
const RESOLUTION_TOL: f64 = 1e-8;
/// `n(V − V_min)` beyond which a node carries no weight.
const UNDERFLOW: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceTable {
    pub n: usize,
    /// `J_0 … J_{n-1}`.
    pub off_diag: Vec<f64>,
    /// `b_0 … b_{n-1}`.
    pub diag: Vec<f64>,
    /// `log γ_0 … log γ_n`.
    pub log_gamma: Vec<f64>,
}

struct Discretization {
    nodes: Vec<f64>,
    sqrt_w: Vec<f64>,
    log_mu0: f64,
}

fn discretize(p: &PotentialSpec, n: usize, panels: usize) -> Result<Discretization> {
    let l = p.clip_radius() + 2.0;
    let rule = composite(panels, PANEL_ORDER, -l, l)?;
    let nf = n as f64;
    let vmin = rule.nodes.iter().map(|&x| p.value(x)).fold(f64::INFINITY, f64::min);
    let mut nodes = Vec::new();
    let mut w = Vec::new();
    for (x, wt) in rule.iter() {
        let e = nf * (p.value(x) - vmin);
        if e < UNDERFLOW {
            nodes.push(x);
            w.push(wt * (-e).exp());
        }
    }
    let mu0: f64 = w.iter().sum();
    if nodes.len() <= 2 * n + 2 || !(mu0 > 0.0) {
        return Err(Error::Resolution {
            k: 0,
            detail: format!("only {} quadrature nodes carry weight", nodes.len()),
        });
    }
    let sqrt_w = w.iter().map(|v| (v / mu0).sqrt()).collect();
    Ok(Discretization { nodes, sqrt_w, log_mu0: mu0.ln() - nf * vmin })
}

/// Lanczos on `diag(nodes)` started from `√w`; returns `(J, b)` of length `n`.
fn lanczos(d: &Discretization, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = d.nodes.len();
    let mut q: Vec<Vec<f64>> = vec![d.sqrt_w.clone()];
    let mut off = Vec::with_capacity(n);
    let mut diag = Vec::with_capacity(n);
    for k in 0..n {
        let qk = &q[k];
        let bk: f64 = qk.iter().zip(&d.nodes).map(|(v, x)| v * v * x).sum();
        let mut r: Vec<f64> = (0..m)
            .map(|i| {
                let prev = if k > 0 { off[k - 1] * q[k - 1][i] } else { 0.0 };
                (d.nodes[i] - bk) * qk[i] - prev
            })
            .collect();
        for _ in 0..2 {
            for qj in &q {
                let c: f64 = qj.iter().zip(&r).map(|(a, b)| a * b).sum();
                r.iter_mut().zip(qj).for_each(|(ri, qi)| *ri -= c * qi);
            }
        }
        let jk = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(jk > 1e-300) {
            return Err(Error::Resolution { k, detail: "Lanczos breakdown".into() });
        }
        diag.push(bk);
        off.push(jk);
        r.iter_mut().for_each(|v| *v /= jk);
        q.push(r);
    }
    Ok((off, diag))
}

fn panels_for(n: usize) -> usize {
    4 * n + 64
}

/// Jacobi coefficients and leading coefficients of the orthonormal
/// polynomials for `e^{-nV}`, `1 ≤ n ≤ 256`.
pub fn build_recurrence(p: &PotentialSpec, n: usize) -> Result<RecurrenceTable> {
    if n == 0 || n > MAX_N {
        return invalid(format!("n must be in 1..={MAX_N}, got {n}"));
    }
    let fine = discretize(p, n, panels_for(n))?;
    let (off, diag) = lanczos(&fine, n)?;
    let coarse = discretize(p, n, panels_for(n) / 2)?;
    let (off_c, diag_c) = lanczos(&coarse, n)?;
    let drift = (fine.log_mu0 - coarse.log_mu0).abs();
    if drift > RESOLUTION_TOL {
        return Err(Error::Resolution { k: 0, detail: format!("weight mass changed by {drift:.2e} under refinement") });
    }
    for k in 0..n {
        let rel = (off[k] - off_c[k]).abs() / off[k];
        let scale = off[k].max(diag[k].abs());
        if rel > RESOLUTION_TOL || (diag[k] - diag_c[k]).abs() > RESOLUTION_TOL * scale {
            return Err(Error::Resolution {
                k,
                detail: format!("recurrence coefficient changed by {rel:.2e} under refinement"),
            });
        }
    }
    let mut log_gamma = Vec::with_capacity(n + 1);
    let mut acc = -0.5 * fine.log_mu0;
    log_gamma.push(acc);
    for j in &off {
        acc -= j.ln();
        log_gamma.push(acc);
    }
    Ok(RecurrenceTable { n, off_diag: off, diag, log_gamma })
}

impl RecurrenceTable {
    /// `−n⁻² log Q_{n,2}` with `Q_{n,2} = n! ∏_{l<n} γ_l^{-2}`.
    pub fn free_energy(&self) -> f64 {
        let n = self.n as f64;
        let log_fact: f64 = (2..=self.n).map(|k| (k as f64).ln()).sum();
        let s: f64 = self.log_gamma[..self.n].iter().sum();
        -(log_fact - 2.0 * s) / (n * n)
    }

    /// `b_{n-1} ± 2J_{n-1}`, a cheap estimate of the bulk of `ρ_n`.
    pub fn bulk_estimate(&self) -> (f64, f64) {
        let k = self.n - 1;
        (self.diag[k] - 2.0 * self.off_diag[k], self.diag[k] + 2.0 * self.off_diag[k])
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["k", "J_k", "b_k"])?;
        for k in 0..self.n {
            w.write_record([k.to_string(), crate::io_fmt(self.off_diag[k]), crate::io_fmt(self.diag[k])])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `−n⁻² log Q_{n,2}` for the potential `p`.
pub fn free_energy(p: &PotentialSpec, n: usize) -> Result<f64> {
    Ok(build_recurrence(p, n)?.free_energy())
}

/// Evaluates `ψ_0 … ψ_k` with a tracked log scale.
#[derive(Debug, Clone)]
pub struct PsiEvaluator {
    table: RecurrenceTable,
    potential: PotentialSpec,
    window: (f64, f64),
}

impl PsiEvaluator {
    pub fn new(table: RecurrenceTable, potential: PotentialSpec) -> Self {
        let l = potential.clip_radius() + 2.0;
        let nf = table.n as f64;
        let grid: Vec<f64> = (0..=4096).map(|i| -l + 2.0 * l * i as f64 / 4096.0).collect();
        let vmin = grid.iter().map(|&x| potential.value(x)).fold(f64::INFINITY, f64::min);
        let live: Vec<&f64> = grid.iter().filter(|&&x| nf * (potential.value(x) - vmin) < UNDERFLOW).collect();
        let window = (**live.first().unwrap_or(&&-l), **live.last().unwrap_or(&&l));
        PsiEvaluator { table, potential, window }
    }

    pub fn build(p: &PotentialSpec, n: usize) -> Result<Self> {
        Ok(Self::new(build_recurrence(p, n)?, p.clone()))
    }

    pub fn table(&self) -> &RecurrenceTable {
        &self.table
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn n(&self) -> usize {
        self.table.n
    }

    /// Interval outside which every `ψ_k` is negligible.
    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// `ψ_0(λ) … ψ_{k_max}(λ)`, `k_max ≤ n`.
    pub fn eval(&self, lambda: f64, k_max: usize) -> Vec<f64> {
        let k_max = k_max.min(self.table.n);
        let mut out = vec![0.0; k_max + 1];
        let mut log_scale = self.table.log_gamma[0] - 0.5 * self.table.n as f64 * self.potential.value(lambda);
        let (mut prev, mut cur) = (0.0, 1.0);
        let emit = |v: f64, s: f64| -> f64 {
            if v == 0.0 {
                return 0.0;
            }
            let lv = v.abs().ln() + s;
            if lv < -690.0 {
                0.0
            } else {
                v.signum() * lv.exp()
            }
        };
        out[0] = emit(cur, log_scale);
        for k in 0..k_max {
            let j = self.table.off_diag[k];
            let jm = if k > 0 { self.table.off_diag[k - 1] } else { 0.0 };
            let next = ((lambda - self.table.diag[k]) * cur - jm * prev) / j;
            prev = cur;
            cur = next;
            let mag = prev.abs().max(cur.abs());
            if mag > 1e150 || (mag < 1e-150 && mag > 0.0) {
                prev /= mag;
                cur /= mag;
                log_scale += mag.ln();
            }
            out[k + 1] = emit(cur, log_scale);
        }
        out
    }
}
