//! Reproducing kernel `K_n(λ, μ) = Σ_{k<n} ψ_k(λ)ψ_k(μ)` and derived objects.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::orthopoly::PsiEvaluator;
use crate::potential::PotentialSpec;
use crate::quadrature::composite;

const QUAD_ORDER: usize = 20;

/// Gauss–Legendre nodes on the evaluator window with `ψ_0 … ψ_n` cached.
#[derive(Debug, Clone)]
struct Tabulation {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    psi: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct KernelField {
    psi: PsiEvaluator,
    n: usize,
    j_last: f64,
    delta_switch: f64,
    tab: Tabulation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub n: usize,
    /// `∬(λ−μ)²K_n²` and `2J_{n−1}²`.
    pub second_moment: (f64, f64),
    pub second_moment_residual: f64,
    /// Max over sample points of `|∫(λ−μ)K_n²dμ − J_{n−1}ψ_{n−1}ψ_n|`.
    pub first_moment_residual: f64,
    /// Max over 16 bulk points of `|ρ_n' − ∫(V'(μ)−V'(λ))K_n²dμ|`.
    pub derivative_residual: f64,
    pub points: Vec<f64>,
}

impl KernelField {
    pub fn new(psi: PsiEvaluator) -> Self {
        let n = psi.n();
        let j_last = psi.table().off_diag[n - 1];
        let (lo, hi) = psi.window();
        let rule = composite(2 * n + 40, QUAD_ORDER, lo, hi).expect("nonempty window");
        let psi_at: Vec<Vec<f64>> = rule.nodes.par_iter().map(|&x| psi.eval(x, n)).collect();
        let tab = Tabulation { nodes: rule.nodes, weights: rule.weights, psi: psi_at };
        let delta_switch = 1e-4 * 4.0 * j_last;
        KernelField { psi, n, j_last, delta_switch, tab }
    }

    pub fn build(p: &PotentialSpec, n: usize) -> Result<Self> {
        Ok(Self::new(PsiEvaluator::build(p, n)?))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j_last(&self) -> f64 {
        self.j_last
    }

    pub fn evaluator(&self) -> &PsiEvaluator {
        &self.psi
    }

    pub fn potential(&self) -> &PotentialSpec {
        self.psi.potential()
    }

    /// Bulk estimate `b_{n−1} ± 2J_{n−1}`.
    pub fn bulk(&self) -> (f64, f64) {
        self.psi.table().bulk_estimate()
    }

    pub fn delta_switch(&self) -> f64 {
        self.delta_switch
    }

    pub fn kernel_sum(&self, lambda: f64, mu: f64) -> f64 {
        let a = self.psi.eval(lambda, self.n - 1);
        let b = self.psi.eval(mu, self.n - 1);
        a.iter().zip(&b).map(|(x, y)| x * y).sum()
    }

    pub fn kernel_cd(&self, lambda: f64, mu: f64) -> f64 {
        let a = self.psi.eval(lambda, self.n);
        let b = self.psi.eval(mu, self.n);
        let n = self.n;
        self.j_last * (a[n] * b[n - 1] - a[n - 1] * b[n]) / (lambda - mu)
    }

    pub fn kernel(&self, lambda: f64, mu: f64) -> f64 {
        if (lambda - mu).abs() > self.delta_switch {
            self.kernel_cd(lambda, mu)
        } else {
            self.kernel_sum(lambda, mu)
        }
    }

    /// `ρ_n(λ) = n⁻¹ K_n(λ, λ)`.
    pub fn density(&self, lambda: f64) -> f64 {
        self.psi.eval(lambda, self.n - 1).iter().map(|v| v * v).sum::<f64>() / self.n as f64
    }

    /// `((n−l)!/n!) det{K_n(λ_j, λ_k)}`.
    pub fn marginal(&self, points: &[f64]) -> Result<f64> {
        let l = points.len();
        if l == 0 || l > self.n {
            return invalid(format!("marginal order must be in 1..={}, got {l}", self.n));
        }
        let m = self.gram(points);
        let falling: f64 = (0..l).map(|i| (self.n - i) as f64).product();
        Ok(m.determinant() / falling)
    }

    /// `[K_n(λ_j, λ_k)]`.
    pub fn gram(&self, points: &[f64]) -> DMatrix<f64> {
        let l = points.len();
        let psi: Vec<Vec<f64>> = points.iter().map(|&x| self.psi.eval(x, self.n - 1)).collect();
        DMatrix::from_fn(l, l, |i, j| psi[i].iter().zip(&psi[j]).map(|(a, b)| a * b).sum())
    }

    /// `𝒦_n(x, y) = n⁻¹ K_n(λ0 + x/n, λ0 + y/n)`.
    pub fn rescaled(&self, lambda0: f64, x: f64, y: f64) -> f64 {
        let n = self.n as f64;
        self.kernel(lambda0 + x / n, lambda0 + y / n) / n
    }

    /// `∫ f dλ` over the tabulated window.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.tab.nodes.iter().zip(&self.tab.weights).map(|(x, w)| w * f(*x)).sum()
    }

    /// `∫ K_n(λ, ν) K_n(ν, μ) dν`.
    pub fn reproduce(&self, lambda: f64, mu: f64) -> f64 {
        let a = self.psi.eval(lambda, self.n - 1);
        let b = self.psi.eval(mu, self.n - 1);
        let mut acc = 0.0;
        for (w, p) in self.tab.weights.iter().zip(&self.tab.psi) {
            let ka: f64 = a.iter().zip(p).map(|(x, y)| x * y).sum();
            let kb: f64 = b.iter().zip(p).map(|(x, y)| x * y).sum();
            acc += w * ka * kb;
        }
        acc
    }

    /// `Φ_kl = ∫ φ ψ_k ψ_l`, `k, l < n`.
    fn moment_matrix(&self, phi: &impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for ((x, w), p) in self.tab.nodes.iter().zip(&self.tab.weights).zip(&self.tab.psi) {
            let f = w * phi(*x);
            for k in 0..n {
                let fk = f * p[k];
                for l in 0..=k {
                    m[(k, l)] += fk * p[l];
                }
            }
        }
        for k in 0..n {
            for l in 0..k {
                m[(l, k)] = m[(k, l)];
            }
        }
        m
    }

    /// `Var N_n[φ] = n⁻²[∫φ²K_n(λ,λ) − ∬φ(λ)φ(μ)K_n²]`.
    pub fn variance_linear_stat(&self, phi: impl Fn(f64) -> f64) -> f64 {
        let m = self.moment_matrix(&phi);
        let diag = self.moment_matrix(&|x| phi(x) * phi(x)).trace();
        let n = self.n as f64;
        (diag - m.norm_squared()) / (n * n)
    }

    /// `∫ (μ−λ)^j K_n²(λ, μ) dμ`-type integrals for the identities.
    fn weighted_square(&self, lambda: f64, g: impl Fn(f64) -> f64) -> f64 {
        let a = self.psi.eval(lambda, self.n - 1);
        let mut acc = 0.0;
        for ((x, w), p) in self.tab.nodes.iter().zip(&self.tab.weights).zip(&self.tab.psi) {
            let k: f64 = a.iter().zip(p).map(|(u, v)| u * v).sum();
            acc += w * g(*x) * k * k;
        }
        acc
    }

    /// Residuals of the second-moment, first-moment and density-derivative
    /// identities.
    pub fn cd_identities(&self) -> IdentityReport {
        let x1 = self.moment_matrix(&|x| x);
        let x2 = self.moment_matrix(&|x| x * x);
        let lhs = 2.0 * x2.trace() - 2.0 * x1.norm_squared();
        let rhs = 2.0 * self.j_last * self.j_last;

        let (lo, hi) = self.bulk();
        let (c, half) = (0.5 * (lo + hi), 0.4 * (hi - lo));
        let points: Vec<f64> = (0..16).map(|i| c - half + 2.0 * half * i as f64 / 15.0).collect();
        let n = self.n;
        let mut first: f64 = 0.0;
        let mut deriv: f64 = 0.0;
        let p = self.potential();
        for &l in &points {
            let left = self.weighted_square(l, |m| l - m);
            let psi = self.psi.eval(l, n);
            first = first.max((left - self.j_last * psi[n - 1] * psi[n]).abs());

            let h = 1e-4;
            let fd = (-self.density(l + 2.0 * h) + 8.0 * self.density(l + h) - 8.0 * self.density(l - h)
                + self.density(l - 2.0 * h))
                / (12.0 * h);
            let vl = p.d1(l);
            let right = self.weighted_square(l, |m| p.d1(m) - vl);
            deriv = deriv.max((fd - right).abs());
        }
        IdentityReport {
            n,
            second_moment: (lhs, rhs),
            second_moment_residual: (lhs - rhs).abs(),
            first_moment_residual: first,
            derivative_residual: deriv,
            points,
        }
    }

    /// `(λ, ρ_n(λ))` on `points` uniform points of `[lo, hi]`.
    pub fn write_density_csv<W: std::io::Write>(&self, lo: f64, hi: f64, points: usize, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["lambda", "rho_n"])?;
        let last = points.max(2) - 1;
        for i in 0..=last {
            let x = lo + (hi - lo) * i as f64 / last as f64;
            w.write_record([crate::io_fmt(x), crate::io_fmt(self.density(x))])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `(x, y, 𝒦_n(x, y))` on the lattice `[-half, half]²` with `steps` cells per axis.
    pub fn write_rescaled_csv<W: std::io::Write>(
        &self,
        lambda0: f64,
        half: f64,
        steps: usize,
        out: W,
    ) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["x", "y", "K"])?;
        let steps = steps.max(1);
        for i in 0..=steps {
            let x = -half + 2.0 * half * i as f64 / steps as f64;
            for j in 0..=steps {
                let y = -half + 2.0 * half * j as f64 / steps as f64;
                w.write_record([crate::io_fmt(x), crate::io_fmt(y), crate::io_fmt(self.rescaled(lambda0, x, y))])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
