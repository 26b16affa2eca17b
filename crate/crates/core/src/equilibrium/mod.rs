//! Equilibrium measure of a one-cut potential.
//!
//! The density is represented as `ρ(λ) = √((λ−a)(b−λ))·h(λ)` with `h` a
//! Chebyshev series of the second kind in the reduced variable
//! `s = (λ − c)/r`, `c = (a+b)/2`, `r = (b−a)/2`. Log potentials, Hilbert
//! transforms and distribution functions of each basis element are known in
//! closed form (see [`chebyshev`]), so everything downstream of the solve is
//! evaluated without singular quadrature.
//!
//! The endpoints solve
//!
//! ```text
//! ∫ V'(t) / √((t−a)(b−t)) dt = 0,    ∫ t V'(t) / √((t−a)(b−t)) dt = 2π
//! ```
//!
//! and `h(λ) = (2π²)⁻¹ ∫ (V'(λ)−V'(t))/(λ−t) · dt/√((t−a)(b−t))`.

pub mod chebyshev;
mod energy;

pub use energy::{energy, log_energy_bilinear, log_energy_fourier, Block, MeasureRef, SignedMeasure};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::potential::PotentialSpec;
use crate::quadrature::ChebGrid;

use chebyshev::{
    cauchy_moments, cumulative_moments, gauss_t_rule, gauss_u_rule, hilbert_moments, log_moments, u_series,
};

pub const DEFAULT_GRID_ORDER: usize = 64;
/// Gauss–Chebyshev points used for the endpoint equations and for `h`.
const ENDPOINT_QUAD: usize = 512;
const OFF_SUPPORT_SAMPLES: usize = 64;
const VARIATIONAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct EquilibriumMeasure {
    support: (f64, f64),
    u_star: f64,
    coeffs: Vec<f64>,
    grid: ChebGrid,
    density: Vec<f64>,
}

impl EquilibriumMeasure {
    fn from_parts(support: (f64, f64), u_star: f64, coeffs: Vec<f64>, grid_order: usize) -> Result<Self> {
        let grid = ChebGrid::new(grid_order, support.0, support.1)?;
        let mut m = EquilibriumMeasure { support, u_star, coeffs, grid, density: Vec::new() };
        m.density = m.grid.nodes.iter().map(|&x| m.rho(x)).collect();
        Ok(m)
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn u_star(&self) -> f64 {
        self.u_star
    }

    /// Second-kind Chebyshev coefficients of `h` in the reduced variable.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn grid(&self) -> &ChebGrid {
        &self.grid
    }

    /// `ρ` sampled at the Chebyshev–Lobatto nodes of [`Self::grid`].
    pub fn density_samples(&self) -> &[f64] {
        &self.density
    }

    fn center(&self) -> f64 {
        0.5 * (self.support.0 + self.support.1)
    }

    fn radius(&self) -> f64 {
        0.5 * (self.support.1 - self.support.0)
    }

    fn reduce(&self, lambda: f64) -> f64 {
        (lambda - self.center()) / self.radius()
    }

    /// The smooth factor `h` at `λ` (meaningful on the support).
    pub fn h(&self, lambda: f64) -> f64 {
        u_series(&self.coeffs, self.reduce(lambda))
    }

    pub fn rho(&self, lambda: f64) -> f64 {
        let x = self.reduce(lambda);
        if x.abs() >= 1.0 {
            return 0.0;
        }
        self.radius() * (1.0 - x * x).sqrt() * u_series(&self.coeffs, x)
    }

    pub fn mass(&self) -> f64 {
        let r = self.radius();
        r * r * self.coeffs[0] * PI / 2.0
    }

    /// `N((-∞, λ])`.
    pub fn cdf(&self, lambda: f64) -> f64 {
        let x = self.reduce(lambda);
        if x <= -1.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return self.mass();
        }
        let r = self.radius();
        let c = cumulative_moments(self.coeffs.len(), x);
        r * r * self.coeffs.iter().zip(&c).map(|(b, g)| b * g).sum::<f64>()
    }

    /// `∫ log|λ − μ| N(dμ)`.
    pub fn log_potential(&self, lambda: f64) -> f64 {
        let r = self.radius();
        let g = log_moments(self.coeffs.len(), self.reduce(lambda));
        let sum: f64 = self.coeffs.iter().zip(&g).map(|(b, g)| b * g).sum();
        r * r * (r.ln() * self.coeffs[0] * PI / 2.0 + sum)
    }

    /// `p.v. ∫ ρ(μ)/(λ − μ) dμ`.
    pub fn hilbert(&self, lambda: f64) -> f64 {
        let hm = hilbert_moments(self.coeffs.len(), self.reduce(lambda));
        self.radius() * self.coeffs.iter().zip(&hm).map(|(b, h)| b * h).sum::<f64>()
    }

    /// Stieltjes transform `f(z) = ∫ N(dμ)/(μ − z)`, `Im z ≠ 0`.
    pub fn stieltjes(&self, z: Complex64) -> Complex64 {
        let zeta = (z - self.center()) / self.radius();
        let cm = cauchy_moments(self.coeffs.len(), zeta);
        let s: Complex64 = self.coeffs.iter().zip(&cm).map(|(b, c)| c * *b).sum();
        -s * self.radius()
    }

    /// `∫ f dN` with a `points`-point Gauss rule for the weight `√(1−s²)`.
    pub fn integrate(&self, points: usize, f: impl Fn(f64) -> f64) -> f64 {
        let (nodes, weights) = gauss_u_rule(points);
        let (c, r) = (self.center(), self.radius());
        let acc: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(s, w)| w * u_series(&self.coeffs, *s) * f(c + r * s))
            .sum();
        r * r * acc
    }

    /// `u(λ; N) = V(λ) + 2∫ log(1/|λ−μ|) N(dμ)`.
    pub fn effective_potential(&self, p: &PotentialSpec, lambda: f64) -> f64 {
        p.value(lambda) - 2.0 * self.log_potential(lambda)
    }

    /// `Q(λ) = ∫ (V'(λ) − V'(μ))/(λ − μ) ρ(μ) dμ`.
    pub fn q_function(&self, p: &PotentialSpec, lambda: f64) -> f64 {
        let scale = self.radius();
        self.integrate(2 * self.coeffs.len() + 256, |mu| difference_quotient(p, lambda, mu, scale))
    }

    /// Sup over interior grid nodes of `|V'(λ) − 2 p.v.∫ρ(μ)/(λ−μ)dμ|`.
    pub fn singular_equation_residual(&self, p: &PotentialSpec) -> f64 {
        let n = self.grid.nodes.len();
        self.grid.nodes[1..n - 1]
            .iter()
            .map(|&x| (p.d1(x) - 2.0 * self.hilbert(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Sup over `[a+d, b−d]` of `|(2πρ)² + V'² − 4Q|`.
    pub fn square_root_residual(&self, p: &PotentialSpec, d: f64) -> f64 {
        let (a, b) = self.support;
        (0..=64)
            .map(|i| a + d + (b - a - 2.0 * d) * i as f64 / 64.0)
            .map(|x| {
                let r = 2.0 * PI * self.rho(x);
                (r * r + p.d1(x).powi(2) - 4.0 * self.q_function(p, x)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Off-support sample points: 64 points on `[a−2, a) ∪ (b, b+2]`.
    pub fn off_support_points(&self) -> Vec<f64> {
        let (a, b) = self.support;
        let half = OFF_SUPPORT_SAMPLES / 2;
        let mut pts: Vec<f64> = (0..half).map(|i| a - 2.0 + 2.0 * i as f64 / half as f64).collect();
        pts.extend((1..=half).map(|i| b + 2.0 * i as f64 / half as f64));
        pts
    }

    /// Max deviation of `u − u_*` on the support nodes and min of `u − u_*` off it.
    pub fn variational_gaps(&self, p: &PotentialSpec) -> (f64, f64) {
        let on = self
            .grid
            .nodes
            .iter()
            .map(|&x| (self.effective_potential(p, x) - self.u_star).abs())
            .fold(0.0, f64::max);
        let off = self
            .off_support_points()
            .iter()
            .map(|&x| self.effective_potential(p, x) - self.u_star)
            .fold(f64::INFINITY, f64::min);
        (on, off)
    }
}

fn difference_quotient(p: &PotentialSpec, x: f64, t: f64, scale: f64) -> f64 {
    let d = x - t;
    if d.abs() < 1e-6 * scale {
        p.d2(0.5 * (x + t))
    } else {
        (p.d1(x) - p.d1(t)) / d
    }
}

/// Gauss–Chebyshev evaluation of the two endpoint functionals and their
/// Jacobian in `(c, r)`.
fn endpoint_system(p: &PotentialSpec, nodes: &[f64], c: f64, r: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let m = nodes.len() as f64;
    let (mut f1, mut f2) = (0.0, 0.0);
    let mut jac = [[0.0; 2]; 2];
    for &x in nodes {
        let t = c + r * x;
        let v1 = p.d1(t);
        let v2 = p.d2(t);
        f1 += v1;
        f2 += t * v1;
        jac[0][0] += v2;
        jac[0][1] += x * v2;
        jac[1][0] += v1 + t * v2;
        jac[1][1] += x * v1 + t * x * v2;
    }
    for row in jac.iter_mut() {
        for v in row.iter_mut() {
            *v /= m;
        }
    }
    ([f1 / m, f2 / m - 2.0], jac)
}

fn initial_guess(p: &PotentialSpec, nodes: &[f64]) -> Option<(f64, f64)> {
    let (lo, hi) = p.clip_interval();
    // centre: minimiser of V on a coarse grid
    let c = (0..=400)
        .map(|i| lo + (hi - lo) * i as f64 / 400.0)
        .min_by(|x, y| p.value(*x).total_cmp(&p.value(*y)))?;
    // radius: first sign change of the normalisation equation along a log grid
    let f2 = |r: f64| endpoint_system(p, nodes, c, r).0[1];
    let mut prev = (1e-3, f2(1e-3));
    for i in 1..=200 {
        let r = 1e-3 * (1.06f64).powi(i);
        let v = f2(r);
        if prev.1 < 0.0 && v >= 0.0 {
            return Some((c, 0.5 * (prev.0 + r)));
        }
        prev = (r, v);
    }
    None
}

/// Solves the one-cut equilibrium problem for `p`.
///
/// `grid_order` is the number of Chebyshev coefficients kept for `h` (and the
/// order of the Lobatto grid on which `ρ` is sampled).
pub fn solve(p: &PotentialSpec, grid_order: usize) -> Result<EquilibriumMeasure> {
    if grid_order < 2 {
        return invalid("grid order must be at least 2");
    }
    let (nodes, _) = gauss_t_rule(ENDPOINT_QUAD);
    let (mut c, mut r) = initial_guess(p, &nodes)
        .ok_or_else(|| Error::MultiCutUnsupported("could not bracket the support endpoints".into()))?;

    let norm = |f: [f64; 2]| f[0].hypot(f[1]);
    let (mut f, mut jac) = endpoint_system(p, &nodes, c, r);
    let mut converged = false;
    for _ in 0..200 {
        if norm(f) < 1e-14 {
            converged = true;
            break;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !det.is_finite() || det.abs() < 1e-300 {
            break;
        }
        let dc = (jac[1][1] * f[0] - jac[0][1] * f[1]) / det;
        let dr = (jac[0][0] * f[1] - jac[1][0] * f[0]) / det;
        let mut step = 1.0;
        let base = norm(f);
        let mut accepted = false;
        while step > 1e-10 {
            let (nc, nr) = (c - step * dc, r - step * dr);
            if nr > 0.0 {
                let (nf, nj) = endpoint_system(p, &nodes, nc, nr);
                if norm(nf) < base || norm(nf) < 1e-14 {
                    c = nc;
                    r = nr;
                    f = nf;
                    jac = nj;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            converged = norm(f) < 1e-11;
            break;
        }
    }
    if !converged {
        return Err(Error::MultiCutUnsupported(format!(
            "endpoint equations did not converge (residual {:.3e})",
            norm(f)
        )));
    }

    // h on the √(1−s²)-Gauss nodes, projected onto U_0..U_{m-1}
    let (tn, tw) = gauss_t_rule(ENDPOINT_QUAD);
    let h_at = |lambda: f64| -> f64 {
        let s: f64 = tn.iter().map(|&x| difference_quotient(p, lambda, c + r * x, r)).sum();
        s * tw / (2.0 * PI * PI)
    };
    let q = 2 * grid_order + 8;
    let (un, uw) = gauss_u_rule(q);
    let hv: Vec<f64> = un.iter().map(|&s| h_at(c + r * s)).collect();
    let coeffs: Vec<f64> = (0..grid_order)
        .map(|k| {
            let acc: f64 = un
                .iter()
                .zip(&uw)
                .zip(&hv)
                .map(|((s, w), h)| w * h * chebyshev::u_values(k + 1, *s)[k])
                .sum();
            2.0 / PI * acc
        })
        .collect();

    let support = (c - r, c + r);
    let mut measure = EquilibriumMeasure::from_parts(support, 0.0, coeffs, grid_order)?;

    let min_h = (0..=8 * grid_order)
        .map(|i| -1.0 + 2.0 * i as f64 / (8 * grid_order) as f64)
        .map(|s| u_series(&measure.coeffs, s))
        .fold(f64::INFINITY, f64::min);
    if min_h < -1e-10 {
        return Err(Error::MultiCutUnsupported(format!("negative density after solve (min h = {min_h:.3e})")));
    }

    let interior = &measure.grid.nodes[1..grid_order];
    measure.u_star =
        interior.iter().map(|&x| measure.effective_potential(p, x)).sum::<f64>() / interior.len() as f64;

    let (_, off) = measure.variational_gaps(p);
    if off < -VARIATIONAL_TOL {
        return Err(Error::MultiCutUnsupported(format!(
            "effective potential drops below u_* off the support by {:.3e}",
            -off
        )));
    }
    Ok(measure)
}

#[derive(Serialize, Deserialize)]
struct EquilibriumJson {
    a: f64,
    b: f64,
    u_star: f64,
    basis: String,
    cheb_coeffs: Vec<f64>,
}

impl Serialize for EquilibriumMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EquilibriumJson {
            a: self.support.0,
            b: self.support.1,
            u_star: self.u_star,
            basis: "chebyshev-u".into(),
            cheb_coeffs: self.coeffs.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for EquilibriumMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = EquilibriumJson::deserialize(d)?;
        let order = j.cheb_coeffs.len().max(2);
        EquilibriumMeasure::from_parts((j.a, j.b), j.u_star, j.cheb_coeffs, order).map_err(serde::de::Error::custom)
    }
}

/// Writes `(λ, ρ(λ))` on `points` uniformly spaced points of the support.
pub fn write_density_csv<W: std::io::Write>(m: &EquilibriumMeasure, points: usize, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["lambda", "rho"])?;
    let (a, b) = m.support;
    let last = points.max(2) - 1;
    for i in 0..=last {
        let x = a + (b - a) * i as f64 / last as f64;
        w.write_record([crate::io_fmt(x), crate::io_fmt(m.rho(x))])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn semicircle(x: f64) -> f64 {
        (4.0 - x * x).max(0.0).sqrt() / (2.0 * PI)
    }

    #[test]
    fn gaussian_is_semicircle() {
        let m = solve(&PotentialSpec::gaussian(), DEFAULT_GRID_ORDER).unwrap();
        let (a, b) = m.support();
        assert!((a + 2.0).abs() < 1e-10 && (b - 2.0).abs() < 1e-10, "{a} {b}");
        assert!((m.rho(0.0) - 1.0 / PI).abs() < 1e-12);
        assert!((m.u_star() - 1.0).abs() < 1e-10);
        assert!((m.mass() - 1.0).abs() < 1e-12);
        for i in 0..41 {
            let x = -2.0 + 0.1 * i as f64;
            assert!((m.rho(x) - semicircle(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn effective_potential_examples() {
        let p = PotentialSpec::gaussian();
        let m = solve(&p, 32).unwrap();
        assert!((m.effective_potential(&p, 0.0) - 1.0).abs() < 1e-10);
        assert!((m.effective_potential(&p, 2.0) - 1.0).abs() < 1e-6);
        // closed form off the support: u(x) − 1 = x√(x²−4)/2 − 2 log((x + √(x²−4))/2)
        let x: f64 = 3.0;
        let s = (x * x - 4.0).sqrt();
        let expect = 1.0 + x * s / 2.0 - 2.0 * ((x + s) / 2.0).ln();
        let u3 = m.effective_potential(&p, 3.0);
        assert!((u3 - expect).abs() < 1e-10, "{u3} vs {expect}");
        assert!(u3 - m.u_star() > 0.0);
    }

    #[test]
    fn quartic_support_matches_endpoint_equation() {
        // for V = λ⁴/4 the normalisation gives 3r⁴/16 = 1
        let p = PotentialSpec::quartic(1.0, 0.0);
        let m = solve(&p, DEFAULT_GRID_ORDER).unwrap();
        let r = (16.0f64 / 3.0).powf(0.25);
        assert!((m.support().1 - r).abs() < 1e-10);
        assert!((m.support().0 + r).abs() < 1e-10);
        assert!((m.mass() - 1.0).abs() < 1e-10);
        // h(λ) = (λ² + r²/2)/(2π) for this potential
        for &x in &[-1.0, 0.0, 0.4, 1.2] {
            assert!((m.h(x) - (x * x + r * r / 2.0) / (2.0 * PI)).abs() < 1e-12);
        }
    }

    #[test]
    fn density_grid_and_json() {
        let m = solve(&PotentialSpec::quartic(1.0, 0.5), 24).unwrap();
        let g = m.grid();
        assert_eq!(g.nodes.len(), 25);
        assert!(m.density_samples()[0].abs() < 1e-12);
        assert!(m.density_samples()[24].abs() < 1e-12);
        let text = serde_json::to_string(&m).unwrap();
        let back: EquilibriumMeasure = serde_json::from_str(&text).unwrap();
        assert_eq!(back.support(), m.support());
        assert!((back.rho(0.3) - m.rho(0.3)).abs() < 1e-15);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v.get("cheb_coeffs").is_some() && v.get("u_star").is_some());
    }

    #[test]
    fn double_well_is_rejected() {
        // deep double well: two-cut equilibrium
        let p = PotentialSpec::quartic(1.0, -4.0);
        match solve(&p, DEFAULT_GRID_ORDER) {
            Err(Error::MultiCutUnsupported(_)) => {}
            other => panic!("expected multi-cut error, got {other:?}"),
        }
    }

    #[test]
    fn cdf_is_monotone_and_normalised() {
        let m = solve(&PotentialSpec::quartic(1.0, 0.0), 32).unwrap();
        let (a, b) = m.support();
        let mut prev = 0.0;
        for i in 0..=100 {
            let x = a + (b - a) * i as f64 / 100.0;
            let c = m.cdf(x);
            assert!(c >= prev - 1e-14);
            prev = c;
        }
        assert!((m.cdf(b + 1.0) - 1.0).abs() < 1e-10);
        assert!((m.cdf(0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stieltjes_quadratic_equation() {
        let p = PotentialSpec::quartic(1.0, -0.5);
        let m = solve(&p, DEFAULT_GRID_ORDER).unwrap();
        for i in 0..20 {
            let z = Complex64::new(-2.5 + 0.25 * i as f64, 0.2 + 0.05 * (i % 7) as f64);
            let f = m.stieltjes(z);
            // direct quadrature of ∫ N(dλ)/(λ − z) and ∫ V'(λ) N(dλ)/(λ − z)
            let re = |g: &dyn Fn(f64) -> f64| m.integrate(4000, |x| g(x) * ((1.0 / (x - z)).re));
            let im = |g: &dyn Fn(f64) -> f64| m.integrate(4000, |x| g(x) * ((1.0 / (x - z)).im));
            let one = |_: f64| 1.0;
            let vp = |x: f64| p.d1(x);
            let direct = Complex64::new(re(&one), im(&one));
            let rhs = Complex64::new(re(&vp), im(&vp));
            assert!((f - direct).norm() < 1e-8, "z={z}");
            // f² = ∫ V'(λ) N(dλ)/(z − λ)
            assert!((f * f + rhs).norm() < 1e-6, "z={z}: {} vs {}", f * f, -rhs);
        }
    }

    #[test]
    fn singular_equation_and_square_root_form() {
        for p in [PotentialSpec::gaussian(), PotentialSpec::quartic(1.0, 0.0), PotentialSpec::quartic(0.5, 1.0)] {
            let m = solve(&p, DEFAULT_GRID_ORDER).unwrap();
            assert!(m.singular_equation_residual(&p) < 1e-6);
            let d = 0.05 * (m.support().1 - m.support().0);
            assert!(m.square_root_residual(&p, d) < 1e-6);
            let (on, off) = m.variational_gaps(&p);
            assert!(on < 1e-6 && off > -1e-6);
        }
    }

    #[test]
    fn density_squared_modulus() {
        let m = solve(&PotentialSpec::quartic(1.0, 0.0), DEFAULT_GRID_ORDER).unwrap();
        let (a, b) = m.support();
        let mut c_fit: f64 = 0.0;
        for i in 0..200 {
            let x = a + (b - a) * i as f64 / 199.0;
            for &h in &[1e-1, 1e-2, 1e-3, 1e-4] {
                let y = (x + h).min(b);
                let dx = y - x;
                if dx <= 0.0 {
                    continue;
                }
                let lhs = (m.rho(x).powi(2) - m.rho(y).powi(2)).abs();
                c_fit = c_fit.max(lhs / (dx * (1.0 / dx).ln().max(1.0)));
            }
        }
        assert!(c_fit.is_finite() && c_fit < 10.0, "C = {c_fit}");
    }

    #[test]
    fn density_csv_has_header() {
        let m = solve(&PotentialSpec::gaussian(), 16).unwrap();
        let mut buf = Vec::new();
        write_density_csv(&m, 5, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "lambda,rho");
        assert_eq!(lines.len(), 6);
    }
}
