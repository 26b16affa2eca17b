//! Logarithmic energy of signed measures.
//!
//! Signed measures are finite sums of uniform blocks, so pairwise log
//! interactions reduce to a closed form. Point charges are modelled as blocks
//! of small width so that self-energies stay finite.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::EquilibriumMeasure;
use crate::error::{invalid, Result};
use crate::potential::PotentialSpec;
use crate::quadrature::gauss_legendre;

/// Uniform charge `charge` spread over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub lo: f64,
    pub hi: f64,
    pub charge: f64,
}

impl Block {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// `∫ log|λ − μ| dμ` over the block, per unit length.
    fn log_integral(&self, lambda: f64) -> f64 {
        let f = |y: f64| if y == 0.0 { 0.0 } else { y * y.abs().ln() - y };
        f(lambda - self.lo) - f(lambda - self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignedMeasure {
    blocks: Vec<Block>,
    total_charge: f64,
}

impl SignedMeasure {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        for b in &blocks {
            if !(b.lo.is_finite() && b.hi.is_finite() && b.charge.is_finite()) {
                return invalid("signed measure blocks must be finite");
            }
            if !(b.lo < b.hi) {
                return invalid(format!("empty block [{}, {}]", b.lo, b.hi));
            }
        }
        let total_charge = blocks.iter().map(|b| b.charge).sum();
        Ok(SignedMeasure { blocks, total_charge })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn uniform(lo: f64, hi: f64, charge: f64) -> Result<Self> {
        Self::new(vec![Block { lo, hi, charge }])
    }

    /// Point charges `(position, weight)` smeared uniformly over `width`.
    pub fn atoms(atoms: &[(f64, f64)], width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return invalid("atom width must be positive");
        }
        Self::new(
            atoms
                .iter()
                .map(|&(x, q)| Block { lo: x - 0.5 * width, hi: x + 0.5 * width, charge: q })
                .collect(),
        )
    }

    /// Piecewise-constant density: `density[i]` on `[breaks[i], breaks[i+1]]`.
    pub fn from_density(breaks: &[f64], density: &[f64]) -> Result<Self> {
        if breaks.len() != density.len() + 1 {
            return invalid("need one more break than density values");
        }
        Self::new(
            breaks
                .windows(2)
                .zip(density)
                .map(|(e, d)| Block { lo: e[0], hi: e[1], charge: d * (e[1] - e[0]) })
                .collect(),
        )
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn total_charge(&self) -> f64 {
        self.total_charge
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().all(|b| b.charge == 0.0)
    }

    pub fn scaled(&self, t: f64) -> Self {
        let blocks: Vec<Block> = self.blocks.iter().map(|b| Block { charge: t * b.charge, ..*b }).collect();
        SignedMeasure { total_charge: blocks.iter().map(|b| b.charge).sum(), blocks }
    }

    /// Density at `x` (sum over blocks containing `x`).
    pub fn density(&self, x: f64) -> f64 {
        self.blocks
            .iter()
            .filter(|b| b.lo <= x && x < b.hi)
            .map(|b| b.charge / b.width())
            .sum()
    }

    /// `∫ f dm`, 16-point Gauss–Legendre on every block.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let rule = gauss_legendre(16, b.lo, b.hi).expect("valid block");
                b.charge / b.width() * rule.integrate(&f)
            })
            .sum()
    }

    /// `∫ log|λ − μ| m(dμ)`.
    pub fn log_potential(&self, lambda: f64) -> f64 {
        self.blocks.iter().map(|b| b.charge / b.width() * b.log_integral(lambda)).sum()
    }

    /// `m̂(p) = ∫ e^{ipλ} m(dλ)`.
    pub fn fourier(&self, p: f64) -> Complex64 {
        self.blocks
            .iter()
            .map(|b| Complex64::from_polar(b.charge * sinc(0.5 * p * b.width()), p * b.center()))
            .sum()
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `Φ` with `Φ'' = log|z|`.
fn phi(z: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else {
        0.5 * z * z * z.abs().ln() - 0.75 * z * z
    }
}

/// `∬ log|x − y| dx dy` over two blocks, per unit density.
fn pair_log_integral(b1: &Block, b2: &Block) -> f64 {
    let gap = (b1.center() - b2.center()).abs() - 0.5 * (b1.width() + b2.width());
    if gap > 2.0 * (b1.width() + b2.width()) {
        // well separated: smooth integrand, tensor Gauss rule avoids cancellation
        let r1 = gauss_legendre(8, b1.lo, b1.hi).expect("valid block");
        let r2 = gauss_legendre(8, b2.lo, b2.hi).expect("valid block");
        return r1.integrate(|x| r2.integrate(|y| (x - y).abs().ln()));
    }
    phi(b1.hi - b2.lo) - phi(b1.lo - b2.lo) - phi(b1.hi - b2.hi) + phi(b1.lo - b2.hi)
}

/// `𝓛[m1, m2] = ∬ log(1/|λ−μ|) m1(dλ) m2(dμ)`.
pub fn log_energy_bilinear(m1: &SignedMeasure, m2: &SignedMeasure) -> f64 {
    let mut acc = 0.0;
    for b1 in &m1.blocks {
        for b2 in &m2.blocks {
            let d = b1.charge * b2.charge / (b1.width() * b2.width());
            if d != 0.0 {
                acc -= d * pair_log_integral(b1, b2);
            }
        }
    }
    acc
}

/// `𝓛[m1, m2]` through `∫₀^∞ Re[m̂1(p) conj m̂2(p)] dp/p`; `m1` must have
/// zero total charge.
pub fn log_energy_fourier(m1: &SignedMeasure, m2: &SignedMeasure) -> Result<f64> {
    let scale: f64 = m1.blocks.iter().map(|b| b.charge.abs()).sum();
    if m1.total_charge.abs() > 1e-12 * scale.max(1.0) {
        return invalid(format!("first measure must have zero charge (has {:e})", m1.total_charge));
    }
    if m1.is_zero() || m2.is_zero() {
        return Ok(0.0);
    }
    let all = m1.blocks.iter().chain(&m2.blocks);
    let w_min = all.clone().map(Block::width).fold(f64::INFINITY, f64::min);
    let w_max = all.clone().map(Block::width).fold(0.0, f64::max);
    let lo = all.clone().map(|b| b.center()).fold(f64::INFINITY, f64::min);
    let hi = all.map(|b| b.center()).fold(f64::NEG_INFINITY, f64::max);
    let freq = (hi - lo).max(w_max).max(1e-300);
    let cutoff = 200.0 / w_min;
    let panel = (PI / freq).min(cutoff);
    let panels = (cutoff / panel).ceil() as usize;
    let base = gauss_legendre(16, 0.0, 1.0).expect("valid rule");
    let h = cutoff / panels as f64;
    let mut acc = 0.0;
    for i in 0..panels {
        let p0 = i as f64 * h;
        for (x, w) in base.iter() {
            let p = p0 + h * x;
            acc += h * w * (m1.fourier(p) * m2.fourier(p).conj()).re / p;
        }
    }
    // tail of coincident pairs, sin² averaged to 1/2
    for b1 in &m1.blocks {
        for b2 in &m2.blocks {
            if b1.lo == b2.lo && b1.hi == b2.hi {
                acc += b1.charge * b2.charge / (b1.width() * b1.width() * cutoff * cutoff);
            }
        }
    }
    Ok(acc)
}

/// A measure whose energy can be evaluated.
#[derive(Debug, Clone, Copy)]
pub enum MeasureRef<'a> {
    Signed(&'a SignedMeasure),
    Equilibrium(&'a EquilibriumMeasure),
    /// `base + t·delta`.
    Perturbed { base: &'a EquilibriumMeasure, t: f64, delta: &'a SignedMeasure },
}

impl<'a> From<&'a SignedMeasure> for MeasureRef<'a> {
    fn from(m: &'a SignedMeasure) -> Self {
        MeasureRef::Signed(m)
    }
}

impl<'a> From<&'a EquilibriumMeasure> for MeasureRef<'a> {
    fn from(m: &'a EquilibriumMeasure) -> Self {
        MeasureRef::Equilibrium(m)
    }
}

const EQ_POINTS: usize = 400;

fn equilibrium_self(p: &PotentialSpec, n: &EquilibriumMeasure) -> (f64, f64) {
    let v = n.integrate(EQ_POINTS, |x| p.value(x));
    let l = -n.integrate(EQ_POINTS, |x| n.log_potential(x));
    (v, l)
}

/// `∫ V dm + 𝓛[m, m]`.
pub fn energy<'a>(p: &PotentialSpec, m: impl Into<MeasureRef<'a>>) -> f64 {
    match m.into() {
        MeasureRef::Signed(m) => m.integrate(|x| p.value(x)) + log_energy_bilinear(m, m),
        MeasureRef::Equilibrium(n) => {
            let (v, l) = equilibrium_self(p, n);
            v + l
        }
        MeasureRef::Perturbed { base, t, delta } => {
            let (v, l) = equilibrium_self(p, base);
            let linear = delta.integrate(|x| p.value(x) - 2.0 * base.log_potential(x));
            v + l + t * linear + t * t * log_energy_bilinear(delta, delta)
        }
    }
}
