//! Gauss–Legendre rules, composite panels, principal-value integrals and
//! Chebyshev–Lobatto interpolation grids.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

pub const DEFAULT_PANEL_ORDER: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub interval: (f64, f64),
}

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[-1, 1]`,
/// ascending. Newton iteration on the three-term recurrence.
fn legendre_reference(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let half = m.div_ceil(2);
    for i in 0..half {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[m - 1 - i] = x;
        weights[m - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `m`-point Gauss–Legendre rule on `[lo, hi]`; exact for degree ≤ 2m − 1.
pub fn gauss_legendre(m: usize, lo: f64, hi: f64) -> Result<QuadratureRule> {
    if m == 0 {
        return invalid("Gauss-Legendre order must be at least 1");
    }
    if !(lo < hi) {
        return invalid(format!("empty or reversed interval [{lo}, {hi}]"));
    }
    let (x, w) = legendre_reference(m);
    let c = 0.5 * (lo + hi);
    let r = 0.5 * (hi - lo);
    Ok(QuadratureRule {
        nodes: x.iter().map(|t| c + r * t).collect(),
        weights: w.iter().map(|v| r * v).collect(),
        interval: (lo, hi),
    })
}

/// Composite rule: `panels` equal panels of `order` points each.
pub fn composite(panels: usize, order: usize, lo: f64, hi: f64) -> Result<QuadratureRule> {
    let breaks: Vec<f64> = (0..=panels).map(|i| lo + (hi - lo) * i as f64 / panels.max(1) as f64).collect();
    composite_on(&breaks, order)
}

/// Composite rule over the panels delimited by `breaks` (strictly increasing).
pub fn composite_on(breaks: &[f64], order: usize) -> Result<QuadratureRule> {
    if breaks.len() < 2 {
        return invalid("composite rule needs at least one panel");
    }
    if order == 0 {
        return invalid("Gauss-Legendre order must be at least 1");
    }
    let (x, w) = legendre_reference(order);
    let mut nodes = Vec::with_capacity(order * (breaks.len() - 1));
    let mut weights = Vec::with_capacity(nodes.capacity());
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if !(a < b) {
            return invalid("composite breaks must be strictly increasing");
        }
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        nodes.extend(x.iter().map(|t| c + r * t));
        weights.extend(w.iter().map(|v| r * v));
    }
    Ok(QuadratureRule { nodes, weights, interval: (breaks[0], breaks[breaks.len() - 1]) })
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// `p.v. ∫ f(μ)/(λ − μ) dμ` over `rule.interval`, by subtracting the
/// singularity: the remainder `(f(μ) − f(λ))/(λ − μ)` is smooth and the
/// subtracted part integrates to `f(λ) log((λ − lo)/(hi − λ))`.
pub fn principal_value(f: impl Fn(f64) -> f64, singularity: f64, rule: &QuadratureRule) -> Result<f64> {
    let (lo, hi) = rule.interval;
    if !(singularity > lo && singularity < hi) {
        return invalid(format!("singularity {singularity} not strictly inside ({lo}, {hi})"));
    }
    let f0 = f(singularity);
    let scale = hi - lo;
    let mut acc = 0.0;
    for (x, w) in rule.iter() {
        let d = singularity - x;
        let q = if d.abs() < 1e-10 * scale {
            let h = 1e-5 * scale;
            -(f(singularity + h) - f(singularity - h)) / (2.0 * h)
        } else {
            (f(x) - f0) / d
        };
        acc += w * q;
    }
    Ok(acc + f0 * ((singularity - lo) / (hi - singularity)).ln())
}

/// Chebyshev–Lobatto grid `x_j = cos(jπ/m)` mapped to `[a, b]`, with
/// barycentric weights for interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebGrid {
    pub order: usize,
    pub interval: (f64, f64),
    pub nodes: Vec<f64>,
    pub bary_weights: Vec<f64>,
}

impl ChebGrid {
    pub fn new(order: usize, a: f64, b: f64) -> Result<Self> {
        if order == 0 {
            return invalid("Chebyshev grid order must be at least 1");
        }
        if !(a < b) {
            return invalid(format!("empty or reversed interval [{a}, {b}]"));
        }
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        // ascending order: x_j = -cos(jπ/m)
        let mut nodes: Vec<f64> = (0..=order).map(|j| c - r * (PI * j as f64 / order as f64).cos()).collect();
        nodes[0] = a;
        nodes[order] = b;
        let bary_weights = (0..=order)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == order {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        Ok(ChebGrid { order, interval: (a, b), nodes, bary_weights })
    }

    /// Barycentric interpolation of `values` (sampled at `self.nodes`) at `x`.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((xj, wj), fj) in self.nodes.iter().zip(&self.bary_weights).zip(values) {
            let d = x - xj;
            if d == 0.0 {
                return *fj;
            }
            let t = wj / d;
            num += t * fj;
            den += t;
        }
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_rules() {
        let r = gauss_legendre(2, -1.0, 1.0).unwrap();
        assert!((r.integrate(|x| x * x) - 2.0 / 3.0).abs() < 1e-14);
        let r = gauss_legendre(1, 0.0, 2.0).unwrap();
        assert_eq!(r.nodes, vec![1.0]);
        assert_eq!(r.weights, vec![2.0]);
        assert!(gauss_legendre(0, 0.0, 1.0).is_err());
        assert!(gauss_legendre(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn semicircle_area() {
        let r = gauss_legendre(64, -2.0, 2.0).unwrap();
        let area = r.integrate(|x| (4.0 - x * x).max(0.0).sqrt());
        assert!((area - 2.0 * PI).abs() < 2e-5, "{area}");
        // the sqrt edges limit GL to algebraic convergence; a cosine map is exact
        let t = gauss_legendre(64, 0.0, PI).unwrap();
        let mapped = t.integrate(|th| 4.0 * th.sin().powi(2));
        assert!((mapped - 2.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn rule_invariants() {
        for m in [1, 2, 5, 17, 64, 128, 300] {
            let r = gauss_legendre(m, -0.5, 3.0).unwrap();
            let s: f64 = r.weights.iter().sum();
            assert!((s - 3.5).abs() <= 1e-12 * 3.5, "m={m} sum={s}");
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            assert!(r.nodes.iter().all(|&x| x > -0.5 && x < 3.0));
            assert!(r.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn principal_value_examples() {
        let r = gauss_legendre(64, -1.0, 1.0).unwrap();
        assert!(principal_value(|_| 1.0, 0.0, &r).unwrap().abs() < 1e-14);
        assert!((principal_value(|x| x, 0.0, &r).unwrap() + 2.0).abs() < 1e-13);
        assert!(principal_value(|x| x, 1.0, &r).is_err());

        let rho = |x: f64| (4.0 - x * x).max(0.0).sqrt() / (2.0 * PI);
        let r = composite(16, 64, -2.0, 2.0).unwrap();
        let pv = principal_value(rho, 1.0, &r).unwrap();
        assert!((pv - 0.5).abs() < 1e-5, "{pv}");
    }

    #[test]
    fn principal_value_refinement_is_stable() {
        let f = |x: f64| (x * 1.3).cos() + x * x;
        let a = principal_value(f, 0.37, &gauss_legendre(32, -1.0, 2.0).unwrap()).unwrap();
        let b = principal_value(f, 0.37, &gauss_legendre(64, -1.0, 2.0).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn cheb_interpolation_is_exact_for_polynomials() {
        let g = ChebGrid::new(12, -1.5, 2.5).unwrap();
        assert_eq!(g.nodes[0], -1.5);
        assert_eq!(g.nodes[12], 2.5);
        let p = |x: f64| 1.0 - 2.0 * x + 0.3 * x.powi(5) - 0.01 * x.powi(12);
        let vals: Vec<f64> = g.nodes.iter().map(|&x| p(x)).collect();
        for i in 0..50 {
            let x = -1.5 + 4.0 * i as f64 / 49.0 + 1e-3;
            let scale = p(x).abs().max(1.0);
            assert!((g.interpolate(&vals, x) - p(x)).abs() <= 1e-12 * scale * 10.0);
        }
    }

    proptest! {
        #[test]
        fn pv_antisymmetric_under_reflection(c in -0.5f64..0.5, k in 0.1f64..2.0) {
            // interval symmetric about the singularity s = 0
            let r = gauss_legendre(48, -1.0, 1.0).unwrap();
            let f = move |x: f64| (k * x + c).exp();
            let g = move |x: f64| f(-x);
            let a = principal_value(f, 0.0, &r).unwrap();
            let b = principal_value(g, 0.0, &r).unwrap();
            prop_assert!((a + b).abs() < 1e-10);
        }

        #[test]
        fn polynomial_exactness(m in 1usize..40, c in proptest::collection::vec(-1.0f64..1.0, 1..80)) {
            let deg = (2 * m - 1).min(c.len() - 1);
            let r = gauss_legendre(m, -1.0, 1.0).unwrap();
            let exact: f64 = (0..=deg).filter(|k| k % 2 == 0).map(|k| 2.0 * c[k] / (k as f64 + 1.0)).sum();
            let num = r.integrate(|x| (0..=deg).rev().fold(0.0, |acc, k| acc * x + c[k]));
            prop_assert!((num - exact).abs() <= 1e-12 * (1.0 + exact.abs()) * 10.0);
        }
    }
}
