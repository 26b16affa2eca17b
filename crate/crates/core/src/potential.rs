//! Confining potentials `V` and their derivatives.
//!
//! Every potential is continued linearly outside a clip interval (by default
//! `[-10, 10]`), so `V'` is bounded and `V''`, `V'''` vanish far away. The
//! continuation is C¹ at the clip points.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{invalid, Error, Result};

pub const DEFAULT_CLIP_RADIUS: f64 = 10.0;
pub const DEFAULT_EPSILON: f64 = 0.5;
pub const AUDIT_POINTS: usize = 4097;
const MIN_TABLE_NODES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// `V = λ²/2`.
    Gaussian,
    /// `V = gλ⁴/4 + tλ²/2`.
    Quartic { g: f64, t: f64 },
    /// `V = Σ c_k λ^k`, ascending powers.
    EvenPolynomial { coefficients: Vec<f64> },
    /// Natural cubic spline through `(nodes[i], values[i])`.
    UserTable { nodes: Vec<f64>, values: Vec<f64>, second: Vec<f64> },
}

impl PotentialKind {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialKind::Gaussian => "gaussian",
            PotentialKind::Quartic { .. } => "quartic",
            PotentialKind::EvenPolynomial { .. } => "even-polynomial",
            PotentialKind::UserTable { .. } => "user-table",
        }
    }
}

/// An immutable confining potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialJson", into = "PotentialJson")]
pub struct PotentialSpec {
    kind: PotentialKind,
    epsilon: f64,
    clip_radius: f64,
    // effective clip interval; differs from [-L, L] only for short tables
    clip_lo: f64,
    clip_hi: f64,
}

impl PotentialSpec {
    pub fn gaussian() -> Self {
        Self::from_kind(PotentialKind::Gaussian, DEFAULT_EPSILON, DEFAULT_CLIP_RADIUS)
    }

    pub fn quartic(g: f64, t: f64) -> Self {
        Self::from_kind(PotentialKind::Quartic { g, t }, DEFAULT_EPSILON, DEFAULT_CLIP_RADIUS)
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        Self::from_kind(
            PotentialKind::EvenPolynomial { coefficients },
            DEFAULT_EPSILON,
            DEFAULT_CLIP_RADIUS,
        )
    }

    /// Cubic-spline potential through the given table. Nodes must be strictly
    /// increasing; tables with fewer than two nodes are rejected here, short
    /// tables are reported by [`validate`].
    pub fn table(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() {
            return invalid("table nodes and values differ in length");
        }
        if nodes.len() < 2 {
            return invalid("table needs at least two nodes");
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("table nodes must be strictly increasing");
        }
        let second = natural_spline_second_derivatives(&nodes, &values);
        Ok(Self::from_kind(
            PotentialKind::UserTable { nodes, values, second },
            DEFAULT_EPSILON,
            DEFAULT_CLIP_RADIUS,
        ))
    }

    fn from_kind(kind: PotentialKind, epsilon: f64, clip_radius: f64) -> Self {
        let mut p = PotentialSpec { kind, epsilon, clip_radius, clip_lo: -clip_radius, clip_hi: clip_radius };
        p.refresh_clip();
        p
    }

    fn refresh_clip(&mut self) {
        let (mut lo, mut hi) = (-self.clip_radius, self.clip_radius);
        if let PotentialKind::UserTable { nodes, .. } = &self.kind {
            lo = lo.max(nodes[0]);
            hi = hi.min(nodes[nodes.len() - 1]);
        }
        self.clip_lo = lo;
        self.clip_hi = hi;
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_clip_radius(mut self, clip_radius: f64) -> Self {
        self.clip_radius = clip_radius;
        self.refresh_clip();
        self
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn clip_radius(&self) -> f64 {
        self.clip_radius
    }

    pub fn clip_interval(&self) -> (f64, f64) {
        (self.clip_lo, self.clip_hi)
    }

    /// True when `V(-λ) = V(λ)` identically.
    pub fn is_even(&self) -> bool {
        match &self.kind {
            PotentialKind::Gaussian | PotentialKind::Quartic { .. } => true,
            PotentialKind::EvenPolynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .all(|(k, c)| k % 2 == 0 || *c == 0.0),
            PotentialKind::UserTable { .. } => false,
        }
    }

    /// `V^{(order)}(λ)` for `order` in `0..=3`.
    pub fn eval(&self, lambda: f64, order: usize) -> Result<f64> {
        match order {
            0 => Ok(self.value(lambda)),
            1 => Ok(self.d1(lambda)),
            2 => Ok(self.d2(lambda)),
            3 => {
                if let PotentialKind::UserTable { .. } = self.kind {
                    return Err(Error::UnsupportedDerivative { order, kind: self.kind.name() });
                }
                Ok(self.d3(lambda))
            }
            _ => invalid(format!("derivative order {order} out of range 0..=3")),
        }
    }

    pub fn value(&self, lambda: f64) -> f64 {
        if lambda > self.clip_hi {
            let h = self.clip_hi;
            self.raw(h, 0) + self.raw(h, 1) * (lambda - h)
        } else if lambda < self.clip_lo {
            let l = self.clip_lo;
            self.raw(l, 0) + self.raw(l, 1) * (lambda - l)
        } else {
            self.raw(lambda, 0)
        }
    }

    pub fn d1(&self, lambda: f64) -> f64 {
        self.raw(lambda.clamp(self.clip_lo, self.clip_hi), 1)
    }

    pub fn d2(&self, lambda: f64) -> f64 {
        if lambda > self.clip_hi || lambda < self.clip_lo {
            0.0
        } else {
            self.raw(lambda, 2)
        }
    }

    /// Third derivative; zero for table potentials.
    pub fn d3(&self, lambda: f64) -> f64 {
        if lambda > self.clip_hi || lambda < self.clip_lo {
            0.0
        } else {
            self.raw(lambda, 3)
        }
    }

    fn raw(&self, x: f64, order: usize) -> f64 {
        match &self.kind {
            PotentialKind::Gaussian => match order {
                0 => 0.5 * x * x,
                1 => x,
                2 => 1.0,
                _ => 0.0,
            },
            PotentialKind::Quartic { g, t } => match order {
                0 => 0.25 * g * x.powi(4) + 0.5 * t * x * x,
                1 => g * x.powi(3) + t * x,
                2 => 3.0 * g * x * x + t,
                _ => 6.0 * g * x,
            },
            PotentialKind::EvenPolynomial { coefficients } => poly_derivative(coefficients, x, order),
            PotentialKind::UserTable { nodes, values, second } => {
                spline_eval(nodes, values, second, x, order)
            }
        }
    }

    /// 4097 Chebyshev-spaced points on `[-10L, 10L]`.
    pub fn audit_grid(&self) -> Vec<f64> {
        let r = 10.0 * self.clip_radius;
        let m = (AUDIT_POINTS - 1) as f64;
        let mut g: Vec<f64> = (0..AUDIT_POINTS)
            .map(|j| -r * (std::f64::consts::PI * j as f64 / m).cos())
            .collect();
        g[0] = -r;
        g[AUDIT_POINTS - 1] = r;
        g
    }
}

fn poly_derivative(c: &[f64], x: f64, order: usize) -> f64 {
    // Horner on the differentiated coefficients
    let mut acc = 0.0;
    for k in (order..c.len()).rev() {
        let mut factor = 1.0;
        for j in 0..order {
            factor *= (k - j) as f64;
        }
        acc = acc * x + factor * c[k];
    }
    acc
}

fn natural_spline_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // tridiagonal solve for interior second derivatives
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        diag[i] = 2.0 * (h0 + h1);
        upper[i] = h1;
        rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    for i in 2..n - 1 {
        let h0 = x[i] - x[i - 1];
        let w = h0 / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    for i in (1..n - 1).rev() {
        let next = if i + 1 < n - 1 { m[i + 1] } else { 0.0 };
        m[i] = (rhs[i] - upper[i] * next) / diag[i];
    }
    m
}

fn spline_eval(x: &[f64], y: &[f64], m: &[f64], t: f64, order: usize) -> f64 {
    let n = x.len();
    let i = match x.partition_point(|&v| v <= t) {
        0 => 0,
        p if p >= n => n - 2,
        p => p - 1,
    };
    let h = x[i + 1] - x[i];
    let a = x[i + 1] - t;
    let b = t - x[i];
    match order {
        0 => {
            m[i] * a.powi(3) / (6.0 * h)
                + m[i + 1] * b.powi(3) / (6.0 * h)
                + (y[i] / h - m[i] * h / 6.0) * a
                + (y[i + 1] / h - m[i + 1] * h / 6.0) * b
        }
        1 => {
            -m[i] * a * a / (2.0 * h) + m[i + 1] * b * b / (2.0 * h) + (y[i + 1] - y[i]) / h
                - (m[i + 1] - m[i]) * h / 6.0
        }
        2 => (m[i] * a + m[i + 1] * b) / h,
        _ => 0.0,
    }
}

/// Outcome of a single hypothesis check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Audit point where the check was tightest, when meaningful.
    pub worst_point: Option<f64>,
    pub worst_value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Audits the growth, positivity and regularity hypotheses on the audit grid.
///
/// The growth inequality `V ≥ 2(1+ε)log(1+|λ|)` is an at-infinity condition
/// (a constant shift of `V` changes nothing), so it is audited for
/// `|λ| ≥ clip_radius` only.
pub fn validate(p: &PotentialSpec) -> ValidationReport {
    let mut checks = Vec::new();
    let params_ok = p.epsilon > 0.0 && p.clip_radius > 0.0 && p.epsilon.is_finite() && p.clip_radius.is_finite();
    checks.push(Check {
        name: "parameters".into(),
        passed: params_ok,
        worst_point: None,
        worst_value: p.epsilon.min(p.clip_radius),
        detail: format!("epsilon = {}, clip_radius = {}", p.epsilon, p.clip_radius),
    });

    match &p.kind {
        PotentialKind::Quartic { g, .. } => checks.push(Check {
            name: "leading-coefficient".into(),
            passed: *g > 0.0,
            worst_point: None,
            worst_value: *g,
            detail: "quartic coupling g must be positive".into(),
        }),
        PotentialKind::EvenPolynomial { coefficients } => {
            let deg = coefficients.iter().rposition(|c| *c != 0.0);
            let (passed, lead) = match deg {
                Some(d) => (d >= 2 && d % 2 == 0 && coefficients[d] > 0.0, coefficients[d]),
                None => (false, 0.0),
            };
            checks.push(Check {
                name: "leading-coefficient".into(),
                passed,
                worst_point: None,
                worst_value: lead,
                detail: format!("degree {:?}, leading coefficient {lead}", deg),
            });
        }
        PotentialKind::UserTable { nodes, values, .. } => {
            let passed = nodes.len() >= MIN_TABLE_NODES && values.iter().all(|v| v.is_finite());
            checks.push(Check {
                name: "resolution".into(),
                passed,
                worst_point: None,
                worst_value: nodes.len() as f64,
                detail: format!("{} table nodes, at least {MIN_TABLE_NODES} required", nodes.len()),
            });
        }
        PotentialKind::Gaussian => {}
    }

    let grid = p.audit_grid();
    let coeff = 2.0 * (1.0 + p.epsilon);
    let (mut g_worst, mut g_at) = (f64::INFINITY, 0.0);
    let (mut v_worst, mut v_at) = (f64::INFINITY, 0.0);
    for &x in &grid {
        let v = p.value(x);
        if v < v_worst || v.is_nan() {
            v_worst = v;
            v_at = x;
        }
        if x.abs() >= p.clip_radius {
            let margin = v - coeff * (1.0 + x.abs()).ln();
            if margin < g_worst || margin.is_nan() {
                g_worst = margin;
                g_at = x;
            }
        }
    }
    checks.push(Check {
        name: "growth".into(),
        passed: g_worst >= 0.0,
        worst_point: Some(g_at),
        worst_value: g_worst,
        detail: "min of V - 2(1+eps)log(1+|x|) over |x| >= clip_radius".into(),
    });
    checks.push(Check {
        name: "nonnegative".into(),
        passed: v_worst >= 0.0,
        worst_point: Some(v_at),
        worst_value: v_worst,
        detail: "min of V over the audit grid".into(),
    });

    let inner: Vec<f64> = grid.iter().copied().filter(|x| x.abs() <= p.clip_radius).collect();
    let (mut lip, mut lip_at) = (0.0f64, 0.0);
    for w in inner.windows(2) {
        let q = (p.d1(w[1]) - p.d1(w[0])).abs() / (w[1] - w[0]);
        if !(q <= lip) {
            lip = q;
            lip_at = w[0];
        }
    }
    checks.push(Check {
        name: "lipschitz".into(),
        passed: lip.is_finite(),
        worst_point: Some(lip_at),
        worst_value: lip,
        detail: "max |V'(x)-V'(y)|/|x-y| over adjacent audit pairs in [-L, L]".into(),
    });

    ValidationReport { checks }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PotentialJson {
    kind: String,
    #[serde(default)]
    params: Value,
    #[serde(default = "default_epsilon")]
    epsilon: f64,
    #[serde(default = "default_clip")]
    clip_radius: f64,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_clip() -> f64 {
    DEFAULT_CLIP_RADIUS
}

fn param_f64(params: &Value, key: &str) -> Result<f64> {
    params
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::InvalidArgument(format!("missing numeric parameter '{key}'")))
}

fn param_vec(params: &Value, key: &str) -> Result<Vec<f64>> {
    let arr = params
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::InvalidArgument(format!("missing array parameter '{key}'")))?;
    arr.iter()
        .map(|v| v.as_f64().ok_or_else(|| Error::InvalidArgument(format!("non-numeric entry in '{key}'"))))
        .collect()
}

impl TryFrom<PotentialJson> for PotentialSpec {
    type Error = Error;

    fn try_from(j: PotentialJson) -> Result<Self> {
        let base = match j.kind.as_str() {
            "gaussian" => PotentialSpec::gaussian(),
            "quartic" => PotentialSpec::quartic(param_f64(&j.params, "g")?, param_f64(&j.params, "t")?),
            "even-polynomial" => PotentialSpec::polynomial(param_vec(&j.params, "coefficients")?),
            "user-table" => PotentialSpec::table(param_vec(&j.params, "nodes")?, param_vec(&j.params, "values")?)?,
            other => return invalid(format!("unknown potential kind '{other}'")),
        };
        Ok(base.with_epsilon(j.epsilon).with_clip_radius(j.clip_radius))
    }
}

impl From<PotentialSpec> for PotentialJson {
    fn from(p: PotentialSpec) -> Self {
        let params = match &p.kind {
            PotentialKind::Gaussian => Value::Object(Default::default()),
            PotentialKind::Quartic { g, t } => serde_json::json!({ "g": g, "t": t }),
            PotentialKind::EvenPolynomial { coefficients } => serde_json::json!({ "coefficients": coefficients }),
            PotentialKind::UserTable { nodes, values, .. } => serde_json::json!({ "nodes": nodes, "values": values }),
        };
        PotentialJson { kind: p.kind.name().to_string(), params, epsilon: p.epsilon, clip_radius: p.clip_radius }
    }
}

impl std::str::FromStr for PotentialSpec {
    type Err = Error;

    /// Accepts the builtin names `gaussian` and `quartic` (g = 1, t = 0) or a JSON document.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(PotentialSpec::gaussian()),
            "quartic" => Ok(PotentialSpec::quartic(1.0, 0.0)),
            other => Ok(serde_json::from_str(other)?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn builtin_values() {
        let g = PotentialSpec::gaussian();
        assert_eq!(g.eval(2.0, 0).unwrap(), 2.0);
        assert_eq!(g.eval(-3.0, 1).unwrap(), -3.0);
        let q = PotentialSpec::quartic(1.0, 0.0);
        assert_eq!(q.eval(1.0, 2).unwrap(), 3.0);
        assert_eq!(q.eval(1.0, 3).unwrap(), 6.0);
        assert!(g.eval(0.0, 4).is_err());
    }

    #[test]
    fn table_rejects_third_derivative() {
        let xs: Vec<f64> = (0..21).map(|i| -5.0 + 0.5 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x * x).collect();
        let p = PotentialSpec::table(xs, ys).unwrap();
        assert!(matches!(p.eval(0.3, 3), Err(Error::UnsupportedDerivative { order: 3, .. })));
        assert!((p.eval(0.0, 0).unwrap()).abs() < 1e-2);
    }

    #[test]
    fn linear_continuation_is_c1() {
        for p in [PotentialSpec::gaussian(), PotentialSpec::quartic(1.0, -0.5)] {
            let l = p.clip_radius();
            for s in [-1.0, 1.0] {
                let edge = s * l;
                let inner = p.raw(edge, 0);
                let h = 1e-9;
                let outside = p.value(edge + s * h);
                assert!((outside - inner - s * h * p.raw(edge, 1)).abs() <= 1e-12 * inner.abs().max(1.0));
                assert!((p.d1(edge + s * 5.0) - p.raw(edge, 1)).abs() <= 1e-12);
                assert_eq!(p.d2(edge + s * 1.0), 0.0);
            }
        }
        let g = PotentialSpec::gaussian();
        assert_eq!(g.value(12.0), 50.0 + 10.0 * 2.0);
    }

    #[test]
    fn validation_examples() {
        let r = validate(&PotentialSpec::gaussian().with_epsilon(0.5));
        assert!(r.passed(), "{:?}", r.failures());

        let r = validate(&PotentialSpec::polynomial(vec![0.0, 0.0, -1.0]));
        assert!(!r.check("growth").unwrap().passed);
        assert!(!r.passed());

        let p = PotentialSpec::table(vec![-1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(!validate(&p).check("resolution").unwrap().passed);

        assert!(validate(&PotentialSpec::quartic(1.0, 0.0)).passed());
    }

    #[test]
    fn first_derivative_matches_finite_differences() {
        let potentials = [
            PotentialSpec::gaussian(),
            PotentialSpec::quartic(1.0, 0.0),
            PotentialSpec::polynomial(vec![0.0, 0.1, 0.5, 0.0, 0.2]),
        ];
        for p in &potentials {
            for &x in p.audit_grid().iter().filter(|x| (x.abs() - p.clip_radius()).abs() > 1e-3) {
                let h = 1e-5 * x.abs().max(1.0);
                let fd = (p.value(x + h) - p.value(x - h)) / (2.0 * h);
                let exact = p.d1(x);
                assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "x={x} fd={fd} exact={exact}");
            }
        }
    }

    #[test]
    fn json_schema_round_trip() {
        let text = r#"{"kind": "quartic", "params": {"g": 1.0, "t": 0.5}, "epsilon": 0.25, "clip_radius": 8}"#;
        let p: PotentialSpec = text.parse().unwrap();
        assert_eq!(p.kind(), &PotentialKind::Quartic { g: 1.0, t: 0.5 });
        assert_eq!(p.clip_radius(), 8.0);
        let back: PotentialSpec = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        let g: PotentialSpec = r#"{"kind": "gaussian"}"#.parse().unwrap();
        assert_eq!(g, PotentialSpec::gaussian());
        assert!(r#"{"kind": "cubic"}"#.parse::<PotentialSpec>().is_err());
    }

    proptest! {
        #[test]
        fn even_polynomials_are_even(c0 in -1.0f64..1.0, c2 in 0.0f64..2.0, c4 in 0.01f64..1.0, x in -30.0f64..30.0) {
            let p = PotentialSpec::polynomial(vec![c0, 0.0, c2, 0.0, c4]);
            prop_assert!(p.is_even());
            for order in 0..3 {
                let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
                let a = p.eval(x, order).unwrap();
                let b = p.eval(-x, order).unwrap();
                prop_assert!((a - sign * b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }

        #[test]
        fn spline_interpolates_nodes(shift in -1.0f64..1.0) {
            let xs: Vec<f64> = (0..11).map(|i| -5.0 + i as f64).collect();
            let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x * x + shift).collect();
            let p = PotentialSpec::table(xs.clone(), ys.clone()).unwrap();
            for (x, y) in xs.iter().zip(&ys) {
                prop_assert!((p.value(*x) - y).abs() < 1e-12);
            }
        }
    }
}
