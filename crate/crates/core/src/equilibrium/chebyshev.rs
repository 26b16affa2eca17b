//! Closed forms for the Chebyshev-U basis `√(1−s²)·U_k(s)` on `[-1, 1]`.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

/// `U_0..U_{m-1}` at `x`.
pub fn u_values(m: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m);
    let (mut u0, mut u1) = (1.0, 2.0 * x);
    for k in 0..m {
        if k == 0 {
            out.push(u0);
        } else {
            out.push(u1);
            let u2 = 2.0 * x * u1 - u0;
            u0 = u1;
            u1 = u2;
        }
    }
    out
}

/// Clenshaw evaluation of `Σ c_k U_k(x)`.
pub fn u_series(c: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().rev() {
        let b0 = ck + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    b1
}

/// `T_0..T_{m-1}` at `x`.
pub fn t_values(m: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m);
    let (mut t0, mut t1) = (1.0, x);
    for k in 0..m {
        if k == 0 {
            out.push(t0);
        } else {
            out.push(t1);
            let t2 = 2.0 * x * t1 - t0;
            t0 = t1;
            t1 = t2;
        }
    }
    out
}

/// `G_k(x) = ∫ log|x−s| √(1−s²) U_k(s) ds` for `k < m`, any real `x`.
pub fn log_moments(m: usize, x: f64) -> Vec<f64> {
    let ax = x.abs();
    let mut g = Vec::with_capacity(m);
    if ax <= 1.0 {
        let t = t_values(m + 2, x);
        for k in 0..m {
            let v = if k == 0 {
                0.5 * PI * (x * x - 0.5 - LN_2)
            } else {
                0.5 * PI * (t[k + 2] / (k + 2) as f64 - t[k] / k as f64)
            };
            g.push(v);
        }
    } else {
        let theta = ax.acosh();
        let w = (-theta).exp();
        let mut wk = 1.0; // e^{-kΘ}
        for k in 0..m {
            let parity = if k % 2 == 0 || x > 0.0 { 1.0 } else { -1.0 };
            let v = if k == 0 {
                0.5 * PI * (0.5 - LN_2) + 0.5 * PI * (theta - 0.5 * (1.0 - w * w))
            } else {
                let kf = k as f64;
                let at_one = 0.5 * PI * (1.0 / (kf + 2.0) - 1.0 / kf);
                at_one + 0.5 * PI * ((1.0 - wk) / kf - (1.0 - wk * w * w) / (kf + 2.0))
            };
            g.push(parity * v);
            wk *= w;
        }
    }
    g
}

/// `H_k(x) = p.v. ∫ √(1−s²) U_k(s)/(x−s) ds` for `k < m`, any real `x`.
pub fn hilbert_moments(m: usize, x: f64) -> Vec<f64> {
    if x.abs() <= 1.0 {
        let t = t_values(m + 1, x);
        (0..m).map(|k| PI * t[k + 1]).collect()
    } else {
        let w = x - x.signum() * (x * x - 1.0).sqrt();
        let mut out = Vec::with_capacity(m);
        let mut p = w;
        for _ in 0..m {
            out.push(PI * p);
            p *= w;
        }
        out
    }
}

/// `∫ √(1−s²) U_k(s)/(ζ−s) ds` for complex `ζ` off the cut.
pub fn cauchy_moments(m: usize, zeta: Complex64) -> Vec<Complex64> {
    let mut w = zeta - (zeta * zeta - 1.0).sqrt();
    if w.norm() > 1.0 {
        w = 1.0 / w;
    }
    let mut out = Vec::with_capacity(m);
    let mut p = w;
    for _ in 0..m {
        out.push(PI * p);
        p *= w;
    }
    out
}

/// `∫_{-1}^{x} √(1−s²) U_k(s) ds` for `k < m`, `x ∈ [-1, 1]`.
pub fn cumulative_moments(m: usize, x: f64) -> Vec<f64> {
    let th = x.clamp(-1.0, 1.0).acos();
    (0..m)
        .map(|k| {
            if k == 0 {
                0.5 * (PI - th + 0.5 * (2.0 * th).sin())
            } else {
                let kf = k as f64;
                0.5 * (((kf + 2.0) * th).sin() / (kf + 2.0) - (kf * th).sin() / kf)
            }
        })
        .collect()
}

/// Gauss rule for the weight `√(1−s²)` on `[-1, 1]`: `(nodes, weights)` with
/// `p` points, exact for polynomials of degree ≤ 2p − 1.
pub fn gauss_u_rule(p: usize) -> (Vec<f64>, Vec<f64>) {
    let h = PI / (p as f64 + 1.0);
    (1..=p)
        .map(|j| {
            let th = h * j as f64;
            (th.cos(), h * th.sin().powi(2))
        })
        .unzip()
}

/// Gauss rule for the weight `1/√(1−s²)` on `[-1, 1]`, `p` points.
pub fn gauss_t_rule(p: usize) -> (Vec<f64>, f64) {
    let nodes = (1..=p).map(|j| (PI * (2 * j - 1) as f64 / (2 * p) as f64).cos()).collect();
    (nodes, PI / p as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;

    // Independent oracle: integrate in θ (s = cos θ) with Gauss–Legendre panels
    // graded geometrically towards the log singularity at θ0 = acos x.
    fn oracle_log_moment(k: usize, x: f64) -> f64 {
        let t0 = x.clamp(-1.0, 1.0).acos();
        let f = |th: f64| {
            // x − cos θ in product form
            let d = if x.abs() <= 1.0 {
                2.0 * (0.5 * (th + t0)).sin() * (0.5 * (th - t0)).sin()
            } else {
                x - th.cos()
            };
            d.abs().ln() * ((k + 1) as f64 * th).sin() * th.sin()
        };
        let mut breaks = vec![0.0, PI];
        if x.abs() <= 1.0 {
            for i in 0..40 {
                let d = 0.5f64.powi(i);
                breaks.push(t0 - t0 * d);
                breaks.push(t0 + (PI - t0) * d);
            }
            breaks.push(t0);
        }
        breaks.sort_by(|p, q| p.partial_cmp(q).unwrap());
        breaks.dedup();
        breaks
            .windows(2)
            .map(|e| gauss_legendre(24, e[0], e[1]).unwrap().integrate(f))
            .sum()
    }

    #[test]
    fn log_moments_match_quadrature() {
        for &x in &[-3.0, -1.7, -1.0, -0.6, 0.0, 0.25, 0.9, 1.0, 1.3, 4.0] {
            let g = log_moments(6, x);
            for k in 0..6 {
                let o = oracle_log_moment(k, x);
                assert!((g[k] - o).abs() < 1e-10, "k={k} x={x}: {} vs {o}", g[k]);
            }
        }
    }

    #[test]
    fn hilbert_moments_are_log_derivatives() {
        for &x in &[-2.5, -0.4, 0.3, 0.8, 1.6] {
            let h = 1e-6;
            let gp = log_moments(5, x + h);
            let gm = log_moments(5, x - h);
            let hm = hilbert_moments(5, x);
            for k in 0..5 {
                let fd = (gp[k] - gm[k]) / (2.0 * h);
                assert!((fd - hm[k]).abs() < 1e-7, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn cumulative_moments_match_rule() {
        for k in 0..5 {
            let total = cumulative_moments(5, 1.0)[k];
            let expect = if k == 0 { PI / 2.0 } else { 0.0 };
            assert!((total - expect).abs() < 1e-14);
        }
        let x: f64 = 0.3;
        let r = gauss_legendre(200, x.acos(), PI).unwrap();
        for k in 0..5 {
            let o = r.integrate(|th| ((k + 1) as f64 * th).sin() * th.sin());
            assert!((cumulative_moments(5, x)[k] - o).abs() < 1e-12);
        }
    }
}
