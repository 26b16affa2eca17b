use mml::equilibrium::{energy, solve, DEFAULT_GRID_ORDER};
use mml::potential::PotentialSpec;
use nalgebra::{DMatrix, DVector};

/// Minimiser of `(1/n)ΣV(x_i) + (1/n²)Σ_{i≠j} log 1/|x_i − x_j|` by damped Newton.
fn fekete_points(p: &PotentialSpec, n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut x: Vec<f64> = (0..n).map(|i| -1.5 + 3.0 * (i as f64 + 0.5) / nf).collect();
    let discrete = |x: &[f64]| {
        let mut e: f64 = x.iter().map(|&t| p.value(t)).sum::<f64>() / nf;
        for i in 0..n {
            for j in i + 1..n {
                e -= 2.0 * (x[i] - x[j]).abs().ln() / (nf * nf);
            }
        }
        e
    };
    for _ in 0..100 {
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            g[i] = p.d1(x[i]) / nf;
            h[(i, i)] = p.d2(x[i]) / nf;
            for j in 0..n {
                if i != j {
                    let d = x[i] - x[j];
                    g[i] -= 2.0 / (nf * nf * d);
                    let c = 2.0 / (nf * nf * d * d);
                    h[(i, i)] += c;
                    h[(i, j)] -= c;
                }
            }
        }
        if g.norm() < 1e-13 {
            break;
        }
        let step = h.cholesky().expect("convex energy").solve(&g);
        let e0 = discrete(&x);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            let ordered = trial.windows(2).all(|w| w[0] < w[1]);
            if ordered && discrete(&trial) <= e0 {
                x = trial;
                break;
            }
            t *= 0.5;
            assert!(t > 1e-12, "line search failed");
        }
    }
    x
}

#[test]
fn quartic_matches_fekete_points() {
    let p = PotentialSpec::quartic(1.0, 0.0);
    let m = solve(&p, DEFAULT_GRID_ORDER).unwrap();
    let n = 400;
    let x = fekete_points(&p, n);
    let (a, b) = m.support();
    assert!((x[0] - a).abs() < 0.05 && (x[n - 1] - b).abs() < 0.05, "{} {} vs {a} {b}", x[0], x[n - 1]);

    let bins = 6;
    let width = (b - a) / bins as f64;
    let mut sup: f64 = 0.0;
    for k in 0..bins {
        let (lo, hi) = (a + k as f64 * width, a + (k + 1) as f64 * width);
        let count = x.iter().filter(|&&t| t >= lo && t < hi).count() as f64;
        let empirical = count / (n as f64 * width);
        let exact = (m.cdf(hi) - m.cdf(lo)) / width;
        sup = sup.max((empirical - exact).abs());
    }
    assert!(sup < 0.01, "histogram sup distance {sup}");

    // continuum energy is the limit of the discrete one
    let discrete: f64 = x.iter().map(|&t| p.value(t)).sum::<f64>() / n as f64
        - (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| 2.0 * (x[i] - x[j]).abs().ln())
            .sum::<f64>()
            / (n * n) as f64;
    assert!((discrete - energy(&p, &m)).abs() < 0.02);
}
