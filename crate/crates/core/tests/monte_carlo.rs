use mml::equilibrium::solve;
use mml::kernel::KernelField;
use mml::loggas::{mean_with_stderr, ncm_statistics, sample_chains, variance_with_stderr, GasConfig};
use mml::potential::PotentialSpec;
use mml::quadrature::gauss_legendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// `log Z_n` for `Π|Δ|² Π e^{−nλ²/2}` from monic Hermite norms `√(2π/n) l!/n^l`.
fn gue_log_partition(n: usize) -> f64 {
    let nf = n as f64;
    let mut log_z: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    let mut log_fact = 0.0;
    for l in 0..n {
        if l > 0 {
            log_fact += (l as f64).ln();
        }
        log_z += 0.5 * (2.0 * std::f64::consts::PI / nf).ln() + log_fact - l as f64 * nf.ln();
    }
    log_z
}

#[test]
fn two_point_marginal_by_importance_sampling() {
    let n = 8;
    let nf = n as f64;
    let fixed = [0.0, 0.5];
    let samples = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let log_z = gue_log_partition(n);
    let log_norm_const = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let mut values = Vec::with_capacity(samples);
    let mut lam = vec![0.0; n];
    lam[..2].copy_from_slice(&fixed);
    for _ in 0..samples {
        // proposal N(0, 1) for each free eigenvalue
        let mut log_w = 0.0;
        for x in lam.iter_mut().skip(2) {
            let z: f64 = rng.sample(StandardNormal);
            *x = z;
            log_w += log_norm_const + 0.5 * z * z;
        }
        let mut log_f: f64 = -0.5 * nf * lam.iter().map(|x| x * x).sum::<f64>();
        for i in 0..n {
            for j in 0..i {
                log_f += 2.0 * (lam[i] - lam[j]).abs().ln();
            }
        }
        values.push((log_f + log_w - log_z).exp());
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    let stderr = sd / m.sqrt();
    let f = KernelField::build(&PotentialSpec::gaussian(), n).unwrap();
    let exact = f.marginal(&fixed).unwrap();
    assert!(stderr < 0.05 * exact, "stderr {stderr} vs {exact}");
    assert!((mean - exact).abs() < 3.0 * stderr, "mc {mean} ± {stderr}, kernel {exact}");
}

fn gaussian_sample(n: usize, beta: f64, per_chain: usize, chains: usize) -> mml::loggas::EnsembleSample {
    let cfg = GasConfig::new(PotentialSpec::gaussian(), n, beta).with_seed(17).with_burn_in(20_000 * n);
    sample_chains(&cfg, per_chain, chains).unwrap()
}

#[test]
fn sampled_density_matches_kernel() {
    let n = 8;
    let s = gaussian_sample(n, 2.0, 10_000, 4);
    let f = KernelField::build(&PotentialSpec::gaussian(), n).unwrap();
    let (lo, hi, bins) = (-2.4, 2.4, 12);
    let width = (hi - lo) / bins as f64;
    let mut worst: f64 = 0.0;
    for b in 0..bins {
        let (l, r) = (lo + width * b as f64, lo + width * (b + 1) as f64);
        let per_cfg: Vec<f64> = s
            .configurations
            .iter()
            .map(|c| c.iter().filter(|&&x| x >= l && x < r).count() as f64 / (n as f64 * width))
            .collect();
        let (mean, se) = mean_with_stderr(&per_cfg);
        let expected = gauss_legendre(32, l, r).unwrap().integrate(|x| f.density(x)) / width;
        worst = worst.max((mean - expected).abs() / se);
    }
    assert!(worst < 4.0, "histogram deviates by {worst} standard errors");
}

#[test]
fn linear_statistic_variances_match_kernel() {
    let n = 8;
    let s = gaussian_sample(n, 2.0, 10_000, 4);
    let f = KernelField::build(&PotentialSpec::gaussian(), n).unwrap();
    let phis: [fn(f64) -> f64; 2] = [|x| x, |x| x * x];
    for phi in phis {
        let values: Vec<f64> = s.configurations.iter().map(|c| c.iter().map(|&x| phi(x)).sum::<f64>() / n as f64).collect();
        let (_, var, se) = variance_with_stderr(&values);
        let exact = f.variance_linear_stat(phi);
        assert!((var - exact).abs() < 3.0 * se, "sampled {var} ± {se}, kernel {exact}");
    }
}

#[test]
fn cdf_distance_shrinks_with_n() {
    let p = PotentialSpec::gaussian();
    let eq = solve(&p, 64).unwrap();
    for beta in [1.0, 2.0] {
        let d16 = ncm_statistics(&gaussian_sample(16, beta, 2_000, 2), &eq, &p).unwrap().cdf_distance;
        let d64 = ncm_statistics(&gaussian_sample(64, beta, 2_000, 2), &eq, &p).unwrap().cdf_distance;
        assert!(d64 < d16, "β={beta}: {d64} vs {d16}");
    }
}

#[test]
fn no_eigenvalues_far_outside_support() {
    let p = PotentialSpec::gaussian();
    let eq = solve(&p, 64).unwrap();
    let r = ncm_statistics(&gaussian_sample(64, 2.0, 2_500, 4), &eq, &p).unwrap();
    assert_eq!(r.configurations, 10_000);
    let t = r.tails.iter().find(|t| t.epsilon == 0.2).unwrap();
    assert_eq!(t.outside_count, 0);
    assert!(t.predicted_log_bound < 0.0);
}
