//! Metropolis sampler for the log-gas
//!
//! ```text
//! p(Λ) ∝ exp(−(βn/2) Σ V(λ_i)) · Π_{i<j} |λ_i − λ_j|^β
//! ```
//!
//! with single-site Gaussian proposals. Chains are driven by ChaCha8 streams
//! so that parallel chains are reproducible and independent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::EquilibriumMeasure;
use crate::error::{invalid, Result};
use crate::potential::PotentialSpec;
use crate::quadrature::composite;

const TARGET_ACCEPTANCE: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasConfig {
    pub n: usize,
    pub beta: f64,
    pub potential: PotentialSpec,
    pub proposal_scale: f64,
    pub seed: u64,
    /// Single-site moves discarded before collection.
    pub burn_in: usize,
    /// Single-site moves between stored configurations.
    pub thin: usize,
}

impl GasConfig {
    /// Defaults: burn-in `10⁵·n` moves, thinning `n` moves, seed 0.
    pub fn new(potential: PotentialSpec, n: usize, beta: f64) -> Self {
        GasConfig {
            n,
            beta,
            potential,
            proposal_scale: 1.0 / (n.max(1) as f64).sqrt(),
            seed: 0,
            burn_in: 100_000 * n,
            thin: n.max(1),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_thin(mut self, thin: usize) -> Self {
        self.thin = thin;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("log-gas needs at least one particle");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return invalid(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.proposal_scale > 0.0 && self.proposal_scale.is_finite()) {
            return invalid("proposal scale must be positive");
        }
        if self.thin == 0 {
            return invalid("thin must be at least 1");
        }
        Ok(())
    }
}

/// `H(Λ) = Σ V(λ_i) − (1/n) Σ_{i<j} log|λ_i − λ_j|`; `+∞` on coincident points.
pub fn hamiltonian(cfg: &GasConfig, lambda: &[f64]) -> f64 {
    let n = lambda.len() as f64;
    let mut h: f64 = lambda.iter().map(|&x| cfg.potential.value(x)).sum();
    for i in 0..lambda.len() {
        for j in i + 1..lambda.len() {
            let d = (lambda[i] - lambda[j]).abs();
            if d == 0.0 {
                return f64::INFINITY;
            }
            h -= d.ln() / n;
        }
    }
    h
}

/// Log of the unnormalized target density; `−∞` on coincident points.
pub fn log_density(cfg: &GasConfig, lambda: &[f64]) -> f64 {
    let nf = cfg.n as f64;
    let mut s = -0.5 * cfg.beta * nf * lambda.iter().map(|&x| cfg.potential.value(x)).sum::<f64>();
    for i in 0..lambda.len() {
        for j in i + 1..lambda.len() {
            let d = (lambda[i] - lambda[j]).abs();
            if d == 0.0 {
                return f64::NEG_INFINITY;
            }
            s += cfg.beta * d.ln();
        }
    }
    s
}

/// Change in log density when site `i` moves to `y`.
fn site_delta(cfg: &GasConfig, lambda: &[f64], i: usize, y: f64) -> f64 {
    let x = lambda[i];
    let nf = cfg.n as f64;
    let mut d = -0.5 * cfg.beta * nf * (cfg.potential.value(y) - cfg.potential.value(x));
    for (j, &l) in lambda.iter().enumerate() {
        if j != i {
            let dy = (y - l).abs();
            if dy == 0.0 {
                return f64::NEG_INFINITY;
            }
            d += cfg.beta * (dy.ln() - (x - l).abs().ln());
        }
    }
    d
}

/// Metropolis acceptance probability of moving site `i` of `lambda` to `y`.
pub fn metropolis_acceptance(cfg: &GasConfig, lambda: &[f64], i: usize, y: f64) -> f64 {
    let d = site_delta(cfg, lambda, i, y);
    if d >= 0.0 {
        1.0
    } else {
        d.exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSample {
    pub n: usize,
    pub beta: f64,
    /// Sorted eigenvalue vectors.
    pub configurations: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    pub proposal_scale: f64,
    /// Acceptance outside `[0.1, 0.9]` after tuning.
    pub flagged: bool,
}

impl EnsembleSample {
    pub fn eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        self.configurations.iter().flatten().copied()
    }

    /// One row per configuration, columns `lambda_1 … lambda_n`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let header: Vec<String> = (1..=self.n).map(|i| format!("lambda_{i}")).collect();
        w.write_record(&header)?;
        for c in &self.configurations {
            w.write_record(c.iter().map(|&x| crate::io_fmt(x)))?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Chain<'a> {
    cfg: &'a GasConfig,
    rng: ChaCha8Rng,
    state: Vec<f64>,
    scale: f64,
    site: usize,
}

impl Chain<'_> {
    fn step(&mut self) -> bool {
        let n = self.cfg.n;
        let i = self.site;
        self.site = (self.site + 1) % n;
        let z: f64 = self.rng.sample(StandardNormal);
        let y = self.state[i] + self.scale * z;
        let a = metropolis_acceptance(self.cfg, &self.state, i, y);
        let u: f64 = self.rng.random();
        if u < a {
            self.state[i] = y;
            true
        } else {
            false
        }
    }
}

fn run_chain(cfg: &GasConfig, n_samples: usize, stream: u64) -> EnsembleSample {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let n = cfg.n;
    let state = (0..n).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / n as f64).collect();
    let mut chain = Chain { cfg, rng, state, scale: cfg.proposal_scale, site: 0 };

    let window = 100 * n;
    let mut accepted = 0usize;
    for m in 1..=cfg.burn_in {
        if chain.step() {
            accepted += 1;
        }
        if m % window == 0 {
            let rate = accepted as f64 / window as f64;
            chain.scale *= if rate > TARGET_ACCEPTANCE { 1.1 } else { 1.0 / 1.1 };
            accepted = 0;
        }
    }

    let mut configurations = Vec::with_capacity(n_samples);
    let mut acc = 0usize;
    for _ in 0..n_samples {
        for _ in 0..cfg.thin {
            if chain.step() {
                acc += 1;
            }
        }
        let mut c = chain.state.clone();
        c.sort_by(f64::total_cmp);
        configurations.push(c);
    }
    let moves = n_samples * cfg.thin;
    let acceptance_rate = if moves > 0 { acc as f64 / moves as f64 } else { 0.0 };
    EnsembleSample {
        n,
        beta: cfg.beta,
        configurations,
        acceptance_rate,
        proposal_scale: chain.scale,
        flagged: moves > 0 && !(0.1..=0.9).contains(&acceptance_rate),
    }
}

/// `n_samples` configurations from one chain.
pub fn sample(cfg: &GasConfig, n_samples: usize) -> Result<EnsembleSample> {
    cfg.validate()?;
    Ok(run_chain(cfg, n_samples, 0))
}

/// `chains` independent chains of `per_chain` configurations each, run in
/// parallel on disjoint streams and concatenated in chain order.
pub fn sample_chains(cfg: &GasConfig, per_chain: usize, chains: usize) -> Result<EnsembleSample> {
    cfg.validate()?;
    if chains == 0 {
        return invalid("need at least one chain");
    }
    let parts: Vec<EnsembleSample> = (0..chains as u64).into_par_iter().map(|s| run_chain(cfg, per_chain, s)).collect();
    let moves: f64 = parts.iter().map(|p| p.configurations.len() as f64).sum();
    let acceptance_rate = if moves > 0.0 {
        parts.iter().map(|p| p.acceptance_rate * p.configurations.len() as f64).sum::<f64>() / moves
    } else {
        0.0
    };
    let proposal_scale = parts.iter().map(|p| p.proposal_scale).sum::<f64>() / chains as f64;
    let flagged = parts.iter().any(|p| p.flagged);
    Ok(EnsembleSample {
        n: cfg.n,
        beta: cfg.beta,
        configurations: parts.into_iter().flat_map(|p| p.configurations).collect(),
        acceptance_rate,
        proposal_scale,
        flagged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearStatistic {
    pub name: String,
    pub mean: f64,
    pub variance: f64,
    /// Batch-means standard error of `variance`.
    pub variance_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRecord {
    pub epsilon: f64,
    pub observed_fraction: f64,
    pub outside_count: usize,
    /// `d(ε) = inf (u − u_*)/4` over the complement of the ε-neighbourhood.
    pub d_epsilon: f64,
    /// `−n·d(ε)`, the log of the predicted bound.
    pub predicted_log_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcmReport {
    pub n: usize,
    pub beta: f64,
    pub configurations: usize,
    pub cdf_distance: f64,
    pub linear_statistics: Vec<LinearStatistic>,
    pub tails: Vec<TailRecord>,
    /// `∫_{ℝ∖σ} e^{−βn(u − u_*)/4}`.
    pub d_n: f64,
}

const BATCHES: usize = 20;

/// Mean, variance and batch-means standard error of the variance.
pub fn variance_with_stderr(values: &[f64]) -> (f64, f64, f64) {
    let m = values.len();
    if m < 2 {
        return (values.first().copied().unwrap_or(0.0), 0.0, f64::INFINITY);
    }
    let var = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        (mean, v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64)
    };
    let (mean, variance) = var(values);
    let size = m / BATCHES;
    if size < 2 {
        return (mean, variance, f64::INFINITY);
    }
    let bv: Vec<f64> = values.chunks_exact(size).take(BATCHES).map(|c| var(c).1).collect();
    let (_, spread) = var(&bv);
    (mean, variance, (spread / bv.len() as f64).sqrt())
}

/// Batch-means standard error of the mean.
pub fn mean_with_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    let mean = values.iter().sum::<f64>() / m.max(1) as f64;
    let size = m / BATCHES;
    if size == 0 {
        return (mean, f64::INFINITY);
    }
    let bm: Vec<f64> = values.chunks_exact(size).take(BATCHES).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let mb = bm.iter().sum::<f64>() / bm.len() as f64;
    let s2 = bm.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / (bm.len() - 1) as f64;
    (mean, (s2 / bm.len() as f64).sqrt())
}

/// `inf (u − u_*)/4` over `ℝ ∖ [a−ε, b+ε]`, sampled on two unit-density grids.
pub fn tail_exponent(p: &PotentialSpec, eq: &EquilibriumMeasure, epsilon: f64) -> f64 {
    let (a, b) = eq.support();
    (0..=256)
        .flat_map(|i| {
            let t = 4.0 * i as f64 / 256.0;
            [a - epsilon - t, b + epsilon + t]
        })
        .map(|x| (eq.effective_potential(p, x) - eq.u_star()) / 4.0)
        .fold(f64::INFINITY, f64::min)
}

/// Global-regime statistics of a sample against the equilibrium measure.
pub fn ncm_statistics(s: &EnsembleSample, eq: &EquilibriumMeasure, p: &PotentialSpec) -> Result<NcmReport> {
    if s.configurations.is_empty() {
        return invalid("empty sample");
    }
    let mut all: Vec<f64> = s.eigenvalues().collect();
    all.sort_by(f64::total_cmp);
    let total = all.len() as f64;
    let mut cdf_distance: f64 = 0.0;
    for (i, &x) in all.iter().enumerate() {
        let f = eq.cdf(x);
        cdf_distance = cdf_distance.max((f - i as f64 / total).abs()).max((f - (i + 1) as f64 / total).abs());
    }

    let (a, b) = eq.support();
    let c = 0.5 * (a + b);
    let stats: [(&str, Box<dyn Fn(f64) -> f64>); 3] = [
        ("lambda", Box::new(|x| x)),
        ("lambda^2", Box::new(|x| x * x)),
        ("bump", Box::new(move |x: f64| (-2.0 * (x - c).powi(2)).exp())),
    ];
    let linear_statistics = stats
        .iter()
        .map(|(name, phi)| {
            let values: Vec<f64> =
                s.configurations.iter().map(|cfg| cfg.iter().map(|&x| phi(x)).sum::<f64>() / s.n as f64).collect();
            let (mean, variance, variance_stderr) = variance_with_stderr(&values);
            LinearStatistic { name: name.to_string(), mean, variance, variance_stderr }
        })
        .collect();

    let tails = [0.1, 0.2]
        .iter()
        .map(|&epsilon| {
            let outside_count = all.iter().filter(|&&x| x < a - epsilon || x > b + epsilon).count();
            let d_epsilon = tail_exponent(p, eq, epsilon);
            TailRecord {
                epsilon,
                observed_fraction: outside_count as f64 / total,
                outside_count,
                d_epsilon,
                predicted_log_bound: -(s.n as f64) * d_epsilon,
            }
        })
        .collect();

    let k = s.beta * s.n as f64 / 4.0;
    let left = composite(64, 16, a - 6.0, a)?;
    let right = composite(64, 16, b, b + 6.0)?;
    let g = |x: f64| (-k * (eq.effective_potential(p, x) - eq.u_star()).max(0.0)).exp();
    let d_n = left.integrate(g) + right.integrate(g);

    Ok(NcmReport {
        n: s.n,
        beta: s.beta,
        configurations: s.configurations.len(),
        cdf_distance,
        linear_statistics,
        tails,
        d_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve;
    use std::f64::consts::PI;

    #[test]
    fn hamiltonian_examples() {
        let cfg = GasConfig::new(PotentialSpec::gaussian(), 2, 2.0);
        let h = hamiltonian(&cfg, &[-1.0, 1.0]);
        assert!((h - (1.0 - 0.5 * 2f64.ln())).abs() < 1e-15);
        assert!((hamiltonian(&cfg, &[1.0, -1.0]) - h).abs() < 1e-15);
        let one = GasConfig::new(PotentialSpec::quartic(1.0, 0.0), 1, 2.0);
        assert!((hamiltonian(&one, &[0.7]) - 0.25 * 0.7f64.powi(4)).abs() < 1e-15);
        assert_eq!(hamiltonian(&cfg, &[0.3, 0.3]), f64::INFINITY);
        assert_eq!(metropolis_acceptance(&cfg, &[0.1, 0.3], 0, 0.3), 0.0);
    }

    #[test]
    fn detailed_balance_on_grid() {
        // two particles on a five-point lattice, one site chosen uniformly and
        // moved to one of the other four points uniformly
        let cfg = GasConfig::new(PotentialSpec::quartic(1.0, -0.5), 2, 2.0);
        let grid = [-1.3, -0.4, 0.1, 0.8, 1.5];
        let states: Vec<[f64; 2]> = grid.iter().flat_map(|&a| grid.iter().map(move |&b| [a, b])).collect();
        let m = states.len();
        let mut pmat = vec![vec![0.0; m]; m];
        for (i, s) in states.iter().enumerate() {
            for site in 0..2 {
                for &y in grid.iter().filter(|&&g| g != s[site]) {
                    let mut t = *s;
                    t[site] = y;
                    let j = states.iter().position(|u| *u == t).unwrap();
                    let a = if log_density(&cfg, s).is_finite() { metropolis_acceptance(&cfg, s, site, y) } else { 1.0 };
                    pmat[i][j] += 0.5 * 0.25 * a;
                }
            }
            let out: f64 = pmat[i].iter().sum();
            pmat[i][i] += 1.0 - out;
        }
        let pi: Vec<f64> = states.iter().map(|s| log_density(&cfg, s).exp()).collect();
        let z: f64 = pi.iter().sum();
        for i in 0..m {
            for j in 0..m {
                let d = pi[i] * pmat[i][j] / z - pi[j] * pmat[j][i] / z;
                assert!(d.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_particle_is_gaussian() {
        let cfg = GasConfig::new(PotentialSpec::gaussian(), 1, 2.0).with_seed(1).with_burn_in(10_000);
        let s = sample(&cfg, 100_000).unwrap();
        let mut x: Vec<f64> = s.eigenvalues().collect();
        x.sort_by(f64::total_cmp);
        // target ∝ e^{−βnV/2} = e^{−λ²/2}
        let cdf = |t: f64| 0.5 * (1.0 + erf(t / 2f64.sqrt()));
        let m = x.len() as f64;
        let ks = x
            .iter()
            .enumerate()
            .map(|(i, &t)| (cdf(t) - i as f64 / m).abs().max((cdf(t) - (i + 1) as f64 / m).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "KS = {ks}");
        assert!(!s.flagged);
    }

    // Maclaurin series below 3, continued fraction above
    fn erf(x: f64) -> f64 {
        let t = x.abs();
        let v = if t < 3.0 {
            let mut term = t;
            let mut sum = t;
            for k in 1..80 {
                term *= -t * t / k as f64;
                sum += term / (2 * k + 1) as f64;
            }
            2.0 / PI.sqrt() * sum
        } else {
            let mut f = 0.0;
            for k in (1..60).rev() {
                f = k as f64 / 2.0 / (t + f);
            }
            1.0 - (-t * t).exp() / PI.sqrt() / (t + f)
        };
        v.copysign(x)
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = GasConfig::new(PotentialSpec::gaussian(), 4, 1.0).with_seed(9).with_burn_in(2000);
        let a = sample_chains(&cfg, 50, 3).unwrap();
        let b = sample_chains(&cfg, 50, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.configurations.iter().all(|c| c.windows(2).all(|w| w[0] <= w[1])));
        let c = sample(&cfg.clone().with_seed(10), 50).unwrap();
        assert_ne!(c.configurations, a.configurations[..50].to_vec());
    }

    #[test]
    fn two_particle_second_moment() {
        let cfg = GasConfig::new(PotentialSpec::gaussian(), 2, 2.0).with_seed(5).with_burn_in(20_000);
        let s = sample_chains(&cfg, 50_000, 4).unwrap();
        let values: Vec<f64> = s.configurations.iter().map(|c| (c[0] * c[0] + c[1] * c[1]) / 2.0).collect();
        let (mean, se) = mean_with_stderr(&values);
        assert!((mean - 1.0).abs() < 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn empty_sample_and_invalid_config() {
        let cfg = GasConfig::new(PotentialSpec::gaussian(), 2, 2.0).with_burn_in(10);
        let s = sample(&cfg, 0).unwrap();
        assert!(s.configurations.is_empty());
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "lambda_1,lambda_2\n");
        assert!(sample(&GasConfig::new(PotentialSpec::gaussian(), 2, -1.0), 1).is_err());
        assert!(sample(&cfg.clone().with_thin(0), 1).is_err());
    }

    #[test]
    fn tail_exponent_gaussian() {
        let p = PotentialSpec::gaussian();
        let eq = solve(&p, 32).unwrap();
        // u(x) − 1 = x√(x²−4)/2 − 2 log((x + √(x²−4))/2) at x = 2.2
        let x: f64 = 2.2;
        let r = (x * x - 4.0).sqrt();
        let expect = (x * r / 2.0 - 2.0 * ((x + r) / 2.0).ln()) / 4.0;
        assert!((tail_exponent(&p, &eq, 0.2) - expect).abs() < 1e-9);
        assert!(tail_exponent(&p, &eq, 0.1) < tail_exponent(&p, &eq, 0.2));
    }
}
