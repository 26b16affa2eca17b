use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "mml", version, about = "Matrix-model laboratory: equilibrium measures, kernels, gaps and log-gas sampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// `gaussian` (default), `quartic`, a path to a potential JSON file, or inline JSON.
    #[arg(long)]
    pub potential: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: available cores). `MML_THREADS` takes precedence.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Print a JSON summary instead of text.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Equilibrium measure: support, u_*, density.
    Eq(EqArgs),
    /// Recurrence coefficients and free energy.
    Ortho(OrthoArgs),
    /// Reproducing kernel: density, rescaled kernel, identities.
    Kernel(KernelArgs),
    /// Gap probabilities.
    Gap(GapArgs),
    /// Log-gas Metropolis sampling.
    Sample(SampleArgs),
    /// Convergence sweep over n.
    Universality(UniversalityArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Eq(_) => "eq",
            Command::Ortho(_) => "ortho",
            Command::Kernel(_) => "kernel",
            Command::Gap(_) => "gap",
            Command::Sample(_) => "sample",
            Command::Universality(_) => "universality",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Eq(a) => &a.common,
            Command::Ortho(a) => &a.common,
            Command::Kernel(a) => &a.common,
            Command::Gap(a) => &a.common,
            Command::Sample(a) => &a.common,
            Command::Universality(a) => &a.common,
        }
    }
}

#[derive(Debug, Args)]
pub struct EqArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 64)]
    pub grid_order: usize,
    /// Density CSV rows.
    #[arg(long, default_value_t = 513)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct OrthoArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lambda0: f64,
    #[arg(long, default_value_t = 401)]
    pub points: usize,
    /// Half-width of the rescaled-kernel lattice.
    #[arg(long, default_value_t = 4.0)]
    pub half: f64,
    #[arg(long, default_value_t = 81)]
    pub steps: usize,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    #[command(flatten)]
    pub common: Common,
    /// Sine-kernel determinant only.
    #[arg(long, conflicts_with = "n")]
    pub sine: bool,
    /// Finite-n hole probability against the sine kernel.
    #[arg(long, required_unless_present = "sine")]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lambda0: f64,
    /// `lo..hi:step` or a comma-separated list.
    #[arg(long, default_value = "0..3:0.1")]
    pub s: String,
    #[arg(long, default_value_t = 64)]
    pub order: usize,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    /// Total configurations, split evenly over chains.
    #[arg(long)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Metropolis moves before sampling (default 10⁵·n).
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Moves between stored configurations (default n).
    #[arg(long)]
    pub thin: Option<usize>,
}

#[derive(Debug, Args)]
pub struct UniversalityArgs {
    #[command(flatten)]
    pub common: Common,
    /// JSON run-config; flags given explicitly override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda0: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long = "box")]
    pub kernel_box: Option<f64>,
}
