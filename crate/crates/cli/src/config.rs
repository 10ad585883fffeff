use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use omegaz_core::model::TailPolicy;
use omegaz_core::{CutoffPolicy, Statistic};

/// Experiments on gaps between consecutive prime divisors.
#[derive(Debug, Clone, Parser)]
#[command(name = "omegaz", version)]
pub struct ExperimentConfig {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output file (default: standard output).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Binary prime-table cache; read when it covers the needed limit,
    /// rewritten otherwise.
    #[arg(long, global = true)]
    pub prime_cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Tail {
    Exact,
    MertensExtension,
}

impl From<Tail> for TailPolicy {
    fn from(t: Tail) -> Self {
        match t {
            Tail::Exact => TailPolicy::Exact,
            Tail::MertensExtension => TailPolicy::MertensExtension,
        }
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Moments of the delta sum (or gap count) over every m in [1, n].
    Sweep(SweepArgs),
    /// Exact model mean and variance c_N, s_N^2.
    ModelExact(ModelArgs),
    /// Monte Carlo draws of the model sum S_N.
    ModelMc(McArgs),
    /// Exact moments of S_N by outcome enumeration.
    Oracle(OracleArgs),
    /// Stein normal-approximation diagnostics at small N.
    Stein(SteinArgs),
    /// Exact joint delta counts against the model product.
    SieveCheck(SieveCheckArgs),
    /// Normalized moments of a sweep file as CSV.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub z: f64,
    #[arg(long, default_value_t = 4)]
    pub r_max: usize,
    /// full | paper | corrected | fixed:N. Defaults to corrected for the
    /// delta sum and full for the gap count, which cannot be truncated.
    #[arg(long)]
    pub cutoff_policy: Option<CutoffPolicy>,
    /// Accumulation shift (default e^{-z} ln ln n).
    #[arg(long, allow_hyphen_values = true)]
    pub shift: Option<f64>,
    #[arg(long, default_value_t = 1 << 15)]
    pub segment_size: usize,
    /// delta-sum | gap-count
    #[arg(long, default_value = "delta-sum")]
    pub statistic: Statistic,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long = "N")]
    pub big_n: u64,
    #[arg(long)]
    pub z: f64,
    #[arg(long, value_enum, default_value_t = Tail::Exact)]
    pub tail: Tail,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[arg(long = "N")]
    pub big_n: u64,
    #[arg(long)]
    pub z: f64,
    /// Required: no wall-clock seeding.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 4)]
    pub r_max: usize,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long = "N")]
    pub big_n: u64,
    #[arg(long)]
    pub z: f64,
    /// Enumeration cutoff (default N^(e^z)).
    #[arg(long = "M")]
    pub big_m: Option<u64>,
    #[arg(long, default_value_t = 2)]
    pub r_max: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SteinArgs {
    #[arg(long = "N")]
    pub big_n: u64,
    #[arg(long)]
    pub z: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SieveCheckArgs {
    #[arg(long, default_value_t = 10_000_000)]
    pub n: u64,
    #[arg(long)]
    pub z: f64,
    /// Explicit tuple, e.g. `2,11`; otherwise every tuple from --max-p/--u-max.
    #[arg(long, value_delimiter = ',')]
    pub primes: Option<Vec<u64>>,
    #[arg(long, default_value_t = 100)]
    pub max_p: u64,
    #[arg(long, default_value_t = 2)]
    pub u_max: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// A sweep JSON file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Normalizer::Theorem)]
    pub normalizer: Normalizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Normalizer {
    /// Center e^{-z} ln ln n, variance (1 - 2z e^{-z}) e^{-z} ln ln n.
    Theorem,
    /// Center c_N, variance s_N^2 of the model at the sweep's cutoff.
    Model,
    /// Keep the stored shift, normalize by the empirical variance.
    Empirical,
}
