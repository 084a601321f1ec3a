use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cdsense", version, about = "Precision bounds for circular-dichroism sensing with lossy quantum probes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-shot variance bounds of every probe at one scenario.
    Bounds(BoundsArgs),
    /// Optimal photon split as a function of the loss-weighted ratio x.
    Ratio(RatioArgs),
    /// Bounds over a (T_L, T_R) grid.
    Sweep(SweepArgs),
    /// Monte-Carlo estimation runs compared with the Cramér–Rao bound.
    Simulate(SimulateArgs),
    /// Run the oracle cross-checks.
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProbeKind {
    Coherent,
    Fock,
    Tmsv,
}

impl std::str::FromStr for ProbeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <ProbeKind as ValueEnum>::from_str(s, true)
    }
}

impl ProbeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProbeKind::Coherent => "coherent",
            ProbeKind::Fock => "fock",
            ProbeKind::Tmsv => "tmsv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RatioMode {
    Classical,
    Uql,
}

impl std::str::FromStr for RatioMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <RatioMode as ValueEnum>::from_str(s, true)
    }
}

impl RatioMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RatioMode::Classical => "classical",
            RatioMode::Uql => "uql",
        }
    }
}

/// Options shared by every data-producing command.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat key = value file; flags take precedence over it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Write CSV here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Transmittance of the left-circular arm.
    #[arg(long)]
    pub tl: Option<f64>,
    /// Transmittance of the right-circular arm.
    #[arg(long)]
    pub tr: Option<f64>,
    /// Excess-loss transmittance for both arms.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub eta_l: Option<f64>,
    #[arg(long)]
    pub eta_r: Option<f64>,
    /// Total mean photon number in the signal modes.
    #[arg(long)]
    pub n_tot: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Fix the left share of the budget for the coherent and UQL rows.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RatioArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum)]
    pub mode: Option<RatioMode>,
    #[arg(long, allow_hyphen_values = true)]
    pub log10_x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub log10_x_max: Option<f64>,
    /// Number of rows.
    #[arg(long)]
    pub grid: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Probe whose photon-counting CR bound fills the cr_pnrd column.
    #[arg(long, value_enum)]
    pub probe: Option<ProbeKind>,
    /// Left share of the budget for the coherent and Fock probes.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Grid points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub grid_min: Option<f64>,
    #[arg(long)]
    pub grid_max: Option<f64>,
    /// Photon-number cutoff for the counting distribution.
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Largest truncated probability mass accepted.
    #[arg(long)]
    pub tail_tol: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum)]
    pub probe: Option<ProbeKind>,
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Shots per estimate.
    #[arg(long)]
    pub nu: Option<usize>,
    /// First seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of consecutive seeds.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Starting grid per axis for the twin-beam likelihood search.
    #[arg(long)]
    pub grid: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}
