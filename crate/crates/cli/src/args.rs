use std::path::PathBuf;

use amite::expansion::ActivationKind;
use amite::ffnn::Activation;
use amite::intervals_tm::Interval;
use amite::rangebound::Method;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "amite",
    version,
    about = "Polynomial expansions of tanh/ReLU, network equivalence tests and range bounds"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write zero runtimes so repeated runs produce identical files.
    #[arg(long, global = true)]
    pub no_timing: bool,
    /// Manifest path (default: `<out>.manifest.json`, or stderr without --out).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute expansion coefficients and write them as exact decimals.
    Expand(ExpandArgs),
    /// Tabulate measured, exact and approximate errors of an expansion.
    Errors(ErrorsArgs),
    /// Test a network under test for equivalence with an original.
    Equiv(EquivArgs),
    /// Bound the output range of a network over an input box.
    Rangebound(RangeArgs),
    /// Generate a population of networks and bound them all.
    Campaign(CampaignArgs),
    /// Write a randomly initialised network.
    GenNet(GenNetArgs),
    /// Write a copy of a network with randomly perturbed weights.
    Perturb(PerturbArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FnArg {
    Tanh,
    Relu,
}

impl From<FnArg> for ActivationKind {
    fn from(f: FnArg) -> Self {
        match f {
            FnArg::Tanh => ActivationKind::Tanh,
            FnArg::Relu => ActivationKind::Relu,
        }
    }
}

impl From<FnArg> for Activation {
    fn from(f: FnArg) -> Self {
        ActivationKind::from(f).into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Amite,
    Taylor,
    Both,
}

impl MethodArg {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Amite => vec![Method::Amite],
            MethodArg::Taylor => vec![Method::Taylor],
            MethodArg::Both => vec![Method::Amite, Method::Taylor],
        }
    }
}

#[derive(Debug, Args)]
pub struct ExpansionArgs {
    #[arg(long = "fn", value_enum)]
    pub kind: FnArg,
    /// Number of terms M.
    #[arg(long)]
    pub terms: u32,
    /// Half-width V of the domain of validity.
    #[arg(long)]
    pub vmax: f64,
    /// Working precision in decimal digits.
    #[arg(long, default_value_t = 450)]
    pub digits: u32,
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    #[command(flatten)]
    pub expansion: ExpansionArgs,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ErrorsArgs {
    #[command(flatten)]
    pub expansion: ExpansionArgs,
    /// Grid points over [-V-span, V+span].
    #[arg(long, default_value_t = 2001)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.5)]
    pub span: f64,
    /// Precision of the H and I evaluations (default: --digits).
    #[arg(long)]
    pub eval_digits: Option<u32>,
    /// CSV output (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EquivArgs {
    /// Network with the expected weights (JSON).
    #[arg(long)]
    pub original: PathBuf,
    /// Network standing in for the implementation under test (JSON).
    #[arg(long)]
    pub under_test: PathBuf,
    /// Measurement SNR in dB (default: noiseless).
    #[arg(long, allow_negative_numbers = true)]
    pub snr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = amite::equivtest::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = 6)]
    pub terms: u32,
    /// Expansion half-width (default: from the original's pre-activations).
    #[arg(long)]
    pub vmax: Option<f64>,
    #[arg(long, default_value_t = 65)]
    pub digits: u32,
    /// Fuzz vectors.
    #[arg(long, default_value_t = 250)]
    pub samples: usize,
    /// Input interval per coordinate, `lo,hi` (default: -1,1).
    #[arg(long = "box", value_parser = parse_interval, allow_hyphen_values = true)]
    pub boxes: Vec<Interval>,
    /// Report file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RangeArgs {
    /// Network to bound (JSON).
    #[arg(long)]
    pub network: PathBuf,
    /// Input interval `lo,hi`, given once per input.
    #[arg(long = "box", value_parser = parse_interval, allow_hyphen_values = true, required_unless_present = "width")]
    pub boxes: Vec<Interval>,
    /// Shorthand for `[-W/2, W/2]` on every input.
    #[arg(long, conflicts_with = "boxes")]
    pub width: Option<f64>,
    #[arg(long, value_enum, default_value_t = MethodArg::Amite)]
    pub method: MethodArg,
    #[command(flatten)]
    pub bounding: BoundingArgs,
    /// Identifier written in the net-id column.
    #[arg(long, default_value = "net")]
    pub id: String,
    /// CSV output (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundingArgs {
    /// Expansion terms M (default: from the hidden width).
    #[arg(long)]
    pub terms: Option<u32>,
    /// Precision in digits (default: from the hidden width).
    #[arg(long)]
    pub digits: Option<u32>,
    /// Initial safety factor S on the observed pre-activation range.
    #[arg(long, default_value_t = 1.25)]
    pub safety: f64,
    /// Polynomial order cap during propagation.
    #[arg(long)]
    pub order_cap: Option<u32>,
    /// Samples behind the numeric range estimate.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    #[arg(long, default_value_t = 3)]
    pub inputs: usize,
    /// Hidden-layer counts.
    #[arg(long, value_delimiter = ',', default_values_t = [3usize, 5])]
    pub layers: Vec<usize>,
    /// Neurons per hidden layer.
    #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10])]
    pub hidden: Vec<usize>,
    /// Networks per architecture.
    #[arg(long, default_value_t = 3)]
    pub nets: usize,
    #[arg(long, value_enum, default_value_t = FnArg::Tanh)]
    pub activation: FnArg,
    /// Input interval widths, each centred on zero.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 1.0, 2.0])]
    pub widths: Vec<f64>,
    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    pub method: MethodArg,
    /// Overrides the (M, digits) schedule; requires --digits.
    #[arg(long, requires = "digits")]
    pub terms: Option<u32>,
    #[arg(long, requires = "terms")]
    pub digits: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenNetArgs {
    #[arg(long)]
    pub inputs: usize,
    /// Hidden layer sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub outputs: usize,
    #[arg(long, value_enum, default_value_t = FnArg::Tanh)]
    pub activation: FnArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long)]
    pub network: PathBuf,
    /// Relative magnitude: each weight is scaled by `1 + u`, `u ~ U[-rel, rel]`.
    #[arg(long, default_value_t = 0.05)]
    pub rel: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `lo,hi` into an interval.
pub fn parse_interval(s: &str) -> Result<Interval, String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected lo,hi but got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound {lo:?}"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound {hi:?}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(format!("need finite lo <= hi, got [{lo}, {hi}]"));
    }
    Ok(Interval::new(lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn intervals_parse() {
        let i = parse_interval("-0.5, 2").unwrap();
        assert_eq!((i.lo, i.hi), (-0.5, 2.0));
        assert!(parse_interval("1").is_err());
        assert!(parse_interval("2,1").is_err());
        assert!(parse_interval("a,1").is_err());
        assert!(parse_interval("0,inf").is_err());
    }
}
