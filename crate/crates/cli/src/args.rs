use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "ningarch", version, about = "Fit and diagnose neural INGARCH models for count time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Rank candidate orders (p, q) of the degenerate model by AIC and BIC.
    SelectOrder(SelectOrderArgs),
    /// Compare hidden-layer sizes of the neural model.
    SelectHidden(SelectHiddenArgs),
    /// Fit one model and persist the result.
    Fit(FitArgs),
    /// Residual, marginal-effect and zero-state diagnostics for a saved fit.
    Diagnose(DiagnoseArgs),
    /// Simulate count series from a saved fit or a specified model.
    Simulate(SimulateArgs),
    /// Render a text summary of a saved fit.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SelectOrder(_) => "select-order",
            Command::SelectHidden(_) => "select-hidden",
            Command::Fit(_) => "fit",
            Command::Diagnose(_) => "diagnose",
            Command::Simulate(_) => "simulate",
            Command::Report(_) => "report",
        }
    }

    pub fn out_dir(&self) -> &PathBuf {
        match self {
            Command::SelectOrder(a) => &a.out.out,
            Command::SelectHidden(a) => &a.out.out,
            Command::Fit(a) => &a.out.out,
            Command::Diagnose(a) => &a.out.out,
            Command::Simulate(a) => &a.out.out,
            Command::Report(a) => &a.out.out,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Delimited text file (comma or tab) with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long = "count-col", default_value = "y")]
    pub count_col: String,
    /// Upper bound n of the counts (required for binomial families unless
    /// the file declares `# bound=n`).
    #[arg(long)]
    pub bound: Option<u64>,
    /// Covariate columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    #[arg(long = "scale-covariates", value_enum, default_value_t = ScaleArg::Unit)]
    pub scale_covariates: ScaleArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleArg {
    /// Min-max scaling to [0, 1].
    Unit,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Poisson,
    Genpois,
    Binomial,
    Zib,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseArg {
    Neural,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputArg {
    Softplus,
    Logistic,
    Identity,
}

/// Hidden-layer sizes: `3`, `1-7` or `1,2,4`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct HiddenSizes(pub Vec<usize>);

impl FromStr for HiddenSizes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("invalid hidden-layer sizes '{s}' (use 3, 1-7 or 1,2,4)");
        let sizes: Vec<usize> = if let Some((lo, hi)) = s.split_once('-') {
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi.trim().parse().map_err(|_| bad())?;
            (lo..=hi).collect()
        } else {
            s.split(',')
                .map(|v| v.trim().parse().map_err(|_| bad()))
                .collect::<Result<_, _>>()?
        };
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(bad());
        }
        Ok(HiddenSizes(sizes))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub q: usize,
    #[arg(long, value_enum, default_value_t = FamilyArg::Poisson)]
    pub family: FamilyArg,
    #[arg(long, value_enum, default_value_t = ResponseArg::Degenerate)]
    pub response: ResponseArg,
    /// Hidden units of the neural response.
    #[arg(long)]
    pub hidden: Option<HiddenSizes>,
    /// Output activation; defaults to softplus for unbounded and logistic
    /// for bounded counts.
    #[arg(long, value_enum)]
    pub output: Option<OutputArg>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitOptionArgs {
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "max-iter", default_value_t = 2000)]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = "ningarch-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignmentArg {
    /// All candidates condition on the largest p.
    Common,
    /// Each candidate uses its own sample.
    Own,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelectOrderArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Candidate orders as `p:q` pairs, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "max_order")]
    pub orders: Vec<String>,
    /// All orders with p >= 1 and p + q <= N.
    #[arg(long = "max-order")]
    pub max_order: Option<usize>,
    #[arg(long, value_enum, default_value_t = AlignmentArg::Common)]
    pub alignment: AlignmentArg,
    #[command(flatten)]
    pub fit: FitOptionArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelectHiddenArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fit sizes above the rule-of-thumb cap.
    #[arg(long = "allow-over-cap")]
    pub allow_over_cap: bool,
    #[command(flatten)]
    pub fit: FitOptionArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitOptionArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiagnoseArgs {
    /// Series the fit was estimated on.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long = "count-col", default_value = "y")]
    pub count_col: String,
    /// Saved fit file.
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long = "max-lag", default_value_t = 2)]
    pub max_lag: usize,
    /// Pointwise confidence level of the bands.
    #[arg(long, default_value_t = 0.9)]
    pub level: f64,
    /// Inputs to trace marginal-effect curves for (e.g. `y[t-1]`).
    #[arg(long = "effect")]
    pub effects: Vec<String>,
    /// Grid `lo:hi:step` for the effect curves; defaults to the sample range.
    #[arg(long)]
    pub grid: Option<String>,
    /// Override a context input, `name=value` (repeatable).
    #[arg(long = "at")]
    pub at: Vec<String>,
    /// Fail instead of adding a ridge when the Hessian is not positive definite.
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Simulate from the estimates in a saved fit.
    #[arg(long, conflicts_with = "params")]
    pub fit: Option<PathBuf>,
    /// Parameter vector (weights then auxiliary), comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Vec<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Upper bound n for binomial families.
    #[arg(long)]
    pub bound: Option<u64>,
    /// File holding covariate paths of length burn-in + length.
    #[arg(long = "covariate-data")]
    pub covariate_data: Option<PathBuf>,
    #[arg(long = "count-col", default_value = "y")]
    pub count_col: String,
    #[arg(long)]
    pub length: usize,
    #[arg(long = "burn-in", default_value_t = 500)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub replications: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub fit: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}
