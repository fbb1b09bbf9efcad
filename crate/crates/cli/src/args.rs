use std::path::PathBuf;

use addscreen::datagen::ErrorLaw;
use addscreen::screening::Method;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "addscreen", version, about = "ECDF-correlation screening and partially linear additive fits")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true, env = "ADDSCREEN_THREADS")]
    pub threads: Option<usize>,

    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rank covariates by a marginal utility and write the scores.
    Screen(ScreenArgs),
    /// Screen, fit the doubly penalized spline model, write a JSON report.
    Fit(FitArgs),
    /// Generate a simulated dataset.
    Simulate(SimulateArgs),
    /// Replicated screening (and structure) benchmark.
    Bench(BenchArgs),
    /// Re-render saved benchmark CSVs as text tables.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// CSV with a header row.
    #[arg(long)]
    pub input: PathBuf,

    /// Name of the response column.
    #[arg(long, default_value = "y")]
    pub y_col: String,
}

#[derive(Args, Debug)]
pub struct BasisArgs {
    /// Spline basis functions per covariate.
    #[arg(long, default_value_t = 6)]
    pub k: usize,

    /// Spline order (4 = cubic).
    #[arg(long, default_value_t = 4)]
    pub order: usize,
}

#[derive(Args, Debug)]
pub struct ScreenArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, default_value = "ncrs", value_parser = parse_method)]
    pub method: Method,

    /// Number of covariates to keep (default floor(n / ln n)).
    #[arg(long, conflicts_with = "threshold_c")]
    pub top_d: Option<usize>,

    /// Keep covariates with score >= c * n^(-alpha).
    #[arg(long, requires = "threshold_alpha")]
    pub threshold_c: Option<f64>,

    #[arg(long, requires = "threshold_c")]
    pub threshold_alpha: Option<f64>,

    /// Raw second-moment form of NCRS instead of the sample covariance.
    #[arg(long)]
    pub uncentered: bool,

    #[command(flatten)]
    pub basis: BasisArgs,

    /// Ranked scores CSV.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, default_value = "ncrs", value_parser = parse_method)]
    pub method: Method,

    /// Screened model size (default 2 floor(n / ln n) when n < 100,
    /// otherwise floor(n / ln n)).
    #[arg(long)]
    pub top_d: Option<usize>,

    #[command(flatten)]
    pub basis: BasisArgs,

    /// Single-penalty sparse additive fit (no linear components).
    #[arg(long)]
    pub sam: bool,

    /// Also report the leave-one-out prediction error of the pipeline.
    #[arg(long)]
    pub loocv: bool,

    /// JSON report.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ScenarioArgs {
    /// Simulation design 1-4.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub example: u8,

    #[arg(long)]
    pub n: usize,

    #[arg(long)]
    pub p: usize,

    /// Signal constant (example 1).
    #[arg(long)]
    pub c: Option<f64>,

    /// Noise scale (example 1 default sqrt(6.83); required for example 4).
    #[arg(long)]
    pub sigma: Option<f64>,

    /// Error law: normal, t5 or t1.
    #[arg(long, default_value = "normal", value_parser = parse_error_law)]
    pub error: ErrorLaw,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    #[arg(long, default_value_t = 100)]
    pub reps: usize,

    /// Screening methods to compare (comma separated; default all).
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Vec<Method>,

    /// Coverage threshold for S (default floor(n / ln n)).
    #[arg(long)]
    pub nu: Option<usize>,

    /// Add the single-penalty fit row for structure designs.
    #[arg(long)]
    pub sam: bool,

    #[command(flatten)]
    pub basis: BasisArgs,

    /// Benchmark CSV.
    #[arg(long)]
    pub output: PathBuf,

    /// Also write the text table here (it is always printed).
    #[arg(long)]
    pub text: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Benchmark CSVs written by `bench`.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,

    /// Text output (default stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: addscreen::screening::ScreenError| e.to_string())
}

fn parse_error_law(s: &str) -> Result<ErrorLaw, String> {
    s.parse().map_err(|e: addscreen::datagen::ScenarioError| e.to_string())
}
