//! The `coas` command line.

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use commands::run;

#[derive(Debug, Parser, Serialize)]
#[command(name = "coas", version, about = "Co-active subspaces and concordance between computer models")]
pub struct Cli {
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true, env = "COAS_THREADS")]
    pub threads: Option<usize>,

    /// Replace existing output files.
    #[arg(long, global = true)]
    pub force: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Fit a hinge-spline surrogate (or a bootstrap ensemble) to data.
    Fit(FitArgs),
    /// Closed-form co-activity matrix for two models, with its analysis.
    Cmat(CmatArgs),
    /// Monte Carlo estimate of the co-activity matrix.
    Mc(McArgs),
    /// Concordance, co-active directions and co-activity scores.
    Analyze(AnalyzeArgs),
    /// Concordance grid, discordance matrix and MDS embedding of ensembles.
    Cluster(ClusterArgs),
    /// Poincaré-type error bound for a projection onto a subspace.
    Bound(BoundArgs),
    /// Run a built-in verification suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Training CSV with a header row.
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    pub data: Option<PathBuf>,
    /// Generate training data from a fixture such as `builtin:poly?beta=3`.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Design size when sampling a fixture.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Response column (default: last).
    #[arg(long)]
    pub response: Option<String>,
    /// Prior JSON; its finite support defines the input box.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    /// Model label (default: output file stem).
    #[arg(long)]
    pub label: Option<String>,
    /// Ensemble size; members after the first are bootstrap refits.
    #[arg(long = "ensemble", default_value_t = 1)]
    pub members: usize,
    #[arg(long, default_value_t = 50)]
    pub max_terms: usize,
    #[arg(long, default_value_t = 3)]
    pub max_degree: usize,
    /// Report k-fold cross-validation error.
    #[arg(long)]
    pub cv: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum MatrixFormat {
    Json,
    Csv,
}

#[derive(Debug, Args, Serialize)]
pub struct CmatArgs {
    /// First model file.
    pub model_k: PathBuf,
    /// Second model file.
    pub model_l: PathBuf,
    #[arg(long)]
    pub prior: PathBuf,
    /// Add the outer product of expected gradients.
    #[arg(long)]
    pub modified: bool,
    /// Also estimate by Monte Carlo with this many samples.
    #[arg(long)]
    pub mc: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = MatrixFormat::Json)]
    pub format: MatrixFormat,
    #[arg(long, default_value = "cmat-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct McArgs {
    /// Model file or fixture such as `builtin:piston?p0=90000&ta=284`.
    pub f_k: String,
    pub f_l: String,
    /// Prior JSON (default: uniform on the function's domain).
    #[arg(long)]
    pub prior: Option<PathBuf>,
    #[arg(long = "samples", short = 'B', default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative finite-difference step for fixtures.
    #[arg(long, default_value_t = crate::montecarlo::DEFAULT_FD_STEP)]
    pub h: f64,
    #[arg(long, default_value = "mc.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Two model files.
    #[arg(num_args = 2, required_unless_present = "matrix")]
    pub models: Vec<PathBuf>,
    #[arg(long, required_unless_present = "matrix")]
    pub prior: Option<PathBuf>,
    /// Use saved matrices instead: `C_kl` JSON ...
    #[arg(long, requires_all = ["self_k", "self_l"])]
    pub matrix: Option<PathBuf>,
    /// ... `C_k` JSON ...
    #[arg(long)]
    pub self_k: Option<PathBuf>,
    /// ... and `C_l` JSON.
    #[arg(long)]
    pub self_l: Option<PathBuf>,
    /// Eigenpairs used for scores: a number or `auto` (needs --tau).
    #[arg(long, default_value = "1")]
    pub q: String,
    /// Eigenvalue magnitude threshold for choosing the dimension.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value = "analysis.json")]
    pub out: PathBuf,
    /// Also write per-input activity ratios as CSV.
    #[arg(long)]
    pub ratio: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ClusterArgs {
    /// Model or ensemble files, one per model.
    #[arg(required = true, num_args = 2..)]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub prior: PathBuf,
    /// Compute only traces for member pairs.
    #[arg(long)]
    pub trace_only: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "cluster-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BoundArgs {
    /// Model file (first member is used).
    pub model: PathBuf,
    #[arg(long)]
    pub prior: PathBuf,
    /// CSV basis, one column per direction, in native coordinates.
    #[arg(long, conflicts_with = "rank", required_unless_present = "rank")]
    pub basis: Option<PathBuf>,
    /// Use the leading active directions in whitened coordinates.
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// `poly`, `piston` or `metric`.
    pub fixture: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
