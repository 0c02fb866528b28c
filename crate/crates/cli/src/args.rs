//! Command-line surface. The argument structs double as experiment configs
//! and are serialized into the JSON sidecar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "powerlap", version, about = "Semi-supervised learning on multilayer graphs with the power mean Laplacian")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two-layer SBM sweep: layer-2 informativeness × label fraction.
    Grid2x2(GridArgs),
    /// Two-class SBM with unequal label counts, uniform vs weighted loss.
    Unbalanced(UnbalancedArgs),
    /// Three layers, each informative of one class only.
    Info3(Info3Args),
    /// Effect of λ on the two-layer SBM.
    LambdaSweep(LambdaArgs),
    /// Matrix-free wall time against graph size.
    Timing(TimingArgs),
    /// Layers and feature views from files, repeated label samples.
    Dataset(DatasetArgs),
    /// One solve on user files; writes predictions.
    Solve(SolveArgs),
}

/// Which solver to run for each `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PathChoice {
    /// Matrix-free for negative integer `p` on graphs above `--dense-limit`
    /// nodes, dense otherwise.
    #[default]
    Auto,
    Dense,
    /// Matrix-free wherever `p` is a negative integer; other `p` fall back to
    /// dense.
    MatrixFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftedChoice {
    #[default]
    Gmres,
    Lanczos,
}

/// Accepts reals and `inf`, `+inf`, `-inf`.
pub fn parse_p(s: &str) -> Result<f64, String> {
    let v = match s.trim() {
        "inf" | "+inf" | "Inf" | "+Inf" => f64::INFINITY,
        "-inf" | "-Inf" => f64::NEG_INFINITY,
        t => t.parse::<f64>().map_err(|e| format!("invalid p '{s}': {e}"))?,
    };
    if v.is_nan() {
        return Err("p must not be NaN".into());
    }
    Ok(v)
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("invalid fraction '{s}': {e}"))?;
    if !(v > 0.0 && v <= 1.0) {
        return Err(format!("fraction {v} outside (0, 1]"));
    }
    Ok(v)
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("invalid number '{s}': {e}"))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(format!("{v} must be positive and finite"));
    }
    Ok(v)
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("invalid probability '{s}': {e}"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("probability {v} outside [0, 1]"));
    }
    Ok(v)
}

/// Comma-separated values; an empty string is an empty list.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct List<T>(pub Vec<T>);

impl<T> std::ops::Deref for List<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<List<T>, String> {
    if s.trim().is_empty() {
        return Ok(List(Vec::new()));
    }
    s.split(',').map(|t| item(t.trim())).collect::<Result<_, _>>().map(List)
}

fn real(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("invalid number '{s}': {e}"))?;
    if !v.is_finite() {
        return Err(format!("{v} is not finite"));
    }
    Ok(v)
}

fn real_list(s: &str) -> Result<List<f64>, String> {
    parse_list(s, real)
}

fn fraction_list(s: &str) -> Result<List<f64>, String> {
    parse_list(s, parse_fraction)
}

fn positive_list(s: &str) -> Result<List<f64>, String> {
    parse_list(s, parse_positive)
}

fn count_list(s: &str) -> Result<List<usize>, String> {
    parse_list(s, |t| t.parse::<usize>().map_err(|e| format!("invalid count '{t}': {e}")))
}

/// Options every experiment shares.
#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Power of the mean; repeat for several.
    #[arg(long = "p", value_parser = parse_p, allow_hyphen_values = true, num_args = 1)]
    pub p: Vec<f64>,
    /// Regularization weight.
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub lambda: f64,
    /// Random graphs per cell [default: 4; info3 and lambda-sweep: 5].
    #[arg(long)]
    pub reps: Option<usize>,
    /// Label samples per graph [default: 5].
    #[arg(long)]
    pub label_samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination; a `.json` sidecar is written next to it. Stdout when
    /// absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "path", value_enum, default_value_t = PathChoice::Auto)]
    pub path: PathChoice,
    /// Shorthand for `--path matrix-free`.
    #[arg(long, conflicts_with_all = ["dense", "path"])]
    pub matrix_free: bool,
    /// Shorthand for `--path dense`.
    #[arg(long, conflicts_with = "path")]
    pub dense: bool,
    /// Node count above which `--path auto` goes matrix-free.
    #[arg(long, default_value_t = 2000)]
    pub dense_limit: usize,
    #[arg(long, value_enum, default_value_t = ShiftedChoice::Gmres)]
    pub shifted_solver: ShiftedChoice,
}

impl CommonArgs {
    pub fn path_choice(&self) -> PathChoice {
        if self.matrix_free {
            PathChoice::MatrixFree
        } else if self.dense {
            PathChoice::Dense
        } else {
            self.path
        }
    }

    pub fn ps_or(&self, default: &[f64]) -> Vec<f64> {
        if self.p.is_empty() {
            default.to_vec()
        } else {
            self.p.clone()
        }
    }

    /// Fill unset `p` values and repetition counts with the experiment's
    /// defaults, so the sidecar records what actually ran.
    pub fn resolve(&mut self, ps: &[f64], reps: usize, label_samples: usize) {
        if self.p.is_empty() {
            self.p = ps.to_vec();
        }
        self.reps.get_or_insert(reps);
        self.label_samples.get_or_insert(label_samples);
    }

    pub fn graphs(&self) -> usize {
        self.reps.unwrap_or(4)
    }

    pub fn samples(&self) -> usize {
        self.label_samples.unwrap_or(5)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 100)]
    pub cluster_size: usize,
    /// `p_in − p_out` of layer 1.
    #[arg(long, default_value_t = 0.08, allow_hyphen_values = true)]
    pub gap1: f64,
    /// `p_in − p_out` values swept on layer 2 (comma separated).
    #[arg(long, value_parser = real_list, allow_hyphen_values = true, default_value = "-0.08,-0.04,0,0.04,0.08")]
    pub gaps: List<f64>,
    /// `p_in + p_out` of both layers.
    #[arg(long, default_value_t = 0.1)]
    pub density: f64,
    /// Fractions of labeled nodes per class (comma separated).
    #[arg(long = "labels", value_parser = fraction_list, default_value = "0.01,0.05,0.1,0.15,0.25")]
    pub label_fractions: List<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct UnbalancedArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 100)]
    pub cluster_size: usize,
    /// Total labeled nodes `n1 + n2`.
    #[arg(long, default_value_t = 50)]
    pub total: usize,
    /// Labeled nodes of class 1 (comma separated); class 2 gets the rest.
    #[arg(long, value_parser = count_list, default_value = "1,5,10,15,20,25,30,35,40,45,49")]
    pub n1: List<usize>,
    #[arg(long, default_value_t = 0.08, allow_hyphen_values = true)]
    pub gap1: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub gap2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub density: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Info3Args {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 100)]
    pub cluster_size: usize,
    /// `p_in − p_out` values (comma separated).
    #[arg(long, value_parser = real_list, allow_hyphen_values = true, default_value = "0.03,0.05,0.08,0.1")]
    pub gaps: List<f64>,
    /// `p_in + p_out`.
    #[arg(long, default_value_t = 0.1)]
    pub density: f64,
    #[arg(long = "labels", value_parser = fraction_list, default_value = "0.05,0.1,0.2")]
    pub label_fractions: List<f64>,
    /// Skip the single-layer baselines.
    #[arg(long)]
    pub joint_only: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LambdaArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 100)]
    pub cluster_size: usize,
    #[arg(long, default_value_t = 0.08, allow_hyphen_values = true)]
    pub gap1: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub gap2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub density: f64,
    /// λ values (comma separated); `--lambda` is ignored.
    #[arg(long, value_parser = positive_list, default_value = "0.001,0.01,0.1,1,10,100,1000")]
    pub lambdas: List<f64>,
    #[arg(long = "labels", value_parser = fraction_list, default_value = "0.01,0.05,0.1,0.2,0.3,0.4,0.5")]
    pub label_fractions: List<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TimingArgs {
    /// Node counts (comma separated).
    #[arg(long, value_parser = count_list, default_value = "5000,10000,20000,40000")]
    pub sizes: List<usize>,
    /// Timed runs per size.
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    /// Negative integer power.
    #[arg(long = "p", default_value_t = -1, allow_hyphen_values = true)]
    pub p: i32,
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub lambda: f64,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    /// Expected degree; `p_in : p_out` stays at `--ratio`.
    #[arg(long, default_value_t = 20.0, value_parser = parse_positive)]
    pub degree: f64,
    #[arg(long, default_value_t = 2.0, value_parser = parse_positive)]
    pub ratio: f64,
    /// Fixed `p_in` instead of a fixed degree (needs `--p-out`).
    #[arg(long, requires = "p_out", value_parser = parse_probability)]
    pub p_in: Option<f64>,
    #[arg(long, requires = "p_in", value_parser = parse_probability)]
    pub p_out: Option<f64>,
    #[arg(long = "labels", default_value_t = 0.1, value_parser = parse_fraction)]
    pub label_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ShiftedChoice::Lanczos)]
    pub shifted_solver: ShiftedChoice,
}

/// Graph inputs shared by `dataset` and `solve`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct GraphFiles {
    /// Adjacency layer in Matrix Market format; repeatable.
    #[arg(long = "layer")]
    pub layers: Vec<PathBuf>,
    /// Feature CSV, one row per node; each becomes a kNN layer. Repeatable.
    #[arg(long = "features")]
    pub features: Vec<PathBuf>,
    /// Neighbours per node for feature layers.
    #[arg(long, default_value_t = 10)]
    pub knn: usize,
    /// Give isolated nodes a self-loop instead of failing.
    #[arg(long)]
    pub self_loops: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DatasetArgs {
    #[command(flatten)]
    pub graph: GraphFiles,
    /// Ground truth `node_id,class` (classes 1-based).
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long = "p", value_parser = parse_p, allow_hyphen_values = true, num_args = 1)]
    pub p: Vec<f64>,
    /// λ for every `p`; default 0.1 for `p = 1` and 10 otherwise.
    #[arg(long, value_parser = parse_positive)]
    pub lambda: Option<f64>,
    #[arg(long = "labels", value_parser = fraction_list, default_value = "0.01,0.05,0.1,0.15,0.2,0.25")]
    pub label_fractions: List<f64>,
    /// Label samples per fraction.
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "path", value_enum, default_value_t = PathChoice::Auto)]
    pub path: PathChoice,
    #[arg(long, default_value_t = 2000)]
    pub dense_limit: usize,
    #[arg(long, value_enum, default_value_t = ShiftedChoice::Gmres)]
    pub shifted_solver: ShiftedChoice,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub graph: GraphFiles,
    /// Known labels `node_id,class`; other nodes are predicted.
    #[arg(long = "labels")]
    pub labels: PathBuf,
    /// Full ground truth, to report the test error.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long = "p", default_value_t = -1.0, value_parser = parse_p, allow_hyphen_values = true)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub lambda: f64,
    /// Weight labeled nodes by `n / n_r`.
    #[arg(long)]
    pub weighted: bool,
    /// Predictions CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "path", value_enum, default_value_t = PathChoice::Auto)]
    pub path: PathChoice,
    #[arg(long, default_value_t = 2000)]
    pub dense_limit: usize,
    #[arg(long, value_enum, default_value_t = ShiftedChoice::Gmres)]
    pub shifted_solver: ShiftedChoice,
}
