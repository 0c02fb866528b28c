//! Experiment harness behind the `powerlap` binary.

pub mod args;
pub mod experiments;
pub mod output;
pub mod synthetic;

use std::time::Instant;

use powerlap::graph::{shift_for_p, IsolatedNodes, MultilayerGraph};
use powerlap::matfree::{negative_integer_power, MatrixFreeConfig, MatrixFreeLp, ShiftedSolver};
use powerlap::powermean::{dense_power_mean_laplacian_with, dense_ssl_solve, LabelingProblem, LabelingResult};
use powerlap::{DMatrix, Error};

use args::{Cli, Command, PathChoice, ShiftedChoice};

pub const WORKERS_ENV: &str = "POWERLAP_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    /// 3 for numerical failures, 2 for everything the user can fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

/// Parse, run, and map the outcome to an exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let pool = worker_pool()?;
    pool.install(|| match cli.command {
        Command::Grid2x2(a) => experiments::grid2x2(a),
        Command::Unbalanced(a) => experiments::unbalanced(a),
        Command::Info3(a) => experiments::info3(a),
        Command::LambdaSweep(a) => experiments::lambda_sweep(a),
        Command::Timing(a) => experiments::timing(a),
        Command::Dataset(a) => experiments::dataset(a),
        Command::Solve(a) => experiments::solve(a),
    })
}

fn worker_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got '{v}'")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Config(e.to_string()))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one run, mixed from the user seed and the run's coordinates.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(seed), |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// `p=-10`, `p=inf`.
pub fn p_label(p: f64) -> String {
    format!("p={p}")
}

/// How each `p` is solved.
#[derive(Debug, Clone)]
pub struct SolverPlan {
    pub path: PathChoice,
    pub dense_limit: usize,
    pub isolated: IsolatedNodes,
    pub matfree: MatrixFreeConfig,
}

impl SolverPlan {
    pub fn new(path: PathChoice, dense_limit: usize, shifted: ShiftedChoice, isolated: IsolatedNodes) -> Self {
        let matfree = MatrixFreeConfig {
            shifted_solver: match shifted {
                ShiftedChoice::Gmres => ShiftedSolver::Gmres,
                ShiftedChoice::Lanczos => ShiftedSolver::Lanczos,
            },
            isolated,
            ..MatrixFreeConfig::default()
        };
        Self {
            path,
            dense_limit,
            isolated,
            matfree,
        }
    }

    pub fn uses_matrix_free(&self, p: f64, n: usize) -> bool {
        let integer = negative_integer_power(p).is_ok();
        match self.path {
            PathChoice::Dense => false,
            PathChoice::MatrixFree => integer,
            PathChoice::Auto => integer && n > self.dense_limit,
        }
    }

    /// Build `L_p` (dense) or its matrix-free operator once per graph and `p`.
    pub fn prepare(&self, graph: &MultilayerGraph, p: f64) -> Result<Prepared, CliError> {
        if self.uses_matrix_free(p, graph.n()) {
            let q = negative_integer_power(p)?;
            return Ok(Prepared::MatrixFree(Box::new(MatrixFreeLp::new(graph, q, &self.matfree)?)));
        }
        if p == f64::NEG_INFINITY {
            return Err(CliError::Config("p = -inf has no finite default shift".into()));
        }
        let l = dense_power_mean_laplacian_with(graph, p, shift_for_p(p), self.isolated)?;
        Ok(Prepared::Dense(l))
    }
}

pub enum Prepared {
    Dense(DMatrix<f64>),
    MatrixFree(Box<MatrixFreeLp>),
}

impl Prepared {
    pub fn path(&self) -> &'static str {
        match self {
            Prepared::Dense(_) => "dense",
            Prepared::MatrixFree(_) => "matrix-free",
        }
    }

    pub fn solve(&self, problem: &LabelingProblem) -> Result<LabelingResult, CliError> {
        Ok(match self {
            Prepared::Dense(l) => dense_ssl_solve(l, problem)?,
            Prepared::MatrixFree(op) => op.solve(problem)?,
        })
    }
}

/// Wall-clock seconds of `f`.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}
