//! The experiment subcommands. Sampled experiments share one engine: graphs
//! are drawn per parameter group, every `p` reuses the same graphs and label
//! samples, and `L_p` is built once per graph and `p`.

use std::collections::HashMap;

use rayon::prelude::*;

use powerlap::graph::{load_layers, read_known_labels, read_labels, IsolatedNodes, MultilayerGraph};
use powerlap::matfree::MatrixFreeLp;
use powerlap::msbm::{sample_info_independent, sample_labels, sample_msbm, LabelBudget, LayerProbs, MsbmParams};
use powerlap::powermean::LabelingProblem;

use crate::args::{
    CommonArgs, DatasetArgs, GraphFiles, GridArgs, Info3Args, LambdaArgs, PathChoice, SolveArgs, TimingArgs,
    UnbalancedArgs,
};
use crate::output::{emit, write_file, ResultRow, ResultTable};
use crate::{derive_seed, p_label, timed, CliError, Prepared, SolverPlan};

const DEFAULT_PS: [f64; 5] = [-10.0, -1.0, 0.0, 1.0, 10.0];

const DATASET_PS: [f64; 3] = [1.0, -1.0, -10.0];

type Coords = Vec<(String, String)>;

fn coord(name: &str, value: impl ToString) -> (String, String) {
    (name.to_string(), value.to_string())
}

/// `p_in` and `p_out` from their difference and sum.
fn probs_from_gap(gap: f64, density: f64) -> Result<LayerProbs, CliError> {
    let p_in = (density + gap) / 2.0;
    let p_out = (density - gap) / 2.0;
    for v in [p_in, p_out] {
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::Config(format!(
                "gap {gap} with density {density} gives p_in = {p_in}, p_out = {p_out}, outside [0, 1]"
            )));
        }
    }
    Ok(LayerProbs::new(p_in, p_out))
}

enum GraphSource {
    Msbm(MsbmParams),
    InfoIndependent { probs: LayerProbs, cluster_size: usize },
    Fixed(MultilayerGraph),
}

impl GraphSource {
    fn graph(&self, seed: u64) -> Result<MultilayerGraph, CliError> {
        Ok(match self {
            GraphSource::Msbm(params) => sample_msbm(params, seed)?,
            GraphSource::InfoIndependent { probs, cluster_size } => {
                sample_info_independent(probs.p_in, probs.p_out, *cluster_size, seed)?
            }
            GraphSource::Fixed(g) => g.clone(),
        })
    }
}

struct Group {
    coords: Coords,
    source: GraphSource,
    truth: Vec<usize>,
}

struct Budget {
    coords: Coords,
    budget: LabelBudget,
}

struct Method {
    name: String,
    coords: Coords,
    p: f64,
    lambda: f64,
    /// Restrict to these layers; all when `None`.
    layers: Option<Vec<usize>>,
    weighted: bool,
}

struct Sweep {
    coord_names: Vec<&'static str>,
    groups: Vec<Group>,
    budgets: Vec<Budget>,
    methods: Vec<Method>,
    graphs: usize,
    samples: usize,
    seed: u64,
    plan: SolverPlan,
}

/// Errors of one graph: `[budget][method]`, label samples in order.
struct UnitResult {
    errors: Vec<Vec<Vec<f64>>>,
    paths: Vec<&'static str>,
}

impl Sweep {
    fn run(&self) -> Result<ResultTable, CliError> {
        let mut table = ResultTable::new(&self.coord_names);
        if self.groups.is_empty() || self.budgets.is_empty() || self.methods.is_empty() {
            return Ok(table);
        }
        let units: Vec<(usize, usize)> = (0..self.groups.len())
            .flat_map(|gi| (0..self.graphs).map(move |g| (gi, g)))
            .collect();
        let results: Vec<UnitResult> = units
            .par_iter()
            .map(|&(gi, g)| self.unit(gi, g))
            .collect::<Result<_, _>>()?;

        for (gi, group) in self.groups.iter().enumerate() {
            let unit_results = &results[gi * self.graphs..(gi + 1) * self.graphs];
            for (bi, budget) in self.budgets.iter().enumerate() {
                let sizes = class_sizes(&group.truth);
                let feasible = budget.budget.counts(&sizes);
                for (mi, method) in self.methods.iter().enumerate() {
                    let mut coords = group.coords.clone();
                    coords.extend(budget.coords.iter().cloned());
                    coords.extend(method.coords.iter().cloned());
                    if let Err(e) = &feasible {
                        eprintln!("warning: skipping {coords:?}: {e}");
                        table
                            .rows
                            .push(ResultRow::new(coords, &method.name, "skipped").with_note(format!("infeasible budget: {e}")));
                        continue;
                    }
                    let mut row = ResultRow::new(coords, &method.name, unit_results[0].paths[mi]);
                    for u in unit_results {
                        row.errors.extend_from_slice(&u.errors[bi][mi]);
                    }
                    if row.errors.is_empty() {
                        row.note = "no unlabeled nodes; test error undefined".into();
                    }
                    table.rows.push(row);
                }
            }
        }
        Ok(table)
    }

    fn unit(&self, gi: usize, g: usize) -> Result<UnitResult, CliError> {
        let group = &self.groups[gi];
        let graph = group.source.graph(derive_seed(self.seed, &[1, gi as u64, g as u64]))?;
        let k = group.truth.iter().max().map_or(0, |m| m + 1);

        let mut cache: HashMap<(u64, Option<Vec<usize>>), usize> = HashMap::new();
        let mut prepared: Vec<Prepared> = Vec::new();
        let mut slot = Vec::with_capacity(self.methods.len());
        for m in &self.methods {
            let key = (m.p.to_bits(), m.layers.clone());
            let idx = match cache.get(&key) {
                Some(&i) => i,
                None => {
                    let sub = match &m.layers {
                        Some(which) => graph.select_layers(which)?,
                        None => graph.clone(),
                    };
                    prepared.push(self.plan.prepare(&sub, m.p)?);
                    cache.insert(key, prepared.len() - 1);
                    prepared.len() - 1
                }
            };
            slot.push(idx);
        }

        let sizes = class_sizes(&group.truth);
        let mut errors = Vec::with_capacity(self.budgets.len());
        for (bi, budget) in self.budgets.iter().enumerate() {
            let mut per_method = vec![Vec::with_capacity(self.samples); self.methods.len()];
            if budget.budget.counts(&sizes).is_ok() {
                for l in 0..self.samples {
                    let seed = derive_seed(self.seed, &[2, gi as u64, bi as u64, g as u64, l as u64]);
                    let mask = sample_labels(&group.truth, &budget.budget, seed)?;
                    for (mi, m) in self.methods.iter().enumerate() {
                        let mut problem = LabelingProblem::from_mask(&group.truth, &mask, k, m.lambda, m.p)?;
                        if m.weighted {
                            problem = problem.with_class_balanced_cost()?;
                        }
                        if let Some(e) = prepared[slot[mi]].solve(&problem)?.test_error {
                            per_method[mi].push(e);
                        }
                    }
                }
            }
            errors.push(per_method);
        }
        Ok(UnitResult {
            errors,
            paths: slot.iter().map(|&i| prepared[i].path()).collect(),
        })
    }
}

fn class_sizes(truth: &[usize]) -> Vec<usize> {
    let k = truth.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0; k];
    truth.iter().for_each(|&c| sizes[c] += 1);
    sizes
}

fn check_reps(graphs: usize, samples: usize) -> Result<(), CliError> {
    if graphs == 0 || samples == 0 {
        return Err(CliError::Config("--reps and --label-samples must be at least 1".into()));
    }
    Ok(())
}

fn sampled_plan(common: &CommonArgs) -> SolverPlan {
    // isolated nodes in sparse random layers are expected, not an input error
    SolverPlan::new(common.path_choice(), common.dense_limit, common.shifted_solver, IsolatedNodes::SelfLoop)
}

fn p_methods(ps: &[f64], lambda: f64) -> Vec<Method> {
    ps.iter()
        .map(|&p| Method {
            name: p_label(p),
            coords: Vec::new(),
            p,
            lambda,
            layers: None,
            weighted: false,
        })
        .collect()
}

fn fraction_budgets(fractions: &[f64]) -> Vec<Budget> {
    fractions
        .iter()
        .map(|&f| Budget {
            coords: vec![coord("label_fraction", f)],
            budget: LabelBudget::Fraction(f),
        })
        .collect()
}

fn two_layer_params(cluster_size: usize, first: LayerProbs, second: LayerProbs) -> Result<MsbmParams, CliError> {
    Ok(MsbmParams::new(2, cluster_size, vec![first, second])?)
}

pub fn run_grid2x2(a: &GridArgs) -> Result<ResultTable, CliError> {
    let c = &a.common;
    check_reps(c.graphs(), c.samples())?;
    let first = probs_from_gap(a.gap1, a.density)?;
    let groups = a
        .gaps
        .iter()
        .map(|&gap| {
            let params = two_layer_params(a.cluster_size, first, probs_from_gap(gap, a.density)?)?;
            Ok(Group {
                coords: vec![coord("gap2", gap)],
                truth: params.truth(),
                source: GraphSource::Msbm(params),
            })
        })
        .collect::<Result<_, CliError>>()?;
    Sweep {
        coord_names: vec!["gap2", "label_fraction"],
        groups,
        budgets: fraction_budgets(&a.label_fractions),
        methods: p_methods(&c.ps_or(&DEFAULT_PS), c.lambda),
        graphs: c.graphs(),
        samples: c.samples(),
        seed: c.seed,
        plan: sampled_plan(c),
    }
    .run()
}

pub fn run_unbalanced(a: &UnbalancedArgs) -> Result<ResultTable, CliError> {
    let c = &a.common;
    check_reps(c.graphs(), c.samples())?;
    let params = two_layer_params(
        a.cluster_size,
        probs_from_gap(a.gap1, a.density)?,
        probs_from_gap(a.gap2, a.density)?,
    )?;
    let budgets = a
        .n1
        .iter()
        .map(|&n1| {
            let n2 = a.total.saturating_sub(n1);
            Budget {
                coords: vec![coord("n1", n1), coord("n2", n2)],
                budget: LabelBudget::Counts(vec![n1, n2]),
            }
        })
        .collect();
    let mut methods = Vec::new();
    for p in c.ps_or(&DEFAULT_PS) {
        for weighted in [false, true] {
            let loss = if weighted { "weighted" } else { "uniform" };
            methods.push(Method {
                name: p_label(p),
                coords: vec![coord("loss", loss)],
                p,
                lambda: c.lambda,
                layers: None,
                weighted,
            });
        }
    }
    Sweep {
        coord_names: vec!["n1", "n2", "loss"],
        groups: vec![Group {
            coords: Vec::new(),
            truth: params.truth(),
            source: GraphSource::Msbm(params),
        }],
        budgets,
        methods,
        graphs: c.graphs(),
        samples: c.samples(),
        seed: c.seed,
        plan: sampled_plan(c),
    }
    .run()
}

pub fn run_info3(a: &Info3Args) -> Result<ResultTable, CliError> {
    let c = &a.common;
    check_reps(c.graphs(), c.samples())?;
    let groups = a
        .gaps
        .iter()
        .map(|&gap| {
            let probs = probs_from_gap(gap, a.density)?;
            let params = MsbmParams::new(3, a.cluster_size, vec![probs; 3])?;
            Ok(Group {
                coords: vec![coord("gap", gap)],
                truth: params.truth(),
                source: GraphSource::InfoIndependent {
                    probs,
                    cluster_size: a.cluster_size,
                },
            })
        })
        .collect::<Result<_, CliError>>()?;
    let mut methods = p_methods(&c.ps_or(&DEFAULT_PS), c.lambda);
    if !a.joint_only {
        // one layer alone: L_p is its normalized Laplacian for any p > 0
        for t in 0..3 {
            methods.push(Method {
                name: format!("layer_{}", t + 1),
                coords: Vec::new(),
                p: 1.0,
                lambda: c.lambda,
                layers: Some(vec![t]),
                weighted: false,
            });
        }
    }
    Sweep {
        coord_names: vec!["gap", "label_fraction"],
        groups,
        budgets: fraction_budgets(&a.label_fractions),
        methods,
        graphs: c.graphs(),
        samples: c.samples(),
        seed: c.seed,
        plan: sampled_plan(c),
    }
    .run()
}

pub fn run_lambda_sweep(a: &LambdaArgs) -> Result<ResultTable, CliError> {
    let c = &a.common;
    check_reps(c.graphs(), c.samples())?;
    let params = two_layer_params(
        a.cluster_size,
        probs_from_gap(a.gap1, a.density)?,
        probs_from_gap(a.gap2, a.density)?,
    )?;
    let mut methods = Vec::new();
    for &lambda in a.lambdas.iter() {
        for p in c.ps_or(&DEFAULT_PS) {
            methods.push(Method {
                name: p_label(p),
                coords: vec![coord("lambda", lambda)],
                p,
                lambda,
                layers: None,
                weighted: false,
            });
        }
    }
    Sweep {
        coord_names: vec!["label_fraction", "lambda"],
        groups: vec![Group {
            coords: Vec::new(),
            truth: params.truth(),
            source: GraphSource::Msbm(params),
        }],
        budgets: fraction_budgets(&a.label_fractions),
        methods,
        graphs: c.graphs(),
        samples: c.samples(),
        seed: c.seed,
        plan: sampled_plan(c),
    }
    .run()
}

/// Wall time of setup plus solve on the matrix-free path, per size.
pub fn run_timing(a: &TimingArgs) -> Result<ResultTable, CliError> {
    if a.reps == 0 {
        return Err(CliError::Config("--reps must be at least 1".into()));
    }
    if a.layers == 0 {
        return Err(CliError::Config("--layers must be at least 1".into()));
    }
    let plan = SolverPlan::new(PathChoice::MatrixFree, 0, a.shifted_solver, IsolatedNodes::SelfLoop);
    let p = f64::from(a.p);
    if !plan.uses_matrix_free(p, 0) {
        return Err(CliError::Config(format!("timing needs a negative integer p, got {}", a.p)));
    }
    let mut table = ResultTable::new(&["n", "p_in", "p_out"]).timed();
    for (si, &n) in a.sizes.iter().enumerate() {
        if n % 2 != 0 || n < 4 {
            return Err(CliError::Config(format!("size {n} must be even and at least 4 (two equal classes)")));
        }
        let size = n / 2;
        let (p_in, p_out) = match (a.p_in, a.p_out) {
            (Some(i), Some(o)) => (i, o),
            _ => {
                let p_out = a.degree / (size as f64 * (a.ratio + 1.0));
                (a.ratio * p_out, p_out)
            }
        };
        let params = MsbmParams::new(2, size, vec![LayerProbs::new(p_in, p_out); a.layers])?;
        let truth = params.truth();
        let mut row = ResultRow::new(
            vec![coord("n", n), coord("p_in", p_in), coord("p_out", p_out)],
            p_label(p),
            "matrix-free",
        );
        for r in 0..a.reps {
            let graph = sample_msbm(&params, derive_seed(a.seed, &[1, si as u64, r as u64]))?;
            let mask = sample_labels(
                &truth,
                &LabelBudget::Fraction(a.label_fraction),
                derive_seed(a.seed, &[2, si as u64, r as u64]),
            )?;
            let problem = LabelingProblem::from_mask(&truth, &mask, 2, a.lambda, p)?;
            let (result, secs) = timed(|| MatrixFreeLp::new(&graph, a.p, &plan.matfree)?.solve(&problem));
            let result = result?;
            eprintln!("n = {n}, run {}: {secs:.2} s", r + 1);
            row.runtimes.push(secs);
            if let Some(e) = result.test_error {
                row.errors.push(e);
            }
        }
        table.rows.push(row);
    }
    Ok(table)
}

fn load_graph(files: &GraphFiles) -> Result<MultilayerGraph, CliError> {
    Ok(load_layers(&files.layers, &files.features, files.knn)?)
}

fn isolated_policy(files: &GraphFiles) -> IsolatedNodes {
    if files.self_loops {
        IsolatedNodes::SelfLoop
    } else {
        IsolatedNodes::Error
    }
}

/// λ = 0.1 for `p = 1` and 10 otherwise, unless fixed.
fn dataset_lambda(fixed: Option<f64>, p: f64) -> f64 {
    fixed.unwrap_or(if p == 1.0 { 0.1 } else { 10.0 })
}

pub fn run_dataset(a: &DatasetArgs) -> Result<ResultTable, CliError> {
    if a.reps == 0 {
        return Err(CliError::Config("--reps must be at least 1".into()));
    }
    let graph = load_graph(&a.graph)?;
    let truth = read_labels(&a.truth, graph.n())?;
    let ps = if a.p.is_empty() { DATASET_PS.to_vec() } else { a.p.clone() };
    let methods = ps
        .iter()
        .map(|&p| {
            let lambda = dataset_lambda(a.lambda, p);
            Method {
                name: p_label(p),
                coords: vec![coord("lambda", lambda)],
                p,
                lambda,
                layers: None,
                weighted: false,
            }
        })
        .collect();
    Sweep {
        coord_names: vec!["label_fraction", "lambda"],
        groups: vec![Group {
            coords: Vec::new(),
            truth,
            source: GraphSource::Fixed(graph),
        }],
        budgets: fraction_budgets(&a.label_fractions),
        methods,
        graphs: 1,
        samples: a.reps,
        seed: a.seed,
        plan: SolverPlan::new(a.path, a.dense_limit, a.shifted_solver, isolated_policy(&a.graph)),
    }
    .run()
}

/// Predictions for every node: `node_id,class,labeled,score_1..score_k`.
pub struct Predictions {
    pub table: Vec<u8>,
    pub test_error: Option<f64>,
    pub path: &'static str,
}

pub fn run_solve(a: &SolveArgs) -> Result<Predictions, CliError> {
    let graph = load_graph(&a.graph)?;
    let n = graph.n();
    let labels = read_known_labels(&a.labels, n)?;
    let truth = a.truth.as_deref().map(|t| read_labels(t, n)).transpose()?;
    let k = labels
        .iter()
        .flatten()
        .chain(truth.iter().flatten())
        .max()
        .map_or(0, |m| m + 1);
    let mut problem = LabelingProblem::new(labels, k, a.lambda, a.p)?;
    if let Some(t) = truth {
        problem = problem.with_truth(t)?;
    }
    if a.weighted {
        problem = problem.with_class_balanced_cost()?;
    }
    let plan = SolverPlan::new(a.path, a.dense_limit, a.shifted_solver, isolated_policy(&a.graph));
    let prepared = plan.prepare(&graph, a.p)?;
    let result = prepared.solve(&problem)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["node_id".to_string(), "class".into(), "labeled".into()];
    header.extend((1..=k).map(|r| format!("score_{r}")));
    w.write_record(&header)?;
    for i in 0..n {
        let mut rec = vec![
            i.to_string(),
            (result.predicted[i] + 1).to_string(),
            u8::from(problem.labels()[i].is_some()).to_string(),
        ];
        rec.extend((0..k).map(|r| result.f[(i, r)].to_string()));
        w.write_record(&rec)?;
    }
    let table = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(Predictions {
        table,
        test_error: result.test_error,
        path: prepared.path(),
    })
}

pub fn grid2x2(mut a: GridArgs) -> Result<(), CliError> {
    a.common.resolve(&DEFAULT_PS, 4, 5);
    let table = run_grid2x2(&a)?;
    emit(&table, a.common.out.as_deref(), "grid2x2", Some(a.common.seed), &a)
}

pub fn unbalanced(mut a: UnbalancedArgs) -> Result<(), CliError> {
    a.common.resolve(&DEFAULT_PS, 4, 5);
    let table = run_unbalanced(&a)?;
    emit(&table, a.common.out.as_deref(), "unbalanced", Some(a.common.seed), &a)
}

pub fn info3(mut a: Info3Args) -> Result<(), CliError> {
    a.common.resolve(&DEFAULT_PS, 5, 5);
    let table = run_info3(&a)?;
    emit(&table, a.common.out.as_deref(), "info3", Some(a.common.seed), &a)
}

pub fn lambda_sweep(mut a: LambdaArgs) -> Result<(), CliError> {
    a.common.resolve(&DEFAULT_PS, 5, 5);
    let table = run_lambda_sweep(&a)?;
    emit(&table, a.common.out.as_deref(), "lambda-sweep", Some(a.common.seed), &a)
}

pub fn timing(a: TimingArgs) -> Result<(), CliError> {
    let table = run_timing(&a)?;
    emit(&table, a.out.as_deref(), "timing", Some(a.seed), &a)
}

pub fn dataset(mut a: DatasetArgs) -> Result<(), CliError> {
    if a.p.is_empty() {
        a.p = DATASET_PS.to_vec();
    }
    let table = run_dataset(&a)?;
    emit(&table, a.out.as_deref(), "dataset", Some(a.seed), &a)
}

pub fn solve(a: SolveArgs) -> Result<(), CliError> {
    let pred = run_solve(&a)?;
    if let Some(e) = pred.test_error {
        eprintln!("test error: {e} ({} path)", pred.path);
    }
    match a.out.as_deref() {
        Some(path) => write_file(path, &pred.table),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&pred.table)
                .map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

