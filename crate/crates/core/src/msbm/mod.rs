//! Multilayer stochastic block models: sampling, label budgets and the
//! expected-case closed forms in [`oracle`].
//!
//! Nodes are ordered by class: node `i` belongs to class `i / cluster_size`.

pub mod oracle;

pub use oracle::{
    canonical_eigenvectors, expected_adjacency, expected_graph, expected_info_independent,
    expected_solution_matrix, predict_zero_error, predict_zero_error_unbalanced, rho_epsilon,
    sufficient_unbalanced_bound, unbalanced_bound,
};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::MultilayerGraph;
use crate::sparse::SparseMatrix;

/// Within- and between-class edge probability of one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerProbs {
    pub p_in: f64,
    pub p_out: f64,
}

impl LayerProbs {
    pub fn new(p_in: f64, p_out: f64) -> Self {
        Self { p_in, p_out }
    }
}

/// `k` classes of `cluster_size` nodes each, one `(p_in, p_out)` per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MsbmParams {
    k: usize,
    cluster_size: usize,
    layers: Vec<LayerProbs>,
}

impl MsbmParams {
    pub fn new(k: usize, cluster_size: usize, layers: Vec<LayerProbs>) -> Result<Self> {
        if k < 2 {
            return Err(Error::Input(format!("need at least 2 classes, got {k}")));
        }
        if cluster_size == 0 {
            return Err(Error::Input("cluster size must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::Input("need at least one layer".into()));
        }
        for (t, l) in layers.iter().enumerate() {
            for v in [l.p_in, l.p_out] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Domain(format!("layer {t}: probability {v} outside [0, 1]")));
                }
            }
        }
        Ok(Self {
            k,
            cluster_size,
            layers,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cluster_size(&self) -> usize {
        self.cluster_size
    }

    pub fn layers(&self) -> &[LayerProbs] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n(&self) -> usize {
        self.k * self.cluster_size
    }

    /// Class of every node.
    pub fn truth(&self) -> Vec<usize> {
        block_truth(self.k, self.cluster_size)
    }
}

pub(crate) fn block_truth(k: usize, cluster_size: usize) -> Vec<usize> {
    (0..k * cluster_size).map(|i| i / cluster_size).collect()
}

/// Sample every layer independently: each unordered pair `i ≠ j` is an edge
/// with probability `p_in` inside a class and `p_out` across. No self-loops.
/// Layer `t` uses the ChaCha8 stream `t` of `seed`.
pub fn sample_msbm(params: &MsbmParams, seed: u64) -> Result<MultilayerGraph> {
    let classes: Vec<usize> = (0..params.k).collect();
    let layers = params
        .layers
        .iter()
        .enumerate()
        .map(|(t, probs)| {
            let mut rng = layer_rng(seed, t);
            sample_layer(params.k, params.cluster_size, &classes, *probs, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    MultilayerGraph::new(layers)
}

/// Sample the three-class, three-layer model where layer `t` only separates
/// class `t` from the other two: `p_in` when both endpoints are in class `t`
/// or both are outside it, `p_out` otherwise.
pub fn sample_info_independent(p_in: f64, p_out: f64, cluster_size: usize, seed: u64) -> Result<MultilayerGraph> {
    let probs = LayerProbs::new(p_in, p_out);
    MsbmParams::new(3, cluster_size, vec![probs; 3])?;
    let layers = (0..3)
        .map(|t| {
            let groups: Vec<usize> = (0..3).map(|c| usize::from(c == t)).collect();
            let mut rng = layer_rng(seed, t);
            sample_layer(3, cluster_size, &groups, probs, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    MultilayerGraph::new(layers)
}

fn layer_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng
}

/// `group[c]` is the group of class `c`; pairs in the same group use `p_in`.
fn sample_layer(
    k: usize,
    cluster_size: usize,
    group: &[usize],
    probs: LayerProbs,
    rng: &mut ChaCha8Rng,
) -> Result<SparseMatrix> {
    let n = k * cluster_size;
    let mut triplets = Vec::new();
    for i in 0..n {
        let ci = i / cluster_size;
        for cj in ci..k {
            let start = if cj == ci { i + 1 } else { cj * cluster_size };
            let end = (cj + 1) * cluster_size;
            let p = if group[ci] == group[cj] { probs.p_in } else { probs.p_out };
            bernoulli_range(rng, start, end, p, |j| {
                triplets.push((i, j, 1.0));
                triplets.push((j, i, 1.0));
            });
        }
    }
    SparseMatrix::from_triplets(&triplets, n, n)
}

/// Call `hit(j)` for each `j` in `start..end` independently with probability
/// `p`, jumping over misses with geometric gaps.
fn bernoulli_range(rng: &mut ChaCha8Rng, start: usize, end: usize, p: f64, mut hit: impl FnMut(usize)) {
    if p <= 0.0 || start >= end {
        return;
    }
    if p >= 1.0 {
        (start..end).for_each(hit);
        return;
    }
    let log_q = (-p).ln_1p();
    let mut j = start;
    loop {
        let u: f64 = rng.gen();
        let skip = ((-u).ln_1p() / log_q).floor();
        if skip >= (end - j) as f64 {
            return;
        }
        j += skip as usize;
        hit(j);
        j += 1;
        if j >= end {
            return;
        }
    }
}

/// How many nodes of each class get their label revealed.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelBudget {
    /// Exact count per class.
    Counts(Vec<usize>),
    /// The same fraction of every class, rounded, at least one node.
    Fraction(f64),
}

impl LabelBudget {
    /// Per-class counts for the given class sizes.
    pub fn counts(&self, class_sizes: &[usize]) -> Result<Vec<usize>> {
        let counts = match self {
            LabelBudget::Counts(c) => {
                if c.len() != class_sizes.len() {
                    return Err(Error::Input(format!(
                        "label budget has {} counts for {} classes",
                        c.len(),
                        class_sizes.len()
                    )));
                }
                c.clone()
            }
            LabelBudget::Fraction(f) => {
                if !(*f > 0.0 && *f <= 1.0) {
                    return Err(Error::Domain(format!("label fraction must lie in (0, 1], got {f}")));
                }
                class_sizes
                    .iter()
                    .map(|&s| ((f * s as f64).round() as usize).max(1))
                    .collect()
            }
        };
        for (r, (&c, &s)) in counts.iter().zip(class_sizes).enumerate() {
            if c == 0 || c > s {
                return Err(Error::Input(format!(
                    "class {r}: cannot label {c} of {s} nodes (need 1 ≤ count ≤ class size)"
                )));
            }
        }
        Ok(counts)
    }
}

/// Labeled mask drawn uniformly without replacement inside each class.
pub fn sample_labels(truth: &[usize], budget: &LabelBudget, seed: u64) -> Result<Vec<bool>> {
    let k = truth.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in truth.iter().enumerate() {
        members[c].push(i);
    }
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let counts = budget.counts(&sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![false; truth.len()];
    for (class, &count) in members.iter().zip(&counts) {
        for pos in index::sample(&mut rng, class.len(), count).into_vec() {
            mask[class[pos]] = true;
        }
    }
    Ok(mask)
}
