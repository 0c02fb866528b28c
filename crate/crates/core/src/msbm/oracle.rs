//! Expected-graph constructions and the closed-form results about them.
//!
//! On the expected graph every layer Laplacian is diagonal in the canonical
//! basis `χ_1, …, χ_k` (completed by anything orthogonal to the class
//! indicators), with eigenvalue `ε` on `χ_1`, `(ρ_ε)_t` on `χ_2..χ_k` and
//! `1 + ε` elsewhere. Everything below follows from that.

use nalgebra::{DMatrix, DVector};

use super::MsbmParams;
use crate::error::{Error, Result};
use crate::graph::MultilayerGraph;
use crate::powermean::scalar_power_mean;
use crate::sparse::SparseMatrix;

/// `W = (p_in − p_out) Σ_r 1_{C_r} 1_{C_r}ᵀ + p_out 1 1ᵀ`, diagonal included.
pub fn expected_adjacency(params: &MsbmParams, t: usize) -> Result<DMatrix<f64>> {
    let probs = params
        .layers()
        .get(t)
        .ok_or_else(|| Error::Input(format!("no layer {t}")))?;
    let s = params.cluster_size();
    let n = params.n();
    Ok(DMatrix::from_fn(n, n, |i, j| if i / s == j / s { probs.p_in } else { probs.p_out }))
}

/// All expected layers as a (dense-pattern) multilayer graph.
pub fn expected_graph(params: &MsbmParams) -> Result<MultilayerGraph> {
    let layers = (0..params.num_layers())
        .map(|t| expected_adjacency(params, t).map(|w| SparseMatrix::from_dense(&w)))
        .collect::<Result<Vec<_>>>()?;
    MultilayerGraph::new(layers)
}

/// Expected version of the three-layer model where layer `t` is informative
/// of class `t` only.
pub fn expected_info_independent(p_in: f64, p_out: f64, cluster_size: usize) -> Result<MultilayerGraph> {
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
        return Err(Error::Domain(format!("probabilities ({p_in}, {p_out}) outside [0, 1]")));
    }
    if cluster_size == 0 {
        return Err(Error::Input("cluster size must be positive".into()));
    }
    let n = 3 * cluster_size;
    let layers = (0..3)
        .map(|t| {
            let side = |i: usize| i / cluster_size == t;
            let w = DMatrix::from_fn(n, n, |i, j| if side(i) == side(j) { p_in } else { p_out });
            SparseMatrix::from_dense(&w)
        })
        .collect();
    MultilayerGraph::new(layers)
}

/// `χ_1 = 1`, `χ_r = Σ_{j≤r} 1_{C_j} − r 1_{C_r}` for `r ≥ 2`.
pub fn canonical_eigenvectors(k: usize, cluster_size: usize) -> Vec<DVector<f64>> {
    let n = k * cluster_size;
    (1..=k)
        .map(|r| {
            DVector::from_fn(n, |i, _| {
                if r == 1 {
                    return 1.0;
                }
                chi_entry(r, i / cluster_size + 1)
            })
        })
        .collect()
}

/// Entry of `χ_j` (`j ≥ 2`) on a node of class `c`, both 1-based.
fn chi_entry(j: usize, c: usize) -> f64 {
    match c.cmp(&j) {
        std::cmp::Ordering::Less => 1.0,
        std::cmp::Ordering::Equal => 1.0 - j as f64,
        std::cmp::Ordering::Greater => 0.0,
    }
}

/// `(ρ_ε)_t = 1 − (p_in − p_out)/(p_in + (k−1) p_out) + ε` per layer.
pub fn rho_epsilon(params: &MsbmParams, eps: f64) -> Result<Vec<f64>> {
    let k = params.k() as f64;
    params
        .layers()
        .iter()
        .enumerate()
        .map(|(t, l)| {
            let denom = l.p_in + (k - 1.0) * l.p_out;
            if denom <= 0.0 {
                return Err(Error::Domain(format!("layer {t} has p_in = p_out = 0")));
            }
            Ok(1.0 - (l.p_in - l.p_out) / denom + eps)
        })
        .collect()
}

/// `m_p` of a nonnegative vector, with `m_p = 0` when an entry is zero and
/// `p ≤ 0` (the limit value).
fn mean_of(rho: &[f64], p: f64) -> Result<f64> {
    if p <= 0.0 && rho.iter().any(|&r| r == 0.0) {
        return Ok(0.0);
    }
    scalar_power_mean(rho, p)
}

/// Expected-graph zero-error condition for balanced labels: `m_p(ρ_ε) < 1 + ε`.
/// `p = ±∞` uses the max/min of `ρ_ε`.
pub fn predict_zero_error(params: &MsbmParams, p: f64, eps: f64) -> Result<bool> {
    let rho = rho_epsilon(params, eps)?;
    Ok(mean_of(&rho, p)? < 1.0 + eps)
}

/// Right-hand side of the exact two-class condition with `n1`, `n2` labeled
/// nodes and `μ = 1`: `m_p(ρ_ε)` must be below this.
pub fn unbalanced_bound(eps: f64, n1: usize, n2: usize) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    let s = a + b;
    let num = s * ((1.0 + eps) * (1.0 + eps) + 1.0);
    let first = (num - 2.0 * b) / (2.0 * b + s * eps);
    let second = (num - 2.0 * a) / (2.0 * a + s * eps);
    first.min(second)
}

/// `min{n1/n2, n2/n1}`, the `ε → 0` form of [`unbalanced_bound`].
pub fn sufficient_unbalanced_bound(n1: usize, n2: usize) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    (a / b).min(b / a)
}

/// Two-class zero-error condition with unequal label counts and uniform
/// loss, `μ = 1`.
pub fn predict_zero_error_unbalanced(params: &MsbmParams, p: f64, eps: f64, n1: usize, n2: usize) -> Result<bool> {
    if params.k() != 2 {
        return Err(Error::Scope(format!(
            "the unbalanced condition covers two classes only, got k = {}",
            params.k()
        )));
    }
    if n1 == 0 || n2 == 0 {
        return Err(Error::Input("both classes need at least one label".into()));
    }
    let rho = rho_epsilon(params, eps)?;
    Ok(mean_of(&rho, p)? < unbalanced_bound(eps, n1, n2))
}

/// Closed-form solution `F` of `(I + μ L_p) f^{(r)} = C Y^{(r)}` on the
/// expected graph.
///
/// `labels[i]` must be `None` or the class of node `i`; `class_cost[r]` is
/// the loss weight `c_r` of labeled class-`r` nodes. With
/// `ω = 1/(1+μ(1+ε))`, `α = 1/(1+με) − ω`, `β = 1/(1+μ m_p(ρ_ε)) − ω`:
///
/// ```text
/// f_i^{(r)} = ω c_r Y_i^{(r)} + α c_r n_r / n
///           + β c_r n_r Σ_{j≥2} χ_j(C_r) χ_j(i) / ‖χ_j‖²
/// ```
pub fn expected_solution_matrix(
    params: &MsbmParams,
    p: f64,
    eps: f64,
    labels: &[Option<usize>],
    class_cost: &[f64],
    mu: f64,
) -> Result<DMatrix<f64>> {
    let (k, s, n) = (params.k(), params.cluster_size(), params.n());
    if labels.len() != n {
        return Err(Error::dim(n, labels.len()));
    }
    if class_cost.len() != k {
        return Err(Error::dim(k, class_cost.len()));
    }
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("μ must be positive, got {mu}")));
    }
    let mut counts = vec![0usize; k];
    for (i, l) in labels.iter().enumerate() {
        if let Some(r) = *l {
            if r != i / s {
                return Err(Error::Input(format!("node {i} labeled {r} but belongs to class {}", i / s)));
            }
            counts[r] += 1;
        }
    }
    let rho = rho_epsilon(params, eps)?;
    let m = mean_of(&rho, p)?;
    let omega = 1.0 / (1.0 + mu * (1.0 + eps));
    let alpha = 1.0 / (1.0 + mu * eps) - omega;
    let beta = 1.0 / (1.0 + mu * m) - omega;
    // ‖χ_j‖² = |C| j (j−1)
    let chi_norm2 = |j: usize| (s * j * (j - 1)) as f64;

    Ok(DMatrix::from_fn(n, k, |i, r| {
        let (cr, nr) = (class_cost[r], counts[r] as f64);
        let class_i = i / s + 1;
        let own = if labels[i] == Some(r) { omega * cr } else { 0.0 };
        let projection: f64 = (2..=k)
            .map(|j| chi_entry(j, r + 1) * chi_entry(j, class_i) / chi_norm2(j))
            .sum();
        own + alpha * cr * nr / n as f64 + beta * cr * nr * projection
    }))
}
