//! Scalar and matrix power means, and the dense semi-supervised solve
//! `(I + λ L_p) f = C y` with labels read off by row argmax.

mod dense;

pub use dense::{
    dense_matrix_exp, dense_matrix_log, dense_matrix_power, dense_power_mean, dense_power_mean_laplacian,
    dense_power_mean_laplacian_with, EIGEN_FLOOR, NEGATIVE_TOLERANCE,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::krylov::SolveReport;

/// Power mean `((1/T) Σ x_i^p)^{1/p}`. `p = 0` gives the geometric mean and
/// `p = ±∞` the max/min. Zero entries are only allowed for `p > 0`.
pub fn scalar_power_mean(xs: &[f64], p: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Input("power mean of an empty list".into()));
    }
    if p.is_nan() {
        return Err(Error::Domain("power mean exponent is NaN".into()));
    }
    for &x in xs {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::Domain(format!("power mean needs finite nonnegative values, got {x}")));
        }
        if x == 0.0 && p <= 0.0 {
            return Err(Error::Domain(format!("zero entry with p = {p} ≤ 0")));
        }
    }
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    if p == f64::INFINITY {
        return Ok(max);
    }
    if p == f64::NEG_INFINITY {
        return Ok(min);
    }
    let t = xs.len() as f64;
    if p == 0.0 {
        return Ok((xs.iter().map(|x| x.ln()).sum::<f64>() / t).exp());
    }
    // factor out the dominant entry so large |p| cannot overflow
    let pivot = if p > 0.0 { max } else { min };
    if pivot == 0.0 {
        return Ok(0.0);
    }
    let s = xs.iter().map(|&x| (x / pivot).powf(p)).sum::<f64>() / t;
    Ok(pivot * s.powf(1.0 / p))
}

/// Labels, cost weights and regularization of one SSL instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelingProblem {
    k: usize,
    labels: Vec<Option<usize>>,
    lambda: f64,
    p: f64,
    cost: Option<Vec<f64>>,
    truth: Option<Vec<usize>>,
}

impl LabelingProblem {
    /// `labels[i] = Some(r)` marks node `i` as a labeled member of class `r`
    /// (0-based, `r < k`).
    pub fn new(labels: Vec<Option<usize>>, k: usize, lambda: f64, p: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Input("need at least one class".into()));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("λ must be positive and finite, got {lambda}")));
        }
        if p.is_nan() {
            return Err(Error::Domain("p is NaN".into()));
        }
        if let Some((i, r)) = labels.iter().enumerate().find_map(|(i, l)| l.filter(|&r| r >= k).map(|r| (i, r))) {
            return Err(Error::Input(format!("node {i} has class {r} but only {k} classes exist")));
        }
        Ok(Self {
            k,
            labels,
            lambda,
            p,
            cost: None,
            truth: None,
        })
    }

    /// Reveal `truth[i]` wherever `mask[i]` holds; keep `truth` for scoring.
    pub fn from_mask(truth: &[usize], mask: &[bool], k: usize, lambda: f64, p: f64) -> Result<Self> {
        if truth.len() != mask.len() {
            return Err(Error::dim(truth.len(), mask.len()));
        }
        let labels = truth
            .iter()
            .zip(mask)
            .map(|(&c, &m)| m.then_some(c))
            .collect();
        Self::new(labels, k, lambda, p)?.with_truth(truth.to_vec())
    }

    pub fn with_truth(mut self, truth: Vec<usize>) -> Result<Self> {
        if truth.len() != self.labels.len() {
            return Err(Error::dim(self.labels.len(), truth.len()));
        }
        if let Some(&r) = truth.iter().find(|&&r| r >= self.k) {
            return Err(Error::Input(format!("ground truth class {r} out of range for {} classes", self.k)));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    /// Per-node loss weights `C_ii`; only labeled entries matter and those
    /// must be positive.
    pub fn with_cost(mut self, cost: Vec<f64>) -> Result<Self> {
        if cost.len() != self.labels.len() {
            return Err(Error::dim(self.labels.len(), cost.len()));
        }
        for (i, (&c, l)) in cost.iter().zip(&self.labels).enumerate() {
            if l.is_some() && !(c > 0.0 && c.is_finite()) {
                return Err(Error::Domain(format!("cost of labeled node {i} must be positive, got {c}")));
            }
        }
        self.cost = Some(cost);
        Ok(self)
    }

    /// `C_ii = n / n_r` for a node labeled in class `r`, where `n_r` is the
    /// number of labeled nodes of that class.
    pub fn with_class_balanced_cost(self) -> Result<Self> {
        let counts = self.label_counts();
        let n = self.labels.len() as f64;
        let cost = self
            .labels
            .iter()
            .map(|l| l.map_or(1.0, |r| n / counts[r] as f64))
            .collect();
        self.with_cost(cost)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn truth(&self) -> Option<&[usize]> {
        self.truth.as_deref()
    }

    pub fn cost(&self) -> Option<&[f64]> {
        self.cost.as_deref()
    }

    pub fn labeled_mask(&self) -> Vec<bool> {
        self.labels.iter().map(Option::is_some).collect()
    }

    /// Labeled node count per class.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        self.labels.iter().flatten().for_each(|&r| counts[r] += 1);
        counts
    }

    /// `n × k` 0/1 membership matrix of the labeled nodes.
    pub fn y_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.k, |i, r| if self.labels[i] == Some(r) { 1.0 } else { 0.0 })
    }

    /// Right-hand side `C Y^{(r)}` of class `r`.
    pub fn rhs(&self, r: usize) -> Vec<f64> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                if *l == Some(r) {
                    self.cost.as_ref().map_or(1.0, |c| c[i])
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Build the result from a solution matrix: labels, and the test error
    /// when ground truth is known and some node is unlabeled.
    pub fn finish(&self, f: DMatrix<f64>, reports: Vec<SolveReport>) -> Result<LabelingResult> {
        let predicted = assign_labels(&f)?;
        let test_error = match &self.truth {
            Some(truth) if self.labels.iter().any(Option::is_none) => {
                Some(test_error(&predicted, truth, &self.labeled_mask())?)
            }
            _ => None,
        };
        Ok(LabelingResult {
            f,
            predicted,
            test_error,
            reports,
        })
    }
}

/// Solution of one SSL instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelingResult {
    /// `n × k`, column `r` solves the class-`r` system.
    pub f: DMatrix<f64>,
    /// Row argmax of `f`, lowest class on ties.
    pub predicted: Vec<usize>,
    /// Misclassified fraction of unlabeled nodes; `None` without ground truth
    /// or without unlabeled nodes.
    pub test_error: Option<f64>,
    /// One report per class for iterative paths; empty for the dense path.
    pub reports: Vec<SolveReport>,
}

/// Solve `(I + λ L_p) F = C Y` with a dense Cholesky factorization.
pub fn dense_ssl_solve(l_p: &DMatrix<f64>, problem: &LabelingProblem) -> Result<LabelingResult> {
    let n = problem.n();
    if l_p.shape() != (n, n) {
        return Err(Error::dim(n, l_p.nrows()));
    }
    let system = DMatrix::identity(n, n) + l_p * problem.lambda();
    let chol = system
        .cholesky()
        .ok_or_else(|| Error::Numerical("I + λL_p is not positive definite".into()))?;
    let rhs = DMatrix::from_fn(n, problem.k(), |i, r| {
        if problem.labels()[i] == Some(r) {
            problem.cost().map_or(1.0, |c| c[i])
        } else {
            0.0
        }
    });
    let f = chol.solve(&rhs);
    problem.finish(f, Vec::new())
}

/// Row-wise argmax, ties to the lowest class index.
pub fn assign_labels(f: &DMatrix<f64>) -> Result<Vec<usize>> {
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("solution matrix has non-finite entries".into()));
    }
    Ok((0..f.nrows())
        .map(|i| {
            let row = f.row(i);
            let mut best = 0;
            for r in 1..row.len() {
                if row[r] > row[best] {
                    best = r;
                }
            }
            best
        })
        .collect())
}

/// Fraction of unlabeled nodes whose prediction differs from the truth.
pub fn test_error(predicted: &[usize], truth: &[usize], labeled: &[bool]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::dim(truth.len(), predicted.len()));
    }
    if labeled.len() != truth.len() {
        return Err(Error::dim(truth.len(), labeled.len()));
    }
    let mut total = 0usize;
    let mut wrong = 0usize;
    for i in 0..truth.len() {
        if !labeled[i] {
            total += 1;
            if predicted[i] != truth[i] {
                wrong += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::Input("every node is labeled; test error is undefined".into()));
    }
    Ok(wrong as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{shift_for_p, MultilayerGraph};
    use crate::sparse::SparseMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_value_means() {
        assert_eq!(scalar_power_mean(&[4.0, 1.0], 1.0).unwrap(), 2.5);
        assert!((scalar_power_mean(&[4.0, 1.0], 0.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((scalar_power_mean(&[4.0, 1.0], -1.0).unwrap() - 1.6).abs() < 1e-15);
        assert_eq!(scalar_power_mean(&[4.0, 1.0], f64::NEG_INFINITY).unwrap(), 1.0);
        assert_eq!(scalar_power_mean(&[4.0, 1.0], f64::INFINITY).unwrap(), 4.0);
    }

    #[test]
    fn equal_arguments() {
        for p in [-50.0, -1.0, 0.0, 0.3, 7.0, f64::INFINITY] {
            let m = scalar_power_mean(&[2.5, 2.5, 2.5], p).unwrap();
            assert!((m - 2.5).abs() < 1e-14, "p={p}");
        }
    }

    #[test]
    fn minus_two_mean() {
        let m = scalar_power_mean(&[1.0, 2.0, 3.0], -2.0).unwrap();
        let expect = ((1.0 + 0.25 + 1.0 / 9.0) / 3.0f64).powf(-0.5);
        assert!((m - expect).abs() < 1e-15);
        let m1 = scalar_power_mean(&[1.0, 2.0, 3.0], -1.0).unwrap();
        let m3 = scalar_power_mean(&[1.0, 2.0, 3.0], -3.0).unwrap();
        assert!(m3 < m && m < m1);
    }

    #[test]
    fn zero_entry_domain() {
        assert!(scalar_power_mean(&[0.0, 1.0], -1.0).is_err());
        assert!(scalar_power_mean(&[0.0, 1.0], 0.0).is_err());
        assert_eq!(scalar_power_mean(&[0.0, 1.0], 1.0).unwrap(), 0.5);
        assert!(scalar_power_mean(&[], 1.0).is_err());
        assert!(scalar_power_mean(&[-1.0], 1.0).is_err());
    }

    #[test]
    fn large_exponents_do_not_overflow() {
        let m = scalar_power_mean(&[1e10, 2e10], 100.0).unwrap();
        assert!(m.is_finite() && m > 1.9e10);
        let m = scalar_power_mean(&[1e-10, 2e-10], -100.0).unwrap();
        assert!(m.is_finite() && m < 1.1e-10);
    }

    #[test]
    fn tie_goes_to_lowest_class() {
        let f = DMatrix::from_row_slice(2, 2, &[0.2, 0.2, 0.1, 0.3]);
        assert_eq!(assign_labels(&f).unwrap(), vec![0, 1]);
    }

    #[test]
    fn indicator_rows_give_zero_error() {
        let truth = vec![0, 1, 2, 1];
        let f = DMatrix::from_fn(4, 3, |i, r| if truth[i] == r { 1.0 } else { 0.0 });
        let pred = assign_labels(&f).unwrap();
        assert_eq!(test_error(&pred, &truth, &[false; 4]).unwrap(), 0.0);
    }

    #[test]
    fn test_error_counts_unlabeled_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let truth: Vec<usize> = (0..10).map(|_| rng.gen_range(0..3)).collect();
        let f = DMatrix::from_fn(10, 3, |_, _| rng.gen::<f64>());
        let mask: Vec<bool> = (0..10).map(|i| i % 3 == 0).collect();
        let pred = assign_labels(&f).unwrap();
        let mut wrong = 0;
        let mut total = 0;
        for i in 0..10 {
            if !mask[i] {
                total += 1;
                let row = [f[(i, 0)], f[(i, 1)], f[(i, 2)]];
                let best = (0..3).fold(0, |b, r| if row[r] > row[b] { r } else { b });
                wrong += usize::from(best != truth[i]);
            }
        }
        assert_eq!(test_error(&pred, &truth, &mask).unwrap(), wrong as f64 / total as f64);
        assert!(test_error(&pred, &truth, &[true; 10]).is_err());
    }

    #[test]
    fn non_finite_solution_rejected() {
        let f = DMatrix::from_row_slice(1, 2, &[f64::NAN, 1.0]);
        assert!(assign_labels(&f).is_err());
    }

    #[test]
    fn problem_validation() {
        assert!(LabelingProblem::new(vec![Some(0)], 1, 0.0, 1.0).is_err());
        assert!(LabelingProblem::new(vec![Some(2)], 2, 1.0, 1.0).is_err());
        let p = LabelingProblem::new(vec![Some(0), None], 2, 1.0, 1.0).unwrap();
        assert!(p.clone().with_cost(vec![0.0, 1.0]).is_err());
        assert!(p.with_cost(vec![1.0, 0.0]).is_ok());
    }

    #[test]
    fn balanced_cost_is_n_over_class_count() {
        let truth = vec![0, 0, 0, 1, 1, 1];
        let mask = vec![true, true, false, true, false, false];
        let p = LabelingProblem::from_mask(&truth, &mask, 2, 1.0, 1.0)
            .unwrap()
            .with_class_balanced_cost()
            .unwrap();
        assert_eq!(p.rhs(0), vec![3.0, 3.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.rhs(1), vec![0.0, 0.0, 0.0, 6.0, 0.0, 0.0]);
    }

    fn path_graph(n: usize) -> MultilayerGraph {
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.push((i, i + 1, 1.0));
            t.push((i + 1, i, 1.0));
        }
        MultilayerGraph::new(vec![SparseMatrix::from_triplets(&t, n, n).unwrap()]).unwrap()
    }

    #[test]
    fn tiny_lambda_returns_labels() {
        let g = path_graph(6);
        let l = dense_power_mean_laplacian(&g, 1.0).unwrap();
        let truth = vec![0, 0, 0, 1, 1, 1];
        let mask = vec![true, false, true, false, true, true];
        let prob = LabelingProblem::from_mask(&truth, &mask, 2, 1e-12, 1.0).unwrap();
        let res = dense_ssl_solve(&l, &prob).unwrap();
        let y = prob.y_matrix();
        assert!((&res.f - &y).amax() < 1e-10);
        for i in 0..6 {
            if mask[i] {
                assert_eq!(res.predicted[i], truth[i]);
            }
        }
    }

    #[test]
    fn dense_solve_satisfies_system() {
        let g = path_graph(8);
        let p = -1.0;
        let l = dense_power_mean_laplacian(&g, p).unwrap();
        let prob = LabelingProblem::from_mask(&[0, 0, 0, 0, 1, 1, 1, 1], &[true, false, false, false, false, false, false, true], 2, 3.0, p).unwrap();
        let res = dense_ssl_solve(&l, &prob).unwrap();
        let lhs = (DMatrix::identity(8, 8) + &l * 3.0) * &res.f;
        assert!((lhs - prob.y_matrix()).amax() < 1e-12);
        assert_eq!(res.test_error, Some(0.0));
        assert!(shift_for_p(p) > 0.0);
    }

    fn positive_tuple() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-3f64..1e3, 1..6)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn mean_is_monotone_in_p(xs in positive_tuple(), a in -20.0f64..20.0, b in -20.0f64..20.0) {
            let (p, q) = if a < b { (a, b) } else { (b, a) };
            let mp = scalar_power_mean(&xs, p).unwrap();
            let mq = scalar_power_mean(&xs, q).unwrap();
            prop_assert!(mp <= mq * (1.0 + 1e-12) + 1e-12);
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo * (1.0 + 1e-9) && q - p > 1e-3 {
                prop_assert!(mp < mq);
            }
        }

        #[test]
        fn mean_lies_between_min_and_max(xs in positive_tuple(), p in -30.0f64..30.0) {
            let m = scalar_power_mean(&xs, p).unwrap();
            let lo = scalar_power_mean(&xs, f64::NEG_INFINITY).unwrap();
            let hi = scalar_power_mean(&xs, f64::INFINITY).unwrap();
            prop_assert!(m >= lo * (1.0 - 1e-12) && m <= hi * (1.0 + 1e-12));
        }

        #[test]
        fn geometric_limit(xs in positive_tuple()) {
            let g = scalar_power_mean(&xs, 0.0).unwrap();
            for p in [1e-6, -1e-6] {
                let m = scalar_power_mean(&xs, p).unwrap();
                prop_assert!((m - g).abs() <= 1e-4 * g);
            }
        }

        #[test]
        fn argmax_ignores_positive_scaling(
            data in prop::collection::vec(-5.0f64..5.0, 12),
            scale in 1e-3f64..1e3,
        ) {
            let f = DMatrix::from_row_slice(4, 3, &data);
            prop_assert_eq!(assign_labels(&f).unwrap(), assign_labels(&(&f * scale)).unwrap());
        }
    }
}
