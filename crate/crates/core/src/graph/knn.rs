use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// How the directed kNN relation is made symmetric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Symmetrization {
    /// Edge if either endpoint picked the other.
    #[default]
    Union,
    /// Edge only if both endpoints picked each other.
    Intersection,
}

/// Pearson correlation between every pair of rows of `features`.
///
/// Fails on a row with zero variance, since its correlation is undefined.
pub fn pearson_matrix(features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, d) = features.shape();
    if d == 0 {
        return Err(Error::Ingestion("feature matrix has no columns".into()));
    }
    let mut z = DMatrix::zeros(n, d);
    for i in 0..n {
        let row = features.row(i);
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Ingestion(format!("feature row {i} has a non-finite entry")));
        }
        let mean = row.sum() / d as f64;
        let ss: f64 = row.iter().map(|v| (v - mean) * (v - mean)).sum();
        if !(ss > 0.0) {
            return Err(Error::Ingestion(format!("feature row {i} has zero variance")));
        }
        let s = ss.sqrt();
        for j in 0..d {
            z[(i, j)] = (features[(i, j)] - mean) / s;
        }
    }
    Ok(&z * z.transpose())
}

/// Unweighted symmetric k-nearest-neighbour graph under Pearson correlation,
/// union-symmetrized. Equal correlations go to the lower node index.
pub fn knn_graph(features: &DMatrix<f64>, k: usize) -> Result<SparseMatrix> {
    knn_graph_with(features, k, Symmetrization::Union)
}

pub fn knn_graph_with(features: &DMatrix<f64>, k: usize, mode: Symmetrization) -> Result<SparseMatrix> {
    let n = features.nrows();
    if k == 0 || n < k + 1 {
        return Err(Error::Input(format!("kNN needs 1 ≤ k < n, got k = {k}, n = {n}")));
    }
    let corr = pearson_matrix(features)?;
    let mut picked = vec![Vec::with_capacity(k); n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| corr[(i, b)].total_cmp(&corr[(i, a)]).then(a.cmp(&b)));
        picked[i].extend_from_slice(&order[..k]);
        picked[i].sort_unstable();
    }
    let mut triplets = Vec::with_capacity(2 * n * k);
    for i in 0..n {
        for &j in &picked[i] {
            let keep = match mode {
                Symmetrization::Union => true,
                Symmetrization::Intersection => picked[j].binary_search(&i).is_ok(),
            };
            if keep {
                triplets.push((i, j, 1.0));
                triplets.push((j, i, 1.0));
            }
        }
    }
    // duplicates from mutual picks are collapsed back to weight 1
    let summed = SparseMatrix::from_triplets(&triplets, n, n)?;
    let ones: Vec<(usize, usize, f64)> = summed.triplets().into_iter().map(|(i, j, _)| (i, j, 1.0)).collect();
    SparseMatrix::from_triplets(&ones, n, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_rows_tie_to_lowest_index() {
        let f = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 2.0]);
        let g = knn_graph(&f, 1).unwrap();
        // 0 picks 1, 1 picks 0, 2 picks 0
        let expect: Vec<(usize, usize, f64)> = vec![(0, 1, 1.0), (0, 2, 1.0), (1, 0, 1.0), (2, 0, 1.0)];
        assert_eq!(g.triplets(), expect);
    }

    #[test]
    fn basis_vectors_chain_by_index() {
        let f = DMatrix::<f64>::identity(3, 3);
        let g = knn_graph(&f, 1).unwrap();
        // all correlations are −1/2: 0→1, 1→0, 2→0
        assert_eq!(g.get(0, 1), 1.0);
        assert_eq!(g.get(2, 0), 1.0);
        assert_eq!(g.get(1, 2), 0.0);
        assert!(g.is_symmetric());
    }

    #[test]
    fn two_anticorrelated_clusters_stay_apart() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mut data = Vec::new();
        for i in 0..10 {
            let sign = if i < 5 { 1.0 } else { -1.0 };
            for b in base {
                data.push(sign * b + rng.gen_range(-0.01..0.01));
            }
        }
        let f = DMatrix::from_row_slice(10, 5, &data);
        let g = knn_graph(&f, 2).unwrap();
        for (i, j, _) in g.triplets() {
            assert_eq!(i < 5, j < 5, "cross edge {i}-{j}");
        }
    }

    #[test]
    fn matches_brute_force_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (n, d, k) = (25, 6, 3);
        let f = DMatrix::from_fn(n, d, |_, _| rng.gen::<f64>());
        let g = knn_graph(&f, k).unwrap();
        let corr = |a: usize, b: usize| {
            let (ra, rb) = (f.row(a), f.row(b));
            let (ma, mb) = (ra.mean(), rb.mean());
            let num: f64 = (0..d).map(|t| (ra[t] - ma) * (rb[t] - mb)).sum();
            let da: f64 = (0..d).map(|t| (ra[t] - ma).powi(2)).sum::<f64>().sqrt();
            let db: f64 = (0..d).map(|t| (rb[t] - mb).powi(2)).sum::<f64>().sqrt();
            num / (da * db)
        };
        for i in 0..n {
            let mut others: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (corr(i, j), j)).collect();
            others.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            for &(_, j) in &others[..k] {
                assert_eq!(g.get(i, j), 1.0);
                assert_eq!(g.get(j, i), 1.0);
            }
        }
        assert!(g.values().iter().all(|&v| v == 1.0));
        assert!(g.diagonal().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn intersection_is_subset_of_union() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = DMatrix::from_fn(30, 4, |_, _| rng.gen::<f64>());
        let u = knn_graph_with(&f, 4, Symmetrization::Union).unwrap();
        let x = knn_graph_with(&f, 4, Symmetrization::Intersection).unwrap();
        assert!(x.is_symmetric());
        for (i, j, _) in x.triplets() {
            assert_eq!(u.get(i, j), 1.0);
        }
        assert!(x.nnz() <= u.nnz());
    }

    #[test]
    fn zero_variance_row_is_rejected() {
        let f = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 3.0, 0.0, 1.0]);
        match knn_graph(&f, 1) {
            Err(Error::Ingestion(msg)) => assert!(msg.contains("row 1")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn k_must_leave_a_neighbour() {
        let f = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(knn_graph(&f, 2).is_err());
        assert!(knn_graph(&f, 0).is_err());
    }
}
