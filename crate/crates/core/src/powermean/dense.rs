use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::{shift_for_p, IsolatedNodes, MultilayerGraph};

/// Eigenvalues in `(−NEGATIVE_TOLERANCE, EIGEN_FLOOR)` are raised to
/// `EIGEN_FLOOR` before powers and logarithms.
pub const EIGEN_FLOOR: f64 = 1e-14;
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Input(format!("matrix is {}×{}, not square", a.nrows(), a.ncols())));
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let n = a.nrows();
    for i in 0..n {
        for j in i + 1..n {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Input(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Apply `f` to the clamped eigenvalues of a symmetric PSD matrix.
fn spectral_map(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    check_symmetric(a)?;
    let eig = SymmetricEigen::new(a.clone());
    let mut values = eig.eigenvalues.clone();
    for v in values.iter_mut() {
        if *v < -NEGATIVE_TOLERANCE {
            return Err(Error::Numerical(format!(
                "eigenvalue {v:e} is below −{NEGATIVE_TOLERANCE:e}; matrix is not PSD"
            )));
        }
        *v = f(v.max(EIGEN_FLOOR));
        if !v.is_finite() {
            return Err(Error::Numerical("matrix function produced a non-finite eigenvalue".into()));
        }
    }
    let u = &eig.eigenvectors;
    let out = u * DMatrix::from_diagonal(&values) * u.transpose();
    Ok(symmetrize(out))
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    let t = a.transpose();
    (a + t) * 0.5
}

/// `A^p` for symmetric PSD `A` by eigendecomposition.
pub fn dense_matrix_power(a: &DMatrix<f64>, p: f64) -> Result<DMatrix<f64>> {
    if !p.is_finite() {
        return Err(Error::Domain(format!("matrix power needs a finite exponent, got {p}")));
    }
    spectral_map(a, |x| x.powf(p))
}

/// Principal logarithm of a symmetric positive definite matrix.
pub fn dense_matrix_log(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spectral_map(a, f64::ln)
}

/// Exponential of a symmetric matrix.
pub fn dense_matrix_exp(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(a)?;
    let eig = SymmetricEigen::new(a.clone());
    let values = eig.eigenvalues.map(f64::exp);
    let u = &eig.eigenvectors;
    Ok(symmetrize(u * DMatrix::from_diagonal(&values) * u.transpose()))
}

/// Matrix power mean `((1/T) Σ A_i^p)^{1/p}` of symmetric PSD matrices.
///
/// `p = 0` is the log-Euclidean mean `exp((1/T) Σ log A_i)`.
///
/// When the matrices commute (a single layer, identical layers, expected
/// block-model layers) they are diagonalized jointly and the scalar power
/// mean is taken eigenvalue by eigenvalue. This avoids the `1/p`-th root of
/// rounded small eigenvalues of `Σ A_i^p`, which loses most digits for large
/// `p`. `p = ±∞` (eigenvalue-wise max/min) is only defined on this path.
pub fn dense_power_mean(mats: &[DMatrix<f64>], p: f64) -> Result<DMatrix<f64>> {
    let first = mats.first().ok_or_else(|| Error::Input("power mean of no matrices".into()))?;
    let n = first.nrows();
    if let Some(a) = mats.iter().find(|a| a.shape() != (n, n)) {
        return Err(Error::Input(format!("matrix is {:?}, expected {n}×{n}", a.shape())));
    }
    if p.is_nan() {
        return Err(Error::Domain("power mean exponent is NaN".into()));
    }
    for a in mats {
        check_symmetric(a)?;
    }
    if all_commute(mats) {
        return joint_power_mean(mats, p);
    }
    if p.is_infinite() {
        return Err(Error::Scope(
            "p = ±∞ is defined only for commuting layers (e.g. expected graphs)".into(),
        ));
    }
    let t = mats.len() as f64;
    if p == 0.0 {
        let mut acc = DMatrix::zeros(n, n);
        for a in mats {
            acc += dense_matrix_log(a)?;
        }
        return dense_matrix_exp(&(acc / t));
    }
    let mut acc = DMatrix::zeros(n, n);
    for a in mats {
        acc += dense_matrix_power(a, p)?;
    }
    dense_matrix_power(&(acc / t), 1.0 / p)
}

fn all_commute(mats: &[DMatrix<f64>]) -> bool {
    mats.iter().enumerate().all(|(i, a)| {
        mats[i + 1..].iter().all(|b| {
            let gap = (a * b - b * a).norm();
            gap <= 1e-12 * (a.norm() * b.norm()).max(f64::MIN_POSITIVE)
        })
    })
}

fn joint_power_mean(mats: &[DMatrix<f64>], p: f64) -> Result<DMatrix<f64>> {
    let n = mats[0].nrows();
    // a generic combination separates the joint eigenspaces
    let mut combo = DMatrix::zeros(n, n);
    for (i, a) in mats.iter().enumerate() {
        combo += a * (1.0 + (i as f64 + 1.0).sqrt() * 0.731);
    }
    let u = SymmetricEigen::new(combo).eigenvectors;
    let diagonals: Vec<DMatrix<f64>> = mats.iter().map(|a| u.transpose() * a * &u).collect();
    let mut values = Vec::with_capacity(n);
    let mut column = Vec::with_capacity(mats.len());
    for j in 0..n {
        column.clear();
        for d in &diagonals {
            let v = d[(j, j)];
            if v < -NEGATIVE_TOLERANCE {
                return Err(Error::Numerical(format!(
                    "eigenvalue {v:e} is below −{NEGATIVE_TOLERANCE:e}; matrix is not PSD"
                )));
            }
            column.push(v.max(EIGEN_FLOOR));
        }
        values.push(super::scalar_power_mean(&column, p)?);
    }
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(values));
    Ok(symmetrize(&u * d * u.transpose()))
}

/// Dense power mean Laplacian of `graph` with the default shift for `p`.
pub fn dense_power_mean_laplacian(graph: &MultilayerGraph, p: f64) -> Result<DMatrix<f64>> {
    if p == f64::NEG_INFINITY {
        return Err(Error::Domain(
            "the default shift is unbounded at p = −∞; use dense_power_mean_laplacian_with".into(),
        ));
    }
    dense_power_mean_laplacian_with(graph, p, shift_for_p(p), IsolatedNodes::Error)
}

/// Dense `L_p` with an explicit shift `ε` added to every layer Laplacian.
pub fn dense_power_mean_laplacian_with(
    graph: &MultilayerGraph,
    p: f64,
    shift: f64,
    policy: IsolatedNodes,
) -> Result<DMatrix<f64>> {
    let mats: Vec<DMatrix<f64>> = graph
        .laplacians(policy)?
        .iter()
        .map(|l| {
            let mut d = l.to_dense();
            for i in 0..d.nrows() {
                d[(i, i)] += shift;
            }
            d
        })
        .collect();
    dense_power_mean(&mats, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &b * b.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn identity_power() {
        let i = DMatrix::<f64>::identity(4, 4);
        for p in [-3.0, -0.5, 0.5, 2.0] {
            assert!((dense_matrix_power(&i, p).unwrap() - &i).amax() < 1e-14);
        }
    }

    #[test]
    fn diagonal_square_root() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 9.0]));
        let r = dense_matrix_power(&a, 0.5).unwrap();
        let expect = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0]));
        assert!((r - expect).amax() < 1e-14);
    }

    #[test]
    fn power_round_trip() {
        let a = random_spd(20, 5);
        for p in [-3.0, -1.0, 0.5, 2.0] {
            let back = dense_matrix_power(&dense_matrix_power(&a, p).unwrap(), 1.0 / p).unwrap();
            assert!((back - &a).amax() <= 1e-9 * a.amax(), "p={p}");
        }
    }

    #[test]
    fn negative_spectrum_rejected() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1e-3]));
        assert!(matches!(dense_matrix_power(&a, -1.0), Err(Error::Numerical(_))));
        // tiny negative round-off is clamped
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1e-12]));
        assert!(dense_matrix_power(&a, 0.5).is_ok());
    }

    #[test]
    fn log_exp_round_trip() {
        let a = random_spd(10, 2);
        let back = dense_matrix_exp(&dense_matrix_log(&a).unwrap()).unwrap();
        assert!((back - &a).amax() <= 1e-10 * a.amax());
    }

    #[test]
    fn mean_of_equal_matrices_is_that_matrix() {
        // spectrum inside [0.5, 2.5], like a shifted Laplacian
        let q = SymmetricEigen::new(random_spd(8, 3)).eigenvectors;
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(8, |i, _| 0.5 + 2.0 * i as f64 / 7.0));
        let a = &q * d * q.transpose();
        for p in [-10.0, -1.0, 0.0, 1.0, 10.0] {
            let m = dense_power_mean(&[a.clone(), a.clone()], p).unwrap();
            assert!((m - &a).amax() <= 1e-9 * a.amax(), "p={p}");
        }
    }

    #[test]
    fn single_layer_laplacian_is_shifted_laplacian() {
        let w = SparseMatrix::from_triplets(
            &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 2.0), (2, 1, 2.0), (0, 2, 0.5), (2, 0, 0.5)],
            3,
            3,
        )
        .unwrap();
        let g = MultilayerGraph::new(vec![w]).unwrap();
        let base = g.laplacians(IsolatedNodes::Error).unwrap()[0].to_dense();
        for p in [-2.0, 0.0, 1.0, 3.0, 10.0] {
            let lp = dense_power_mean_laplacian(&g, p).unwrap();
            let expect = &base + DMatrix::identity(3, 3) * shift_for_p(p);
            assert!((lp - expect).amax() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn infinite_p_needs_commuting_layers() {
        let a = random_spd(5, 1);
        let b = random_spd(5, 2);
        assert!(matches!(dense_power_mean(&[a, b], f64::INFINITY), Err(Error::Scope(_))));
        let d1 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 5.0, 2.0]));
        let d2 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 4.0, 2.0]));
        let hi = dense_power_mean(&[d1.clone(), d2.clone()], f64::INFINITY).unwrap();
        let lo = dense_power_mean(&[d1, d2], f64::NEG_INFINITY).unwrap();
        for (j, (h, l)) in [(3.0, 1.0), (5.0, 4.0), (2.0, 2.0)].iter().enumerate() {
            assert!((hi[(j, j)] - h).abs() < 1e-12);
            assert!((lo[(j, j)] - l).abs() < 1e-12);
        }
    }

    #[test]
    fn non_commuting_general_path_matches_definition() {
        let a = random_spd(6, 7);
        let b = random_spd(6, 8);
        let m = dense_power_mean(&[a.clone(), b.clone()], -1.0).unwrap();
        let ai = a.clone().try_inverse().unwrap();
        let bi = b.clone().try_inverse().unwrap();
        let expect = ((ai + bi) * 0.5).try_inverse().unwrap();
        assert!((m - &expect).amax() < 1e-10 * expect.amax());
        // geometric-type mean of commuting diagonal matrices
        let d1 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0]));
        let d2 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 9.0]));
        let g = dense_power_mean(&[d1, d2], 0.0).unwrap();
        assert!((g[(0, 0)] - 2.0).abs() < 1e-12 && (g[(1, 1)] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_default_shift_rejected() {
        let g = MultilayerGraph::new(vec![SparseMatrix::from_triplets(&[(0, 1, 1.0), (1, 0, 1.0)], 2, 2).unwrap()])
            .unwrap();
        assert!(dense_power_mean_laplacian(&g, f64::NEG_INFINITY).is_err());
    }
}
