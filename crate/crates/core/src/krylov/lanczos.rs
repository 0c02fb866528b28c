use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LinearOperator;
use crate::error::{Error, Result};

/// Multiplier applied to a Lanczos estimate of a largest eigenvalue before it
/// is used as an upper spectral bound. Ritz values approach `λ_max` from below.
pub const LAMBDA_MAX_SAFETY: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Max,
    Min,
}

/// Extreme Ritz value of a symmetric operator after `iters` Lanczos steps with
/// full reorthogonalization. `iters` is clamped to the operator dimension and
/// the start vector is drawn from a ChaCha8 stream seeded with `seed`.
///
/// The raw Ritz value is returned; callers wanting a safe upper bound multiply
/// by [`LAMBDA_MAX_SAFETY`].
pub fn lanczos_extreme<Op>(op: &Op, which: Extreme, iters: usize, seed: u64) -> Result<f64>
where
    Op: LinearOperator<f64> + ?Sized,
{
    let n = op.dim();
    if n == 0 {
        return Err(Error::Domain("Lanczos on an empty operator".into()));
    }
    let steps = iters.clamp(1, n);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let v_norm = norm(&v);
    v.iter_mut().for_each(|x| *x /= v_norm);

    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut w = vec![0.0; n];

    for j in 0..steps {
        op.apply(&basis[j], &mut w)?;
        let a = dot(&basis[j], &w);
        alpha.push(a);
        // full reorthogonalization, two passes
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let b = norm(&w);
        if !b.is_finite() || !a.is_finite() {
            return Err(Error::Numerical("Lanczos produced a non-finite coefficient".into()));
        }
        if j + 1 == steps || b <= 1e-12 * a.abs().max(1e-300) {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }

    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let values = eig.eigenvalues.iter().copied();
    let value = match which {
        Extreme::Max => values.fold(f64::NEG_INFINITY, f64::max),
        Extreme::Min => values.fold(f64::INFINITY, f64::min),
    };
    Ok(value)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::Diagonal;

    #[test]
    fn diagonal_exact_after_dimension_steps() {
        let op = Diagonal(vec![1.0, 2.0, 10.0]);
        let max = lanczos_extreme(&op, Extreme::Max, 3, 7).unwrap();
        let min = lanczos_extreme(&op, Extreme::Min, 3, 7).unwrap();
        assert!((max - 10.0).abs() < 1e-8);
        assert!((min - 1.0).abs() < 1e-8);
    }

    #[test]
    fn identity_gives_one() {
        let op = Diagonal(vec![1.0; 25]);
        for which in [Extreme::Max, Extreme::Min] {
            let v = lanczos_extreme(&op, which, 10, 3).unwrap();
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn iterations_clamped_to_dimension() {
        let op = Diagonal(vec![3.0, 5.0]);
        let v = lanczos_extreme(&op, Extreme::Max, 100, 0).unwrap();
        assert!((v - 5.0).abs() < 1e-10);
    }

    #[test]
    fn deterministic_per_seed() {
        let op = Diagonal((1..=200).map(|i| (i as f64).sqrt()).collect());
        let a = lanczos_extreme(&op, Extreme::Max, 8, 42).unwrap();
        let b = lanczos_extreme(&op, Extreme::Max, 8, 42).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(a <= 200f64.sqrt() + 1e-12);
    }
}
