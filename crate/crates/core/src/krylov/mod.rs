//! Iterative solvers and spectral estimation on abstract linear operators.
//!
//! Operators only need to provide `y = A x`; nothing here ever forms a matrix.
//! Solvers are pure functions of their operator, so concurrent solves on a
//! shared read-only operator are fine.

mod cg;
mod gmres;
mod ichol;
mod lanczos;
mod scalar;
mod shifted;

pub use cg::{pcg_solve, CgOptions};
pub use gmres::{gmres_solve, GmresOptions};
pub use ichol::{incomplete_cholesky, incomplete_cholesky_with_fill, IncompleteCholeskyFactor};
pub use lanczos::{lanczos_extreme, Extreme, LAMBDA_MAX_SAFETY};
pub use scalar::Scalar;
pub use shifted::{shifted_lanczos_solve, ShiftedSolutions};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// A linear map `x -> A x` on vectors of scalar type `S`.
///
/// `apply` is fallible because some operators (the shifted power sums in
/// [`crate::matfree`]) run inner solves that may fail to converge.
pub trait LinearOperator<S: Scalar = f64>: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[S], y: &mut [S]) -> Result<()>;
}

/// Approximate inverse used by PCG.
pub trait Preconditioner: Sync {
    fn dim(&self) -> usize;
    /// `z ≈ A^{-1} r`.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// Iteration statistics returned by every solver.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual_norm: f64,
    pub converged: bool,
    pub matvec_count: usize,
    /// Residual norm after each iteration, starting with `‖b‖`. For GMRES
    /// these are the rotated least-squares estimates within each cycle.
    pub residual_history: Vec<f64>,
}

impl LinearOperator<f64> for SparseMatrix {
    fn dim(&self) -> usize {
        self.n_rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n_cols() || y.len() != self.n_rows() {
            return Err(Error::dim(self.n_cols(), x.len()));
        }
        self.spmv_into(x, y);
        Ok(())
    }
}

impl LinearOperator<Complex64> for SparseMatrix {
    fn dim(&self) -> usize {
        self.n_rows()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        if x.len() != self.n_cols() || y.len() != self.n_rows() {
            return Err(Error::dim(self.n_cols(), x.len()));
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (&c, &v) in cols.iter().zip(vals) {
                acc += x[c] * v;
            }
            *yi = acc;
        }
        Ok(())
    }
}

/// Wraps a closure as an operator of fixed dimension.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<S, F> LinearOperator<S> for FnOperator<F>
where
    S: Scalar,
    F: Fn(&[S], &mut [S]) -> Result<()> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[S], y: &mut [S]) -> Result<()> {
        (self.f)(x, y)
    }
}

/// Diagonal operator, mostly useful in tests and as a Jacobi preconditioner.
#[derive(Debug, Clone)]
pub struct Diagonal(pub Vec<f64>);

impl<S: Scalar> LinearOperator<S> for Diagonal {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply(&self, x: &[S], y: &mut [S]) -> Result<()> {
        if x.len() != self.0.len() {
            return Err(Error::dim(self.0.len(), x.len()));
        }
        for ((yi, &xi), &d) in y.iter_mut().zip(x).zip(&self.0) {
            *yi = xi * S::from_real(d);
        }
        Ok(())
    }
}

impl Preconditioner for Diagonal {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, &ri), &d) in z.iter_mut().zip(r).zip(&self.0) {
            *zi = ri / d;
        }
    }
}

pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (&x, &y)| acc + x.conj() * y)
}

pub(crate) fn norm<S: Scalar>(a: &[S]) -> f64 {
    a.iter().map(|x| x.modulus_sqr()).sum::<f64>().sqrt()
}
