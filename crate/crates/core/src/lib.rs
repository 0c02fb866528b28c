//! Semi-supervised learning on multilayer graphs with the power mean Laplacian.
//!
//! The library has two solution paths for `(I + λ L_p) f = C y`:
//!
//! * [`powermean`]: dense. Builds `L_p` by eigendecomposition and solves with
//!   Cholesky. Works for every real `p` but costs `O(n³)`.
//! * [`matfree`]: matrix-free, for negative integer `p`. Applies `L_p` via a
//!   contour quadrature of `z^{1/p}` ([`elliptic`]) whose shifted systems are
//!   solved with Krylov methods ([`krylov`]).
//!
//! [`msbm`] samples multilayer stochastic block models and evaluates the
//! expected-case closed forms used as test oracles.

pub mod elliptic;
pub mod error;
pub mod graph;
pub mod krylov;
pub mod matfree;
pub mod msbm;
pub mod powermean;
pub mod sparse;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};
pub use sparse::{ComplexVector, SparseMatrix};
