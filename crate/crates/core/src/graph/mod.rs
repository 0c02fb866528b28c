//! Multilayer graphs, normalized Laplacians and the diagonal shift.

mod io;
mod knn;

pub use io::{load_layers, load_multilayer, read_features, read_known_labels, read_labels, DatasetSpec};
pub use knn::{knn_graph, knn_graph_with, pearson_matrix, Symmetrization};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::sparse::SparseMatrix;

/// What to do with zero-degree nodes when building a Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsolatedNodes {
    /// Fail with [`Error::IsolatedNode`].
    #[default]
    Error,
    /// Give every isolated node a unit self-loop first. Nodes with positive
    /// degree are left untouched.
    SelfLoop,
}

/// `T` adjacency layers over a shared node set.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilayerGraph {
    n: usize,
    layers: Vec<SparseMatrix>,
    names: Vec<String>,
}

impl MultilayerGraph {
    /// Layers must be square, of equal size, exactly symmetric and
    /// nonnegative. Names default to `layer0`, `layer1`, ...
    pub fn new(layers: Vec<SparseMatrix>) -> Result<Self> {
        let names = (0..layers.len()).map(|i| format!("layer{i}")).collect();
        Self::with_names(layers, names)
    }

    pub fn with_names(layers: Vec<SparseMatrix>, names: Vec<String>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Input("a multilayer graph needs at least one layer".into()));
        }
        if names.len() != layers.len() {
            return Err(Error::Input(format!(
                "{} layer names for {} layers",
                names.len(),
                layers.len()
            )));
        }
        let n = layers[0].n_rows();
        for (t, w) in layers.iter().enumerate() {
            if !w.is_square() || w.n_rows() != n {
                return Err(Error::Input(format!(
                    "layer {t} is {}×{}, expected {n}×{n}",
                    w.n_rows(),
                    w.n_cols()
                )));
            }
            if !w.is_symmetric() {
                return Err(Error::Input(format!("layer {t} is not symmetric")));
            }
            if !w.is_nonnegative() {
                return Err(Error::Input(format!("layer {t} has negative weights")));
            }
        }
        Ok(Self { n, layers, names })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[SparseMatrix] {
        &self.layers
    }

    pub fn layer(&self, t: usize) -> &SparseMatrix {
        &self.layers[t]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// The graph restricted to a subset of layers, in the given order.
    pub fn select_layers(&self, which: &[usize]) -> Result<Self> {
        let mut layers = Vec::with_capacity(which.len());
        let mut names = Vec::with_capacity(which.len());
        for &t in which {
            if t >= self.layers.len() {
                return Err(Error::Input(format!("no layer {t} in a {}-layer graph", self.layers.len())));
            }
            layers.push(self.layers[t].clone());
            names.push(self.names[t].clone());
        }
        Self::with_names(layers, names)
    }

    /// Normalized Laplacian of every layer.
    pub fn laplacians(&self, policy: IsolatedNodes) -> Result<Vec<SparseMatrix>> {
        self.layers
            .iter()
            .map(|w| normalized_laplacian_with(w, policy))
            .collect()
    }

    /// `L_sym + εI` for every layer.
    pub fn shifted_laplacians(&self, shift: f64, policy: IsolatedNodes) -> Result<Vec<ShiftedLaplacian>> {
        self.laplacians(policy)?
            .into_iter()
            .map(|l| ShiftedLaplacian::new(l, shift))
            .collect()
    }
}

/// `L_sym + εI`, kept as the unshifted CSR plus the shift.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedLaplacian {
    base: SparseMatrix,
    shift: f64,
    // L_sym + εI materialized once for factorizations
    shifted: SparseMatrix,
}

impl ShiftedLaplacian {
    pub fn new(base: SparseMatrix, shift: f64) -> Result<Self> {
        if !(shift >= 0.0) || !shift.is_finite() {
            return Err(Error::Domain(format!("shift must be finite and nonnegative, got {shift}")));
        }
        if !base.is_square() {
            return Err(Error::Input("Laplacian must be square".into()));
        }
        let shifted = base.add_diagonal(shift)?;
        Ok(Self { base, shift, shifted })
    }

    pub fn base(&self) -> &SparseMatrix {
        &self.base
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `L_sym + εI` as a matrix.
    pub fn matrix(&self) -> &SparseMatrix {
        &self.shifted
    }

    pub fn dim(&self) -> usize {
        self.base.n_rows()
    }
}

impl LinearOperator<f64> for ShiftedLaplacian {
    fn dim(&self) -> usize {
        self.base.n_rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        LinearOperator::<f64>::apply(&self.shifted, x, y)
    }
}

impl LinearOperator<Complex64> for ShiftedLaplacian {
    fn dim(&self) -> usize {
        self.base.n_rows()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        LinearOperator::<Complex64>::apply(&self.shifted, x, y)
    }
}

/// `I − D^{-1/2} W D^{-1/2}`; isolated nodes are an error.
pub fn normalized_laplacian(w: &SparseMatrix) -> Result<SparseMatrix> {
    normalized_laplacian_with(w, IsolatedNodes::Error)
}

pub fn normalized_laplacian_with(w: &SparseMatrix, policy: IsolatedNodes) -> Result<SparseMatrix> {
    if !w.is_square() {
        return Err(Error::Input("adjacency must be square".into()));
    }
    if !w.is_nonnegative() {
        return Err(Error::Input("adjacency has negative weights".into()));
    }
    let n = w.n_rows();
    let mut degree = w.row_sums();
    let mut patched = None;
    if let Some(node) = degree.iter().position(|&d| d <= 0.0) {
        match policy {
            IsolatedNodes::Error => return Err(Error::IsolatedNode { node }),
            IsolatedNodes::SelfLoop => {
                let mut t = w.triplets();
                for (i, d) in degree.iter_mut().enumerate() {
                    if *d <= 0.0 {
                        t.push((i, i, 1.0));
                        *d = 1.0;
                    }
                }
                patched = Some(SparseMatrix::from_triplets(&t, n, n)?);
            }
        }
    }
    let w = patched.as_ref().unwrap_or(w);
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();

    let mut triplets = Vec::with_capacity(w.nnz() + n);
    for i in 0..n {
        triplets.push((i, i, 1.0));
        let (cols, vals) = w.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            triplets.push((i, j, -v * inv_sqrt[i] * inv_sqrt[j]));
        }
    }
    let l = SparseMatrix::from_triplets(&triplets, n, n)?;
    // the product above is not commutative in floating point; force exact symmetry
    Ok(symmetrize_upper(&l))
}

/// Copy the upper triangle onto the lower one so `Lᵀ == L` bit for bit.
fn symmetrize_upper(a: &SparseMatrix) -> SparseMatrix {
    let n = a.n_rows();
    let mut t = Vec::with_capacity(a.nnz());
    for (i, j, v) in a.triplets() {
        if j >= i {
            t.push((i, j, v));
            if j > i {
                t.push((j, i, v));
            }
        }
    }
    SparseMatrix::from_triplets(&t, n, n).expect("entries come from a valid matrix")
}

/// Diagonal shift applied to every Laplacian before taking the power `p`:
/// `log10(1 + |p|) + 1e-6` for `p ≤ 0`, and `0` for `p > 0`.
pub fn shift_for_p(p: f64) -> f64 {
    if p > 0.0 {
        0.0
    } else {
        (1.0 + p.abs()).log10() + 1e-6
    }
}
