//! Matrix-free solve of `(I + λ L_p) f = C y` for negative integer `p`.
//!
//! `L_p = T^{-1/p} S_p^{1/p}` with `S_p = Σ_i A_i^p` and `A_i = L_sym^{(i)} + εI`.
//! Nothing dense is ever formed:
//!
//! * `S_p y` costs `|p|` preconditioned CG solves per layer;
//! * `S_p^{1/p} y` is a contour quadrature over `N` shifted systems
//!   `(z_j² I − S_p) x_j = y`, each solved by complex GMRES, or all at once
//!   from a single Lanczos basis of `S_p` ([`ShiftedSolver::Lanczos`]);
//! * the outer system is solved by GMRES, one class at a time.
//!
//! Incomplete Cholesky factors of the `A_i` are computed once and shared by
//! every inner solve. Partial results are always summed in index order, so the
//! concurrent mode returns the same bits as the sequential one.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::elliptic::{contour_coefficients, num_contour_points, select_contour_points, ContourQuadrature};
use crate::error::{Error, Result};
use crate::graph::{shift_for_p, IsolatedNodes, MultilayerGraph, ShiftedLaplacian};
use crate::krylov::{
    gmres_solve, incomplete_cholesky_with_fill, lanczos_extreme, pcg_solve, CgOptions, Extreme, FnOperator,
    GmresOptions, IncompleteCholeskyFactor, LinearOperator, Preconditioner, SolveReport, LAMBDA_MAX_SAFETY,
    shifted_lanczos_solve,
};
use crate::powermean::{LabelingProblem, LabelingResult};

/// How the number of quadrature nodes is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodeCount {
    /// Smallest `N` whose scalar error on `[m, M]` is within tolerance.
    #[default]
    Verified,
    /// The closed-form rate estimate, unchecked.
    Formula,
    Fixed(usize),
}

/// Method for the shifted systems `(z_j² I − S_p) x_j = y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftedSolver {
    /// Unpreconditioned complex GMRES, one run per node.
    #[default]
    Gmres,
    /// One multi-shift Lanczos run shared by all nodes. Costs about `1/2N`
    /// of the GMRES variant in `S_p` products.
    Lanczos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFreeConfig {
    /// Target relative accuracy of the quadrature.
    pub tau: f64,
    pub node_count: NodeCount,
    pub shifted_solver: ShiftedSolver,
    pub outer: GmresOptions,
    /// Tolerance and iteration cap for the shifted systems; `restart` only
    /// matters for GMRES.
    pub shifted: GmresOptions,
    /// PCG with `A_i`.
    pub inner: CgOptions,
    pub ic_drop_tol: f64,
    /// Per-row cap on kept entries in the IC factor, beyond the original
    /// pattern.
    pub ic_fill: Option<usize>,
    pub lanczos_iters: usize,
    pub lanczos_seed: u64,
    pub isolated: IsolatedNodes,
    /// Run independent inner solves on the rayon pool.
    pub concurrent: bool,
}

impl Default for MatrixFreeConfig {
    fn default() -> Self {
        Self {
            tau: 1e-8,
            node_count: NodeCount::Verified,
            shifted_solver: ShiftedSolver::Gmres,
            outer: GmresOptions {
                tol: 1e-8,
                restart: 50,
                max_iter: 500,
            },
            shifted: GmresOptions {
                tol: 1e-10,
                restart: 60,
                max_iter: 600,
            },
            inner: CgOptions {
                tol: 1e-12,
                max_iter: 1000,
            },
            ic_drop_tol: 1e-4,
            ic_fill: Some(0),
            lanczos_iters: 40,
            lanczos_seed: 0x5eed,
            isolated: IsolatedNodes::Error,
            concurrent: false,
        }
    }
}

impl MatrixFreeConfig {
    pub fn validate(&self) -> Result<()> {
        let tols = [
            ("tau", self.tau),
            ("outer tolerance", self.outer.tol),
            ("shifted tolerance", self.shifted.tol),
            ("inner tolerance", self.inner.tol),
        ];
        for (name, t) in tols {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Domain(format!("{name} must lie in (0, 1), got {t}")));
            }
        }
        if !(self.ic_drop_tol >= 0.0) {
            return Err(Error::Domain(format!("IC drop tolerance must be nonnegative, got {}", self.ic_drop_tol)));
        }
        if self.node_count == NodeCount::Fixed(0) {
            return Err(Error::Domain("quadrature needs at least one node".into()));
        }
        Ok(())
    }
}

/// Bounds `m ≤ λ_min(S_p)`, `M ≥ λ_max(S_p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    pub m: f64,
    pub big_m: f64,
}

fn check_power(p: i32) -> Result<usize> {
    if p >= 0 {
        return Err(Error::Domain(format!("the matrix-free path needs a negative integer p, got {p}")));
    }
    Ok(p.unsigned_abs() as usize)
}

/// Integer `p` from a real one, if it is a negative integer.
pub fn negative_integer_power(p: f64) -> Result<i32> {
    if p < 0.0 && p.fract() == 0.0 && p >= i32::MIN as f64 {
        Ok(p as i32)
    } else {
        Err(Error::Domain(format!("the matrix-free path needs a negative integer p, got {p}")))
    }
}

fn ic_factors(layers: &[ShiftedLaplacian], config: &MatrixFreeConfig) -> Result<Vec<IncompleteCholeskyFactor>> {
    layers
        .iter()
        .enumerate()
        .map(|(i, a)| {
            incomplete_cholesky_with_fill(a.matrix(), config.ic_drop_tol, config.ic_fill)
                .map_err(|e| e.context(&format!("preconditioner for layer {i}")))
        })
        .collect()
}

fn check_layers(layers: &[ShiftedLaplacian], factors: &[IncompleteCholeskyFactor]) -> Result<usize> {
    let n = layers
        .first()
        .map(ShiftedLaplacian::dim)
        .ok_or_else(|| Error::Input("no layers".into()))?;
    if factors.len() != layers.len() {
        return Err(Error::dim(layers.len(), factors.len()));
    }
    if let Some(a) = layers.iter().find(|a| a.dim() != n) {
        return Err(Error::dim(n, a.dim()));
    }
    Ok(n)
}

/// `A^{-steps} y` by repeated PCG.
fn inverse_power(
    a: &ShiftedLaplacian,
    factor: &IncompleteCholeskyFactor,
    steps: usize,
    y: &[f64],
    inner: &CgOptions,
    layer: usize,
) -> Result<Vec<f64>> {
    let mut u = y.to_vec();
    for step in 0..steps {
        let (x, report) = pcg_solve(a, Some(factor as &dyn Preconditioner), &u, inner)?;
        if !report.converged {
            return Err(Error::Numerical(format!(
                "inner CG on layer {layer}, power step {} of {steps}: residual {:e} after {} iterations",
                step + 1,
                report.final_residual_norm,
                report.iterations
            )));
        }
        u = x;
    }
    Ok(u)
}

/// `S_p y = Σ_i A_i^p y` for negative integer `p`.
pub fn apply_s_p(
    layers: &[ShiftedLaplacian],
    p: i32,
    y: &[f64],
    factors: &[IncompleteCholeskyFactor],
    inner: &CgOptions,
) -> Result<Vec<f64>> {
    apply_s_p_with(layers, p, y, factors, inner, false)
}

fn apply_s_p_with(
    layers: &[ShiftedLaplacian],
    p: i32,
    y: &[f64],
    factors: &[IncompleteCholeskyFactor],
    inner: &CgOptions,
    concurrent: bool,
) -> Result<Vec<f64>> {
    let steps = check_power(p)?;
    let n = check_layers(layers, factors)?;
    if y.len() != n {
        return Err(Error::dim(n, y.len()));
    }
    let term = |i: usize| inverse_power(&layers[i], &factors[i], steps, y, inner, i);
    let terms: Vec<Vec<f64>> = if concurrent {
        (0..layers.len()).into_par_iter().map(term).collect::<Result<_>>()?
    } else {
        (0..layers.len()).map(term).collect::<Result<_>>()?
    };
    let mut out = vec![0.0; n];
    for t in &terms {
        out.iter_mut().zip(t).for_each(|(o, v)| *o += v);
    }
    Ok(out)
}

/// Lower bound from `λ_min(Σ A_i^p) ≥ Σ λ_max(A_i)^p`, upper bound from
/// Lanczos on `S_p`. Both Lanczos estimates are inflated by
/// [`LAMBDA_MAX_SAFETY`] since Ritz values approach `λ_max` from below.
pub fn estimate_spectral_bounds(
    layers: &[ShiftedLaplacian],
    p: i32,
    factors: &[IncompleteCholeskyFactor],
    config: &MatrixFreeConfig,
) -> Result<SpectralBounds> {
    check_power(p)?;
    let n = check_layers(layers, factors)?;
    let mut m = 0.0;
    for (i, a) in layers.iter().enumerate() {
        let top = lanczos_extreme(a, Extreme::Max, config.lanczos_iters, config.lanczos_seed)
            .map_err(|e| e.context(&format!("λ_max of layer {i}")))?;
        if !(top > 0.0) {
            return Err(Error::Numerical(format!("layer {i} has nonpositive λ_max estimate {top}")));
        }
        m += (top * LAMBDA_MAX_SAFETY).powi(p);
    }
    let op = FnOperator::new(n, |x: &[f64], y: &mut [f64]| {
        let v = apply_s_p_with(layers, p, x, factors, &config.inner, config.concurrent)?;
        y.copy_from_slice(&v);
        Ok(())
    });
    let top = lanczos_extreme(&op, Extreme::Max, config.lanczos_iters, config.lanczos_seed)
        .map_err(|e| e.context("λ_max of S_p"))?;
    // a spectrum collapsed to one point still needs a nondegenerate interval
    let big_m = (top * LAMBDA_MAX_SAFETY).max(m * LAMBDA_MAX_SAFETY);
    Ok(SpectralBounds { m, big_m })
}

/// `L_p y` by the contour quadrature `q` built for the bounds of `S_p`.
pub fn apply_l_p(
    layers: &[ShiftedLaplacian],
    p: i32,
    y: &[f64],
    quadrature: &ContourQuadrature,
    factors: &[IncompleteCholeskyFactor],
    config: &MatrixFreeConfig,
) -> Result<Vec<f64>> {
    let op = MatrixFreeLp {
        layers: layers.to_vec(),
        factors: factors.to_vec(),
        p,
        bounds: {
            let (m, big_m) = quadrature.bounds();
            SpectralBounds { m, big_m }
        },
        quadrature: quadrature.clone(),
        config: config.clone(),
        inner_solves: AtomicUsize::new(0),
    };
    op.apply_l_p(y)
}

/// Everything needed to apply `L_p` to many vectors: layers, IC factors,
/// spectral bounds and the quadrature.
#[derive(Debug)]
pub struct MatrixFreeLp {
    layers: Vec<ShiftedLaplacian>,
    factors: Vec<IncompleteCholeskyFactor>,
    p: i32,
    bounds: SpectralBounds,
    quadrature: ContourQuadrature,
    config: MatrixFreeConfig,
    inner_solves: AtomicUsize,
}

impl MatrixFreeLp {
    /// Shift by `shift_for_p(p)`, factor, bound the spectrum and pick the
    /// quadrature.
    pub fn new(graph: &MultilayerGraph, p: i32, config: &MatrixFreeConfig) -> Result<Self> {
        check_power(p)?;
        let layers = graph
            .shifted_laplacians(shift_for_p(p as f64), config.isolated)
            .map_err(|e| e.context("Laplacians"))?;
        Self::from_layers(layers, p, config)
    }

    /// Same as [`Self::new`] on explicit SPD layers `A_i`.
    pub fn from_layers(layers: Vec<ShiftedLaplacian>, p: i32, config: &MatrixFreeConfig) -> Result<Self> {
        check_power(p)?;
        config.validate()?;
        let factors = ic_factors(&layers, config)?;
        let bounds = estimate_spectral_bounds(&layers, p, &factors, config).map_err(|e| e.context("spectral bounds"))?;
        let n = match config.node_count {
            NodeCount::Verified => select_contour_points(bounds.m, bounds.big_m, p, config.tau),
            NodeCount::Formula => num_contour_points(bounds.m, bounds.big_m, config.tau),
            NodeCount::Fixed(n) => Ok(n),
        }
        .map_err(|e| e.context("quadrature size"))?;
        let quadrature =
            contour_coefficients(bounds.m, bounds.big_m, n, p).map_err(|e| e.context("quadrature coefficients"))?;
        Ok(Self {
            layers,
            factors,
            p,
            bounds,
            quadrature,
            config: config.clone(),
            inner_solves: AtomicUsize::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.layers[0].dim()
    }

    pub fn p(&self) -> i32 {
        self.p
    }

    pub fn bounds(&self) -> SpectralBounds {
        self.bounds
    }

    pub fn quadrature(&self) -> &ContourQuadrature {
        &self.quadrature
    }

    pub fn layers(&self) -> &[ShiftedLaplacian] {
        &self.layers
    }

    pub fn factors(&self) -> &[IncompleteCholeskyFactor] {
        &self.factors
    }

    /// Number of `S_p` applications so far.
    pub fn s_p_applications(&self) -> usize {
        self.inner_solves.load(Ordering::Relaxed)
    }

    pub fn apply_s_p(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.inner_solves.fetch_add(1, Ordering::Relaxed);
        apply_s_p_with(&self.layers, self.p, y, &self.factors, &self.config.inner, self.config.concurrent)
    }

    /// `S_p` on a complex vector, as two real applications.
    pub fn apply_s_p_complex(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        let re: Vec<f64> = y.iter().map(|c| c.re).collect();
        let im: Vec<f64> = y.iter().map(|c| c.im).collect();
        let a = self.apply_s_p(&re)?;
        let b = if im.iter().all(|&v| v == 0.0) { vec![0.0; im.len()] } else { self.apply_s_p(&im)? };
        Ok(a.into_iter().zip(b).map(|(r, i)| Complex64::new(r, i)).collect())
    }

    fn shifted_solve(&self, j: usize, y: &[Complex64]) -> Result<Vec<Complex64>> {
        let z2 = self.quadrature.nodes()[j].powi(2);
        let op = FnOperator::new(self.dim(), |x: &[Complex64], out: &mut [Complex64]| {
            let s = self.apply_s_p_complex(x)?;
            for ((o, &xi), si) in out.iter_mut().zip(x).zip(s) {
                *o = z2 * xi - si;
            }
            Ok(())
        });
        let (x, report) = gmres_solve(&op, y, &self.config.shifted).map_err(|e| e.context(&format!("shifted system {j}")))?;
        if !report.converged {
            return Err(Error::Numerical(format!(
                "shifted system {j} (z² = {z2:.4}): residual {:e} after {} iterations",
                report.final_residual_norm, report.iterations
            )));
        }
        Ok(x)
    }

    /// `Im Σ_j w_j x_j` with one GMRES run per node.
    fn weighted_sum_gmres(&self, y: &[f64]) -> Result<Vec<f64>> {
        let yc: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let nodes = self.quadrature.len();
        let solve = |j: usize| self.shifted_solve(j, &yc);
        let parts: Vec<Vec<Complex64>> = if self.config.concurrent {
            (0..nodes).into_par_iter().map(solve).collect::<Result<_>>()?
        } else {
            (0..nodes).map(solve).collect::<Result<_>>()?
        };
        let mut acc = vec![0.0; y.len()];
        for (w, x) in self.quadrature.weights().iter().zip(&parts) {
            for (a, xi) in acc.iter_mut().zip(x) {
                *a += (w * xi).im;
            }
        }
        Ok(acc)
    }

    /// `Im Σ_j w_j x_j` from one Lanczos basis of `S_p`.
    fn weighted_sum_lanczos(&self, y: &[f64]) -> Result<Vec<f64>> {
        let shifts: Vec<Complex64> = self.quadrature.nodes().iter().map(|z| z * z).collect();
        let op = FnOperator::new(self.dim(), |x: &[f64], out: &mut [f64]| {
            out.copy_from_slice(&self.apply_s_p(x)?);
            Ok(())
        });
        let sol = shifted_lanczos_solve(&op, y, &shifts, self.config.shifted.tol, self.config.shifted.max_iter)
            .map_err(|e| e.context("shifted systems"))?;
        if !sol.report.converged {
            return Err(Error::Numerical(format!(
                "shifted systems: worst residual {:e} after {} Lanczos steps",
                sol.report.final_residual_norm, sol.report.iterations
            )));
        }
        Ok(sol.combine(self.quadrature.weights()).iter().map(|c| c.im).collect())
    }

    /// `L_p y ≈ T^{-1/p} · c · S_p Im Σ_j w_j (z_j² I − S_p)^{-1} y`.
    pub fn apply_l_p(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if y.len() != n {
            return Err(Error::dim(n, y.len()));
        }
        let acc = match self.config.shifted_solver {
            ShiftedSolver::Gmres => self.weighted_sum_gmres(y)?,
            ShiftedSolver::Lanczos => self.weighted_sum_lanczos(y)?,
        };
        let s = self.apply_s_p(&acc)?;
        let t = self.layers.len() as f64;
        let scale = self.quadrature.prefactor() * t.powf(-1.0 / self.p as f64);
        let out: Vec<f64> = s.into_iter().map(|v| v * scale).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite entries in L_p y".into()));
        }
        Ok(out)
    }

    /// `(I + λ L_p)` as an operator.
    pub fn regularized(&self, lambda: f64) -> impl LinearOperator<f64> + '_ {
        FnOperator::new(self.dim(), move |x: &[f64], y: &mut [f64]| {
            let l = self.apply_l_p(x)?;
            for ((yi, &xi), li) in y.iter_mut().zip(x).zip(l) {
                *yi = xi + lambda * li;
            }
            Ok(())
        })
    }

    /// Solve `(I + λ L_p) f^{(r)} = C y^{(r)}` for every class.
    pub fn solve(&self, problem: &LabelingProblem) -> Result<LabelingResult> {
        if problem.n() != self.dim() {
            return Err(Error::dim(self.dim(), problem.n()));
        }
        if negative_integer_power(problem.p())? != self.p {
            return Err(Error::Input(format!(
                "problem has p = {} but the operator was built for p = {}",
                problem.p(),
                self.p
            )));
        }
        let op = self.regularized(problem.lambda());
        let mut f = DMatrix::zeros(problem.n(), problem.k());
        let mut reports: Vec<SolveReport> = Vec::with_capacity(problem.k());
        for r in 0..problem.k() {
            let rhs = problem.rhs(r);
            let (x, report) =
                gmres_solve(&op, &rhs, &self.config.outer).map_err(|e| e.context(&format!("outer solve, class {r}")))?;
            if !report.converged {
                return Err(Error::Numerical(format!(
                    "outer solve, class {r}: residual {:e} after {} iterations",
                    report.final_residual_norm, report.iterations
                )));
            }
            f.set_column(r, &nalgebra::DVector::from_vec(x));
            reports.push(report);
        }
        problem.finish(f, reports)
    }
}

/// Factor, bound, pick `N`, build the quadrature, then run the outer solves.
pub fn matfree_ssl_solve(
    graph: &MultilayerGraph,
    problem: &LabelingProblem,
    config: &MatrixFreeConfig,
) -> Result<LabelingResult> {
    let p = negative_integer_power(problem.p())?;
    MatrixFreeLp::new(graph, p, config)?.solve(problem)
}
