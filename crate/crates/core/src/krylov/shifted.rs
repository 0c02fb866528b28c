use num_complex::Complex64;

use super::{dot, norm, LinearOperator, SolveReport};
use crate::error::{Error, Result};

/// Galerkin solutions of `(σ_j I − A) x_j = b` for many shifts from one
/// Lanczos basis of a real symmetric `A`: `x_j = V c_j`.
#[derive(Debug, Clone)]
pub struct ShiftedSolutions {
    /// Orthonormal Lanczos vectors.
    pub basis: Vec<Vec<f64>>,
    /// Coefficients of each `x_j` in `basis`.
    pub coefficients: Vec<Vec<Complex64>>,
    /// `iterations` and `matvec_count` are shared; the residual is the worst
    /// relative residual over all shifts.
    pub report: SolveReport,
}

impl ShiftedSolutions {
    /// `Σ_j a_j x_j`.
    pub fn combine(&self, a: &[Complex64]) -> Vec<Complex64> {
        let m = self.basis.len();
        let mut g = vec![Complex64::new(0.0, 0.0); m];
        for (aj, c) in a.iter().zip(&self.coefficients) {
            for (gi, ci) in g.iter_mut().zip(c) {
                *gi += aj * ci;
            }
        }
        let n = self.basis.first().map_or(0, Vec::len);
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (v, gi) in self.basis.iter().zip(&g) {
            for (o, &vi) in out.iter_mut().zip(v) {
                *o += gi * vi;
            }
        }
        out
    }
}

/// Multi-shift Lanczos (shifted FOM) with full reorthogonalization.
///
/// Krylov spaces are shift invariant, so one basis of `A` serves every
/// shift; each iteration costs one product with `A` no matter how many
/// shifts there are. The shifts must avoid the spectrum of `A`, which holds
/// for any shift off the real axis. Stops when every relative residual
/// `|β_m e_mᵀ c_j| / ‖b‖` is below `tol`.
pub fn shifted_lanczos_solve<Op>(
    op: &Op,
    b: &[f64],
    shifts: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> Result<ShiftedSolutions>
where
    Op: LinearOperator<f64> + ?Sized,
{
    let n = op.dim();
    if b.len() != n {
        return Err(Error::dim(n, b.len()));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let b_norm = norm(b);
    let mut report = SolveReport {
        residual_history: vec![b_norm],
        ..Default::default()
    };
    if b_norm == 0.0 {
        report.converged = true;
        return Ok(ShiftedSolutions {
            basis: Vec::new(),
            coefficients: vec![Vec::new(); shifts.len()],
            report,
        });
    }

    let mut basis = vec![b.iter().map(|v| v / b_norm).collect::<Vec<f64>>()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let steps = max_iter.clamp(1, n);
    loop {
        let m = basis.len();
        op.apply(&basis[m - 1], &mut w)?;
        report.matvec_count += 1;
        alpha.push(dot(&basis[m - 1], &w));
        // two passes of Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for v in &basis {
                let h = dot(v, &w);
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= h * vi);
            }
        }
        let beta_m = norm(&w);
        report.iterations = m;

        let coefficients: Vec<Vec<Complex64>> = shifts
            .iter()
            .map(|&s| tridiagonal_shifted_solve(s, &alpha, &beta, b_norm))
            .collect();
        let worst = coefficients
            .iter()
            .map(|c| beta_m * c[m - 1].norm() / b_norm)
            .fold(0.0, f64::max);
        report.residual_history.push(worst * b_norm);
        report.final_residual_norm = worst;

        let exhausted = beta_m <= 1e-14 * b_norm * alpha.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
        if worst <= tol || exhausted {
            report.converged = true;
            return Ok(ShiftedSolutions {
                basis,
                coefficients,
                report,
            });
        }
        if m >= steps {
            return Ok(ShiftedSolutions {
                basis,
                coefficients,
                report,
            });
        }
        if !coefficients.iter().flatten().all(|c| c.is_finite()) {
            return Err(Error::Numerical("shifted Lanczos produced non-finite coefficients".into()));
        }
        beta.push(beta_m);
        basis.push(w.iter().map(|v| v / beta_m).collect());
    }
}

/// `(σ I − T) c = ‖b‖ e_1` for the Lanczos tridiagonal `T`, by elimination
/// without pivoting. Leading blocks of `σI − T` are nonsingular whenever `σ`
/// is off the real interval spanned by the Ritz values.
fn tridiagonal_shifted_solve(s: Complex64, alpha: &[f64], beta: &[f64], b_norm: f64) -> Vec<Complex64> {
    let m = alpha.len();
    let mut diag: Vec<Complex64> = alpha.iter().map(|&a| s - a).collect();
    let mut rhs = vec![Complex64::new(0.0, 0.0); m];
    rhs[0] = Complex64::new(b_norm, 0.0);
    // off-diagonals of σI − T are −β
    for i in 1..m {
        let l = Complex64::new(-beta[i - 1], 0.0) / diag[i - 1];
        diag[i] -= l * -beta[i - 1];
        let prev = rhs[i - 1];
        rhs[i] -= l * prev;
    }
    let mut c = vec![Complex64::new(0.0, 0.0); m];
    c[m - 1] = rhs[m - 1] / diag[m - 1];
    for i in (0..m - 1).rev() {
        c[i] = (rhs[i] + beta[i] * c[i + 1]) / diag[i];
    }
    c
}
