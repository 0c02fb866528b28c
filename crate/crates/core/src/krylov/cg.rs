use super::{LinearOperator, Preconditioner, SolveReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Relative residual target, `‖b − A x‖ ≤ tol·‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

/// Preconditioned conjugate gradients for symmetric positive definite `op`.
///
/// Running out of iterations is not an error: the report comes back with
/// `converged = false`. A nonpositive curvature `pᵀAp ≤ 0` means `op` is not
/// positive definite and is reported as a numerical error.
pub fn pcg_solve<Op>(
    op: &Op,
    precond: Option<&dyn Preconditioner>,
    b: &[f64],
    opts: &CgOptions,
) -> Result<(Vec<f64>, SolveReport)>
where
    Op: LinearOperator<f64> + ?Sized,
{
    let n = op.dim();
    if b.len() != n {
        return Err(Error::dim(n, b.len()));
    }
    if let Some(m) = precond {
        if m.dim() != n {
            return Err(Error::dim(n, m.dim()));
        }
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {}", opts.tol)));
    }

    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    let mut report = SolveReport {
        residual_history: vec![b_norm],
        ..Default::default()
    };
    if b_norm == 0.0 {
        report.converged = true;
        return Ok((x, report));
    }
    let target = opts.tol * b_norm;

    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precondition(precond, &r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut r_norm = b_norm;

    while report.iterations < opts.max_iter {
        op.apply(&p, &mut q)?;
        report.matvec_count += 1;
        let curvature = dot(&p, &q);
        if !(curvature > 0.0) {
            return Err(Error::Numerical(format!(
                "PCG found nonpositive curvature pᵀAp = {curvature:e} at iteration {}; operator is not SPD",
                report.iterations
            )));
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        report.iterations += 1;
        r_norm = norm(&r);
        report.residual_history.push(r_norm);
        if !r_norm.is_finite() {
            return Err(Error::Numerical("PCG residual became non-finite".into()));
        }
        if r_norm <= target {
            break;
        }
        precondition(precond, &r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    report.final_residual_norm = r_norm;
    report.converged = r_norm <= target;
    Ok((x, report))
}

fn precondition(m: Option<&dyn Preconditioner>, r: &[f64], z: &mut [f64]) {
    match m {
        Some(m) => m.apply(r, z),
        None => z.copy_from_slice(r),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
