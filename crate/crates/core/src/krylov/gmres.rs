use super::{dot, norm, LinearOperator, Scalar, SolveReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    /// Relative residual target, `‖b − A x‖ ≤ tol·‖b‖`.
    pub tol: f64,
    /// Krylov subspace dimension before a restart.
    pub restart: usize,
    /// Cap on the total number of inner iterations across all cycles.
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            restart: 50,
            max_iter: 1000,
        }
    }
}

/// Restarted GMRES with Givens rotations and twice-applied modified
/// Gram-Schmidt, over real or complex scalars.
///
/// Each cycle ends with an explicit residual `b − A x`; convergence is
/// declared on that true residual, not on the rotated estimate. Hitting
/// `max_iter` returns `converged = false`. A Hessenberg breakdown that leaves
/// a residual above target means the operator is singular on the Krylov
/// space and is reported as a numerical error.
pub fn gmres_solve<S, Op>(op: &Op, b: &[S], opts: &GmresOptions) -> Result<(Vec<S>, SolveReport)>
where
    S: Scalar,
    Op: LinearOperator<S> + ?Sized,
{
    let n = op.dim();
    if b.len() != n {
        return Err(Error::dim(n, b.len()));
    }
    if opts.restart == 0 {
        return Err(Error::Domain("GMRES restart length must be at least 1".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {}", opts.tol)));
    }

    let b_norm = norm(b);
    let mut x = vec![S::zero(); n];
    let mut report = SolveReport {
        residual_history: vec![b_norm],
        ..Default::default()
    };
    if b_norm == 0.0 {
        report.converged = true;
        return Ok((x, report));
    }
    let target = opts.tol * b_norm;
    let m = opts.restart.min(n.max(1));

    let mut r = b.to_vec();
    let mut beta = b_norm;
    let mut w = vec![S::zero(); n];

    loop {
        if beta <= target {
            report.converged = true;
            break;
        }
        if report.iterations >= opts.max_iter {
            break;
        }

        let mut basis: Vec<Vec<S>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|&v| v * S::from_real(1.0 / beta)).collect());
        // column-major Hessenberg, h[j] holds column j (length j+2)
        let mut h: Vec<Vec<S>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<S> = Vec::with_capacity(m);
        let mut g = vec![S::zero(); m + 1];
        g[0] = S::from_real(beta);
        let mut breakdown = false;

        let mut j = 0;
        while j < m && report.iterations < opts.max_iter {
            op.apply(&basis[j], &mut w)?;
            report.matvec_count += 1;
            report.iterations += 1;

            let mut col = vec![S::zero(); j + 2];
            let w_norm_before = norm(&w);
            for _pass in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hij = dot(v, &w);
                    col[i] += hij;
                    for (wk, &vk) in w.iter_mut().zip(v) {
                        *wk -= hij * vk;
                    }
                }
            }
            let h_next = norm(&w);
            col[j + 1] = S::from_real(h_next);

            for i in 0..j {
                let (a, c) = (col[i], col[i + 1]);
                col[i] = a * S::from_real(cs[i]) + sn[i] * c;
                col[i + 1] = -(sn[i].conj()) * a + c * S::from_real(cs[i]);
            }
            let (c, s) = givens(col[j], col[j + 1]);
            col[j] = col[j] * S::from_real(c) + s * col[j + 1];
            col[j + 1] = S::zero();
            cs.push(c);
            sn.push(s);
            g[j + 1] = -(s.conj()) * g[j];
            g[j] = g[j] * S::from_real(c);
            h.push(col);

            let estimate = g[j + 1].modulus();
            report.residual_history.push(estimate);
            if !estimate.is_finite() {
                return Err(Error::Numerical("GMRES residual estimate became non-finite".into()));
            }
            j += 1;

            if h_next <= 1e-14 * w_norm_before.max(f64::MIN_POSITIVE) {
                breakdown = true;
                break;
            }
            basis.push(w.iter().map(|&v| v * S::from_real(1.0 / h_next)).collect());
            if estimate <= target {
                break;
            }
        }

        // back substitution on the rotated triangle
        let mut y = vec![S::zero(); j];
        for i in (0..j).rev() {
            let mut acc = g[i];
            for k in i + 1..j {
                acc -= h[k][i] * y[k];
            }
            let diag = h[i][i];
            if diag.modulus() == 0.0 {
                return Err(Error::Numerical(format!(
                    "GMRES Hessenberg is singular at column {i}"
                )));
            }
            y[i] = acc / diag;
        }
        for (v, &yi) in basis.iter().zip(&y) {
            for (xk, &vk) in x.iter_mut().zip(v) {
                *xk += yi * vk;
            }
        }

        op.apply(&x, &mut w)?;
        report.matvec_count += 1;
        for k in 0..n {
            r[k] = b[k] - w[k];
        }
        beta = norm(&r);
        if !beta.is_finite() {
            return Err(Error::Numerical("GMRES residual became non-finite".into()));
        }
        if breakdown && beta > target {
            return Err(Error::Numerical(format!(
                "GMRES breakdown after {} iterations with residual {:e} above target {:e}",
                report.iterations, beta, target
            )));
        }
    }
    report.final_residual_norm = beta;
    Ok((x, report))
}

/// Rotation `[c s; −s̄ c]` with real `c` mapping `(a, b)` to `(r, 0)`.
fn givens<S: Scalar>(a: S, b: S) -> (f64, S) {
    let (abs_a, abs_b) = (a.modulus(), b.modulus());
    if abs_b == 0.0 {
        return (1.0, S::zero());
    }
    if abs_a == 0.0 {
        return (0.0, S::from_real(1.0));
    }
    let t = abs_a.hypot(abs_b);
    let phase = a * S::from_real(1.0 / abs_a);
    (abs_a / t, phase * b.conj() * S::from_real(1.0 / t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{Diagonal, FnOperator};
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn complex_identity() {
        let b = vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0)];
        let (x, rep) = gmres_solve(&Diagonal(vec![1.0; 3]), &b, &GmresOptions::default()).unwrap();
        assert!(rep.converged);
        for i in 0..3 {
            assert!((x[i] - b[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn complex_scalar_shift() {
        let shift = c(4.0, 3.0);
        let op = FnOperator::new(3, move |x: &[Complex64], y: &mut [Complex64]| {
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = shift * xi;
            }
            Ok(())
        });
        let b = vec![c(1.0, 0.0); 3];
        let (x, rep) = gmres_solve(&op, &b, &GmresOptions::default()).unwrap();
        assert!(rep.converged);
        let expect = c(1.0, 0.0) / shift;
        for xi in x {
            assert!((xi - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn real_dense_system_matches_lu() {
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                4.0 + rng.gen::<f64>()
            } else {
                rng.gen_range(-0.2..0.2)
            }
        });
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let am = a.clone();
        let op = FnOperator::new(n, move |x: &[f64], y: &mut [f64]| {
            let v = &am * DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
            Ok(())
        });
        let (x, rep) = gmres_solve(&op, &b, &GmresOptions { restart: 10, ..Default::default() }).unwrap();
        assert!(rep.converged);
        let exact = a.lu().solve(&DVector::from_column_slice(&b)).unwrap();
        let diff = (DVector::from_vec(x) - &exact).norm();
        assert!(diff <= 1e-7 * exact.norm());
        assert!(rep.final_residual_norm <= 1e-8 * DVector::from_column_slice(&b).norm());
    }

    #[test]
    fn residual_estimates_nonincreasing_within_cycle() {
        let d: Vec<f64> = (1..=60).map(|i| 1.0 + i as f64 * 0.3).collect();
        let b = vec![1.0; 60];
        let opts = GmresOptions { restart: 100, tol: 1e-10, max_iter: 100 };
        let (_, rep) = gmres_solve(&Diagonal(d), &b, &opts).unwrap();
        assert!(rep.converged);
        for w in rep.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn singular_operator_breakdown_errors() {
        // b has a component in the null space: no solution exists
        let op = Diagonal(vec![1.0, 0.0]);
        let err = gmres_solve(&op, &[1.0, 1.0], &GmresOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let d: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let opts = GmresOptions { restart: 5, tol: 1e-12, max_iter: 7 };
        let (_, rep) = gmres_solve(&Diagonal(d), &vec![1.0; 100], &opts).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 7);
    }

    #[test]
    fn zero_restart_rejected() {
        let opts = GmresOptions { restart: 0, ..Default::default() };
        assert!(gmres_solve(&Diagonal(vec![1.0]), &[1.0], &opts).is_err());
    }
}
