//! Threshold incomplete Cholesky, `A ≈ L̃ L̃ᵀ`.
//!
//! Rows of the upper factor `U = D L̃ᵀ`-style are produced in order; row `i`
//! is the sparse combination `A[i, i..] − Σ_k (U_ki / U_kk) U[k, i..]` over the
//! already-finished rows `k` with `U_ki ≠ 0`. Off-diagonal entries smaller
//! than `drop_tol · ‖A[i, :]‖₂` are dropped. An optional fill cap keeps only
//! the largest entries of each row.

use super::Preconditioner;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone)]
pub struct IncompleteCholeskyFactor {
    lower: SparseMatrix,
    upper: SparseMatrix,
    drop_tol: f64,
}

impl IncompleteCholeskyFactor {
    /// `L̃`: lower triangular, positive diagonal stored last in each row.
    pub fn lower(&self) -> &SparseMatrix {
        &self.lower
    }

    pub fn drop_tol(&self) -> f64 {
        self.drop_tol
    }

    pub fn nnz(&self) -> usize {
        self.lower.nnz()
    }

    /// Solve `L̃ L̃ᵀ z = r`.
    pub fn solve_into(&self, r: &[f64], z: &mut [f64]) {
        let n = self.lower.n_rows();
        // forward: L̃ y = r
        for i in 0..n {
            let (cols, vals) = self.lower.row(i);
            let last = cols.len() - 1;
            let mut acc = r[i];
            for k in 0..last {
                acc -= vals[k] * z[cols[k]];
            }
            z[i] = acc / vals[last];
        }
        // backward: L̃ᵀ z = y
        for i in (0..n).rev() {
            let (cols, vals) = self.upper.row(i);
            let mut acc = z[i];
            for k in 1..cols.len() {
                acc -= vals[k] * z[cols[k]];
            }
            z[i] = acc / vals[0];
        }
    }
}

impl Preconditioner for IncompleteCholeskyFactor {
    fn dim(&self) -> usize {
        self.lower.n_rows()
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.solve_into(r, z);
    }
}

/// Incomplete Cholesky with threshold dropping and unlimited fill.
/// `drop_tol = 0` gives the exact Cholesky factor.
pub fn incomplete_cholesky(a: &SparseMatrix, drop_tol: f64) -> Result<IncompleteCholeskyFactor> {
    incomplete_cholesky_with_fill(a, drop_tol, None)
}

/// As [`incomplete_cholesky`], but each row of the factor keeps at most its
/// original upper-triangle entry count plus `max_fill` extra entries.
pub fn incomplete_cholesky_with_fill(
    a: &SparseMatrix,
    drop_tol: f64,
    max_fill: Option<usize>,
) -> Result<IncompleteCholeskyFactor> {
    if !a.is_square() {
        return Err(Error::Input("incomplete Cholesky needs a square matrix".into()));
    }
    if !(drop_tol >= 0.0) {
        return Err(Error::Domain(format!("drop tolerance must be nonnegative, got {drop_tol}")));
    }
    let n = a.n_rows();

    // rows[i] = (col, value) with the pivot first
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    // cols[j] = (k, position of column j inside rows[k]) for finished rows k < j
    let mut cols: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut work = vec![0.0f64; n];
    let mut in_pattern = vec![false; n];
    let mut pattern: Vec<usize> = Vec::new();

    for i in 0..n {
        let (acols, avals) = a.row(i);
        let row_norm = avals.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut original_upper = 0usize;
        for (&c, &v) in acols.iter().zip(avals) {
            if c >= i {
                work[c] = v;
                in_pattern[c] = true;
                pattern.push(c);
                if c > i {
                    original_upper += 1;
                }
            }
        }
        if !in_pattern[i] {
            in_pattern[i] = true;
            pattern.push(i);
        }

        for &(k, pos) in &cols[i] {
            let row_k = &rows[k];
            let factor = row_k[pos].1 / row_k[0].1;
            for &(j, ukj) in &row_k[pos..] {
                if !in_pattern[j] {
                    in_pattern[j] = true;
                    pattern.push(j);
                }
                work[j] -= factor * ukj;
            }
        }

        let pivot = work[i];
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::Factorization { row: i, pivot });
        }
        let threshold = drop_tol * row_norm;
        let mut kept: Vec<(usize, f64)> = pattern
            .iter()
            .filter(|&&j| j > i)
            .map(|&j| (j, work[j]))
            .filter(|&(_, v)| v != 0.0 && v.abs() >= threshold)
            .collect();
        if let Some(extra) = max_fill {
            let cap = original_upper + extra;
            if kept.len() > cap {
                kept.sort_by(|x, y| y.1.abs().total_cmp(&x.1.abs()).then(x.0.cmp(&y.0)));
                kept.truncate(cap);
            }
        }
        kept.sort_unstable_by_key(|&(j, _)| j);

        for &j in &pattern {
            work[j] = 0.0;
            in_pattern[j] = false;
        }
        pattern.clear();

        let mut row = Vec::with_capacity(kept.len() + 1);
        row.push((i, pivot));
        row.extend(kept);
        for (pos, &(j, _)) in row.iter().enumerate().skip(1) {
            cols[j].push((i, pos));
        }
        rows.push(row);
    }

    // scale U rows by 1/sqrt(pivot) to get L̃ᵀ
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for row in &rows {
        let s = row[0].1.sqrt();
        for &(j, v) in row {
            col_idx.push(j);
            values.push(v / s);
        }
        row_ptr.push(col_idx.len());
    }
    let upper = SparseMatrix::from_csr(n, n, row_ptr, col_idx, values)?;
    let lower = upper.transpose();
    Ok(IncompleteCholeskyFactor {
        lower,
        upper,
        drop_tol,
    })
}
