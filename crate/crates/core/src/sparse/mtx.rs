//! Matrix Market coordinate format. Indices are 1-based on disk.
//!
//! The reader accepts `real`, `integer` and `pattern` fields with `general`
//! or `symmetric` symmetry. The writer emits `symmetric` (lower triangle only)
//! when the matrix is exactly symmetric and `general` otherwise.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::SparseMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Real,
    Pattern,
}

pub fn parse(text: &str) -> Result<SparseMatrix> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Ingestion("empty Matrix Market file".into()))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::Ingestion(format!("bad Matrix Market header: {header}")));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::Ingestion("only coordinate format is supported".into()));
    }
    let field = match tokens[3].as_str() {
        "real" | "integer" | "double" => Field::Real,
        "pattern" => Field::Pattern,
        other => return Err(Error::Ingestion(format!("unsupported field type {other}"))),
    };
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(Error::Ingestion(format!("unsupported symmetry {other}"))),
    };

    let mut body = lines
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('%'));
    let size_line = body
        .next()
        .ok_or_else(|| Error::Ingestion("missing size line".into()))?;
    let sizes: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Ingestion(format!("bad size line '{size_line}': {e}")))?;
    if sizes.len() != 3 {
        return Err(Error::Ingestion(format!("bad size line '{size_line}'")));
    }
    let (n_rows, n_cols, nnz) = (sizes[0], sizes[1], sizes[2]);
    if symmetric && n_rows != n_cols {
        return Err(Error::Ingestion("symmetric matrix must be square".into()));
    }

    let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
    let mut seen = 0;
    for line in body {
        let mut it = line.split_whitespace();
        let parse_idx = |t: Option<&str>| -> Result<usize> {
            let t = t.ok_or_else(|| Error::Ingestion(format!("short entry line '{line}'")))?;
            let v: usize = t
                .parse()
                .map_err(|_| Error::Ingestion(format!("bad index in '{line}'")))?;
            if v == 0 {
                return Err(Error::Ingestion(format!("index 0 in 1-based file: '{line}'")));
            }
            Ok(v - 1)
        };
        let r = parse_idx(it.next())?;
        let c = parse_idx(it.next())?;
        let v = match field {
            Field::Pattern => 1.0,
            Field::Real => it
                .next()
                .ok_or_else(|| Error::Ingestion(format!("missing value in '{line}'")))?
                .parse::<f64>()
                .map_err(|_| Error::Ingestion(format!("bad value in '{line}'")))?,
        };
        if r >= n_rows || c >= n_cols {
            return Err(Error::Ingestion(format!("entry '{line}' outside declared size")));
        }
        triplets.push((r, c, v));
        if symmetric && r != c {
            triplets.push((c, r, v));
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(Error::Ingestion(format!("declared {nnz} entries, found {seen}")));
    }
    SparseMatrix::from_triplets(&triplets, n_rows, n_cols)
}

pub fn read(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text)
}

pub fn format(a: &SparseMatrix) -> String {
    let symmetric = a.is_symmetric();
    let entries: Vec<(usize, usize, f64)> = a
        .triplets()
        .into_iter()
        .filter(|&(i, j, _)| !symmetric || j <= i)
        .collect();
    let mut out = String::new();
    out.push_str(&format!(
        "%%MatrixMarket matrix coordinate real {}\n",
        if symmetric { "symmetric" } else { "general" }
    ));
    out.push_str(&format!("{} {} {}\n", a.n_rows(), a.n_cols(), entries.len()));
    for (i, j, v) in entries {
        // `{:e}` round-trips f64 exactly
        out.push_str(&format!("{} {} {:e}\n", i + 1, j + 1, v));
    }
    out
}

pub fn write(a: &SparseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(format(a).as_bytes()).map_err(io_err)
}
