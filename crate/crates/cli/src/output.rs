//! Result tables: CSV with a JSON sidecar holding the config.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// One method at one grid cell, with every per-run error kept.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    /// `(name, value)` pairs locating the cell; same names in every row.
    pub coords: Vec<(String, String)>,
    pub method: String,
    /// `dense`, `matrix-free`, or `skipped`.
    pub path: String,
    pub errors: Vec<f64>,
    /// Seconds per run; only the timing experiment fills this.
    pub runtimes: Vec<f64>,
    pub note: String,
}

impl ResultRow {
    pub fn new(coords: Vec<(String, String)>, method: impl Into<String>, path: impl Into<String>) -> Self {
        Self {
            coords,
            method: method.into(),
            path: path.into(),
            errors: Vec::new(),
            runtimes: Vec::new(),
            note: String::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn mean_error(&self) -> Option<f64> {
        mean(&self.errors)
    }

    /// Sample standard deviation (n − 1); zero for a single run.
    pub fn std_error(&self) -> Option<f64> {
        std(&self.errors)
    }

    pub fn mean_runtime(&self) -> Option<f64> {
        mean(&self.runtimes)
    }

    pub fn std_runtime(&self) -> Option<f64> {
        std(&self.runtimes)
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn std(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    /// Coordinate column names, used for the header even when empty.
    pub coord_names: Vec<String>,
    pub rows: Vec<ResultRow>,
    /// Adds runtime columns.
    pub timed: bool,
}

impl ResultTable {
    pub fn new(coord_names: &[&str]) -> Self {
        Self {
            coord_names: coord_names.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            timed: false,
        }
    }

    pub fn timed(mut self) -> Self {
        self.timed = true;
        self
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = self.coord_names.clone();
        h.extend(["method", "path", "runs", "mean_error", "std_error"].map(String::from));
        if self.timed {
            h.extend(["mean_seconds", "std_seconds", "seconds"].map(String::from));
        }
        h.extend(["errors", "note"].map(String::from));
        h
    }

    /// CSV bytes. Floats use the shortest representation that round-trips.
    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header())?;
        for row in &self.rows {
            let names: Vec<&str> = row.coords.iter().map(|(n, _)| n.as_str()).collect();
            if names != self.coord_names.iter().map(String::as_str).collect::<Vec<_>>() {
                return Err(CliError::Config(format!("row coordinates {names:?} do not match the header")));
            }
            let mut rec: Vec<String> = row.coords.iter().map(|(_, v)| v.clone()).collect();
            rec.push(row.method.clone());
            rec.push(row.path.clone());
            rec.push(row.errors.len().to_string());
            rec.push(fmt_opt(row.mean_error()));
            rec.push(fmt_opt(row.std_error()));
            if self.timed {
                rec.push(fmt_opt(row.mean_runtime()));
                rec.push(fmt_opt(row.std_runtime()));
                rec.push(join(&row.runtimes));
            }
            rec.push(join(&row.errors));
            rec.push(row.note.clone());
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }

    /// First row matching all given coordinates and the method.
    pub fn find(&self, coords: &[(&str, &str)], method: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| {
            r.method == method
                && coords
                    .iter()
                    .all(|(n, v)| r.coords.iter().any(|(rn, rv)| rn == n && rv == v))
        })
    }
}

#[derive(Serialize)]
struct Sidecar<'a, C: Serialize> {
    experiment: &'a str,
    version: &'a str,
    seed: Option<u64>,
    config: &'a C,
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Write the table to `out` (or stdout) and, for files, the sidecar next to it.
pub fn emit<C: Serialize>(
    table: &ResultTable,
    out: Option<&Path>,
    experiment: &str,
    seed: Option<u64>,
    config: &C,
) -> Result<(), CliError> {
    let bytes = table.to_csv()?;
    match out {
        None => {
            std::io::stdout().write_all(&bytes).map_err(|e| CliError::Io(e.to_string()))?;
        }
        Some(path) => {
            write_file(path, &bytes)?;
            let sidecar = Sidecar {
                experiment,
                version: env!("CARGO_PKG_VERSION"),
                seed,
                config,
            };
            let mut json = serde_json::to_vec_pretty(&sidecar).map_err(|e| CliError::Io(e.to_string()))?;
            json.push(b'\n');
            write_file(&sidecar_path(path), &json)?;
        }
    }
    Ok(())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(errors: &[f64]) -> ResultRow {
        let mut r = ResultRow::new(vec![("gap".into(), "0.08".into())], "p=-1", "dense");
        r.errors = errors.to_vec();
        r
    }

    #[test]
    fn stats() {
        let r = row(&[0.1, 0.2, 0.3]);
        assert!((r.mean_error().unwrap() - 0.2).abs() < 1e-15);
        assert!((r.std_error().unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(row(&[0.4]).std_error(), Some(0.0));
        assert_eq!(row(&[]).mean_error(), None);
    }

    #[test]
    fn csv_round_trips_errors() {
        let mut t = ResultTable::new(&["gap"]);
        t.rows.push(row(&[0.1, 1.0 / 3.0]));
        t.rows.push(row(&[]).with_note("no unlabeled nodes"));
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let recs: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
        assert_eq!(&recs[0][3], "2");
        let parsed: Vec<f64> = recs[0][6].split(';').map(|s| s.parse().unwrap()).collect();
        assert_eq!(parsed, vec![0.1, 1.0 / 3.0]);
        assert_eq!(&recs[1][4], "");
        assert_eq!(&recs[1][7], "no unlabeled nodes");
    }

    #[test]
    fn empty_table_has_header() {
        let t = ResultTable::new(&["a", "b"]).timed();
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(text, "a,b,method,path,runs,mean_error,std_error,mean_seconds,std_seconds,seconds,errors,note\n");
    }

    #[test]
    fn mismatched_coords_rejected() {
        let mut t = ResultTable::new(&["other"]);
        t.rows.push(row(&[0.0]));
        assert!(t.to_csv().is_err());
    }
}
