//! Dataset ingestion: adjacency layers from Matrix Market files, kNN layers
//! from feature CSVs, and ground-truth labels.
//!
//! CSV conventions: node ids are 0-based, class ids are 1-based (`1..=k`),
//! a header row is optional. Returned labels are 0-based classes.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::{knn_graph, MultilayerGraph};
use crate::error::{Error, Result};
use crate::sparse::mtx;

/// Files making up one multilayer dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetSpec {
    /// Adjacency layers, used as is.
    pub layers: Vec<PathBuf>,
    /// Feature views; each becomes one kNN layer.
    pub features: Vec<PathBuf>,
    /// Neighbour count for feature layers.
    pub knn_k: usize,
    /// `node_id,class` rows.
    pub labels: PathBuf,
}

/// Load every layer and the labels. Layers from `.mtx` files come first, then
/// one kNN layer per feature file, each named after its file stem.
pub fn load_multilayer(spec: &DatasetSpec) -> Result<(MultilayerGraph, Vec<usize>)> {
    let graph = load_layers(&spec.layers, &spec.features, spec.knn_k)?;
    let labels = read_labels(&spec.labels, graph.n())?;
    Ok((graph, labels))
}

/// The graph part of [`load_multilayer`], for callers with partial labels.
pub fn load_layers(layer_files: &[PathBuf], feature_files: &[PathBuf], knn_k: usize) -> Result<MultilayerGraph> {
    if layer_files.is_empty() && feature_files.is_empty() {
        return Err(Error::Input("dataset has neither layer nor feature files".into()));
    }
    let mut layers = Vec::new();
    let mut names = Vec::new();
    for path in layer_files {
        layers.push(mtx::read(path)?);
        names.push(stem(path));
    }
    for path in feature_files {
        let features = read_features(path)?;
        let w = knn_graph(&features, knn_k).map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))?;
        layers.push(w);
        names.push(stem(path));
    }
    let n = layers[0].n_rows();
    if let Some((t, w)) = layers.iter().enumerate().find(|(_, w)| w.n_rows() != n || w.n_cols() != n) {
        return Err(Error::Ingestion(format!(
            "layer {} ({}) is {}×{} but layer 0 has {n} nodes",
            t,
            names[t],
            w.n_rows(),
            w.n_cols()
        )));
    }
    MultilayerGraph::with_names(layers, names)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Ingestion(format!("{}: {e}", path.display()))
}

/// Dense feature matrix, one row per node.
pub fn read_features(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = open(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if line == 0 => continue, // header
            Err(e) => {
                return Err(Error::Ingestion(format!(
                    "{}: row {}: {e}",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    let d = rows.first().map(Vec::len).unwrap_or(0);
    if rows.is_empty() || d == 0 {
        return Err(Error::Ingestion(format!("{}: no feature rows", path.display())));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != d) {
        return Err(Error::Ingestion(format!(
            "{}: feature row {i} has {} columns, expected {d}",
            path.display(),
            rows[i].len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

/// Known labels for some of `n` nodes from `node_id,class` rows; nodes not
/// listed stay `None`.
pub fn read_known_labels(path: &Path, n: usize) -> Result<Vec<Option<usize>>> {
    let mut reader = open(path)?;
    let mut labels: Vec<Option<usize>> = vec![None; n];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != 2 {
            return Err(Error::Ingestion(format!(
                "{}: row {} should be node_id,class",
                path.display(),
                line + 1
            )));
        }
        let (node, class) = match (record[0].parse::<usize>(), record[1].parse::<i64>()) {
            (Ok(a), Ok(b)) => (a, b),
            _ if line == 0 => continue, // header
            _ => {
                return Err(Error::Ingestion(format!(
                    "{}: row {} is not a pair of integers",
                    path.display(),
                    line + 1
                )))
            }
        };
        if node >= n {
            return Err(Error::Ingestion(format!(
                "{}: node id {node} out of range for {n} nodes",
                path.display()
            )));
        }
        if class < 1 {
            return Err(Error::Ingestion(format!(
                "{}: unknown class id {class} for node {node}; classes are 1-based",
                path.display()
            )));
        }
        if labels[node].replace(class as usize - 1).is_some() {
            return Err(Error::Ingestion(format!("{}: node {node} labeled twice", path.display())));
        }
    }
    Ok(labels)
}

/// Ground truth for `n` nodes from `node_id,class` rows. Every node must
/// appear exactly once and every class in `1..=k` must be used.
pub fn read_labels(path: &Path, n: usize) -> Result<Vec<usize>> {
    let labels: Vec<usize> = read_known_labels(path, n)?
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::Ingestion(format!("{}: node {i} has no label", path.display()))))
        .collect::<Result<_>>()?;
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut used = vec![false; k];
    labels.iter().for_each(|&c| used[c] = true);
    if let Some(c) = used.iter().position(|u| !u) {
        return Err(Error::Ingestion(format!(
            "{}: class {} has no nodes although class {k} exists",
            path.display(),
            c + 1
        )));
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseMatrix;
    use std::fs;

    fn ring(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            t.push((i, j, 1.0));
            t.push((j, i, 1.0));
        }
        SparseMatrix::from_triplets(&t, n, n).unwrap()
    }

    #[test]
    fn two_mtx_layers_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.mtx");
        let b = dir.path().join("b.mtx");
        mtx::write(&ring(4), &a).unwrap();
        mtx::write(&SparseMatrix::from_dense(&DMatrix::from_element(4, 4, 1.0)), &b).unwrap();
        let labels = dir.path().join("labels.csv");
        fs::write(&labels, "node_id,class\n0,1\n1,1\n2,2\n3,2\n").unwrap();
        let spec = DatasetSpec {
            layers: vec![a, b],
            labels,
            ..Default::default()
        };
        let (g, truth) = load_multilayer(&spec).unwrap();
        assert_eq!(g.num_layers(), 2);
        assert_eq!(g.n(), 4);
        assert_eq!(g.names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(truth, vec![0, 0, 1, 1]);
    }

    #[test]
    fn feature_file_matches_in_memory_knn() {
        let dir = tempfile::tempdir().unwrap();
        let rows = [
            [1.0, 2.0, 0.5],
            [0.9, 2.1, 0.4],
            [3.0, 0.1, 1.0],
            [2.9, 0.0, 1.2],
            [0.2, 0.3, 4.0],
            [0.1, 0.5, 3.8],
        ];
        let text: String = rows.iter().map(|r| format!("{},{},{}\n", r[0], r[1], r[2])).collect();
        let path = dir.path().join("view.csv");
        fs::write(&path, text).unwrap();
        let labels = dir.path().join("labels.csv");
        fs::write(&labels, "0,1\n1,1\n2,2\n3,2\n4,3\n5,3\n").unwrap();
        let spec = DatasetSpec {
            features: vec![path],
            knn_k: 2,
            labels,
            ..Default::default()
        };
        let (g, truth) = load_multilayer(&spec).unwrap();
        let dense = DMatrix::from_fn(6, 3, |i, j| rows[i][j]);
        assert_eq!(g.layer(0), &knn_graph(&dense, 2).unwrap());
        assert_eq!(truth, vec![0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn mismatched_layer_sizes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.mtx");
        let b = dir.path().join("b.mtx");
        mtx::write(&ring(4), &a).unwrap();
        mtx::write(&ring(5), &b).unwrap();
        let labels = dir.path().join("l.csv");
        fs::write(&labels, "0,1\n1,1\n2,2\n3,2\n").unwrap();
        let spec = DatasetSpec {
            layers: vec![a, b],
            labels,
            ..Default::default()
        };
        assert!(matches!(load_multilayer(&spec), Err(Error::Ingestion(_))));
    }

    #[test]
    fn bad_labels_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.csv");
        for body in ["0,1\n1,0\n", "0,1\n0,2\n", "0,1\n", "0,1\n1,3\n", "0,1\n5,1\n", "0,x\n1,1\n"] {
            fs::write(&path, body).unwrap();
            assert!(read_labels(&path, 2).is_err(), "accepted {body:?}");
        }
    }

    #[test]
    fn partial_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("known.csv");
        fs::write(&path, "node_id,class\n3,2\n0,1\n").unwrap();
        assert_eq!(read_known_labels(&path, 5).unwrap(), vec![Some(0), None, None, Some(1), None]);
        assert!(read_labels(&path, 5).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_labels(Path::new("/nonexistent/labels.csv"), 3).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
