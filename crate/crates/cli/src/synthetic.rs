//! The bundled two-view feature dataset under `data/synthetic`.
//!
//! 300 nodes in 3 classes (node `i` is in class `i mod 3`). View 1 sets
//! class 1 apart and blurs classes 2 and 3; view 2 sets class 3 apart and
//! blurs classes 1 and 2. Neither view alone separates all three classes.

use std::path::{Path, PathBuf};

use powerlap::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::output::write_file;
use crate::CliError;

pub const SEED: u64 = 20_190_601;
pub const NODES: usize = 300;
pub const CLASSES: usize = 3;
pub const DIMS: usize = 16;
pub const VIEW_FILES: [&str; 2] = ["view1.csv", "view2.csv"];
pub const LABEL_FILE: &str = "labels.csv";

/// Class-center scale per view: the distinct class gets a full center, the
/// other two share one and differ by a small offset.
const SPREAD: f64 = 1.5;
const BLUR: f64 = 0.5;

pub struct SyntheticDataset {
    pub views: Vec<DMatrix<f64>>,
    /// 0-based classes.
    pub truth: Vec<usize>,
}

pub fn generate(seed: u64) -> SyntheticDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<usize> = (0..NODES).map(|i| i % CLASSES).collect();
    let views = [0usize, 2]
        .iter()
        .map(|&distinct| {
            let shared: Vec<f64> = gaussian(&mut rng, DIMS, SPREAD);
            let centers: Vec<Vec<f64>> = (0..CLASSES)
                .map(|c| {
                    if c == distinct {
                        gaussian(&mut rng, DIMS, SPREAD)
                    } else {
                        let offset = gaussian(&mut rng, DIMS, BLUR);
                        shared.iter().zip(offset).map(|(a, b)| a + b).collect()
                    }
                })
                .collect();
            let noise = gaussian(&mut rng, NODES * DIMS, 1.0);
            DMatrix::from_fn(NODES, DIMS, |i, j| centers[truth[i]][j] + noise[i * DIMS + j])
        })
        .collect();
    SyntheticDataset { views, truth }
}

fn gaussian(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len)
        .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

/// Six decimals, so the files are stable text.
pub fn features_csv(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = String::new();
    let header: Vec<String> = (1..=m.ncols()).map(|j| format!("f{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.6}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

/// `node_id,class` with 1-based classes.
pub fn labels_csv(truth: &[usize]) -> Vec<u8> {
    let mut out = String::from("node_id,class\n");
    for (i, c) in truth.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", c + 1));
    }
    out.into_bytes()
}

/// Every file of the dataset as `(name, bytes)`.
pub fn files(seed: u64) -> Vec<(&'static str, Vec<u8>)> {
    let data = generate(seed);
    let mut out: Vec<(&'static str, Vec<u8>)> = VIEW_FILES
        .iter()
        .zip(&data.views)
        .map(|(name, v)| (*name, features_csv(v)))
        .collect();
    out.push((LABEL_FILE, labels_csv(&data.truth)));
    out
}

pub fn write(dir: &Path, seed: u64) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    files(seed)
        .into_iter()
        .map(|(name, bytes)| {
            let path = dir.join(name);
            write_file(&path, &bytes)?;
            Ok(path)
        })
        .collect()
}

/// Location of the bundled copy in the source tree.
pub fn bundled_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic")
}
