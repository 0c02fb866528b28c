use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use powerlap_cli::synthetic;

fn powerlap(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_powerlap"));
    cmd.args(args);
    match workers {
        Some(w) => cmd.env(powerlap_cli::WORKERS_ENV, w),
        None => cmd.env_remove(powerlap_cli::WORKERS_ENV),
    };
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn data(name: &str) -> PathBuf {
    synthetic::bundled_dir().join(name)
}

fn records(csv_text: &str) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut rd = csv::Reader::from_reader(csv_text.as_bytes());
    let header = rd.headers().unwrap().clone();
    (header, rd.records().map(Result::unwrap).collect())
}

fn column(header: &csv::StringRecord, name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

const SMALL_GRID: &[&str] = &[
    "grid2x2",
    "--cluster-size",
    "30",
    "--gaps=-0.04,0.08",
    "--labels",
    "0.1,0.3",
    "--p",
    "-1",
    "--p",
    "1",
    "--reps",
    "3",
    "--label-samples",
    "2",
    "--seed",
    "7",
];

#[test]
fn same_seed_same_bytes_for_any_worker_count() {
    let a = powerlap(SMALL_GRID, Some("1"));
    let b = powerlap(SMALL_GRID, Some("3"));
    let c = powerlap(SMALL_GRID, None);
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a), stdout(&c));
    let mut other_seed = SMALL_GRID.to_vec();
    *other_seed.last_mut().unwrap() = "8";
    assert_ne!(stdout(&a), stdout(&powerlap(&other_seed, None)));
}

#[test]
fn mean_is_mean_of_recorded_errors() {
    let text = stdout(&powerlap(SMALL_GRID, None));
    let (header, rows) = records(&text);
    assert_eq!(rows.len(), 2 * 2 * 2);
    let (runs, mean, errs) = (column(&header, "runs"), column(&header, "mean_error"), column(&header, "errors"));
    for r in &rows {
        let e: Vec<f64> = r[errs].split(';').map(|s| s.parse().unwrap()).collect();
        assert_eq!(e.len(), 6);
        assert_eq!(r[runs].parse::<usize>().unwrap(), e.len());
        assert!(e.iter().all(|x| (0.0..=1.0).contains(x)));
        let m: f64 = r[mean].parse().unwrap();
        assert!((m - e.iter().sum::<f64>() / e.len() as f64).abs() <= 1e-15);
    }
}

#[test]
fn empty_range_gives_header_only() {
    let text = stdout(&powerlap(&["grid2x2", "--gaps="], None));
    let (header, rows) = records(&text);
    assert!(rows.is_empty());
    assert_eq!(&header[0], "gap2");
    let text = stdout(&powerlap(&["timing", "--sizes="], None));
    assert_eq!(records(&text).1.len(), 0);
}

#[test]
fn config_and_sidecar_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.csv");
    let mut args = SMALL_GRID.to_vec();
    let out_s = out.to_str().unwrap();
    args.extend(["--out", out_s]);
    let o = powerlap(&args, None);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("grid.csv.json")).unwrap()).unwrap();
    assert_eq!(json["experiment"], "grid2x2");
    assert_eq!(json["seed"], 7);
    assert_eq!(json["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(json["config"]["common"]["p"], serde_json::json!([-1.0, 1.0]));
    assert_eq!(json["config"]["gaps"], serde_json::json!([-0.04, 0.08]));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), stdout(&powerlap(SMALL_GRID, None)));
}

#[test]
fn defaults_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.csv");
    let o = powerlap(
        &["unbalanced", "--cluster-size", "20", "--total", "10", "--n1", "5", "--reps", "1", "--out", out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("u.csv.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["common"]["p"], serde_json::json!([-10.0, -1.0, 0.0, 1.0, 10.0]));
    assert_eq!(json["config"]["common"]["reps"], 1);
    assert_eq!(json["config"]["common"]["label_samples"], 5);
}

#[test]
fn infeasible_budget_becomes_warning_row() {
    let o = powerlap(
        &["unbalanced", "--cluster-size", "20", "--total", "30", "--n1", "25,15", "--p", "-1", "--reps", "1", "--label-samples", "1"],
        None,
    );
    let text = stdout(&o);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let (header, rows) = records(&text);
    let (path, note, n1) = (column(&header, "path"), column(&header, "note"), column(&header, "n1"));
    let skipped: Vec<_> = rows.iter().filter(|r| &r[path] == "skipped").collect();
    assert_eq!(skipped.len(), 2);
    assert!(skipped.iter().all(|r| &r[n1] == "25" && r[note].contains("infeasible")));
    // a symmetric split makes the weighted cost constant, so both losses agree
    let o = powerlap(
        &["unbalanced", "--cluster-size", "20", "--total", "20", "--n1", "10", "--p", "-1", "--reps", "2"],
        None,
    );
    let (header, rows) = records(&stdout(&o));
    let errs = column(&header, "errors");
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][errs], &rows[1][errs]);
}

#[test]
fn missing_file_is_a_config_error() {
    let o = powerlap(
        &["dataset", "--features", "/nonexistent/features.csv", "--truth", "/nonexistent/labels.csv"],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error: "), "{err}");
    assert!(err.contains("/nonexistent/features.csv"), "{err}");
    assert!(!err.contains("panicked"));
}

#[test]
fn bad_flags_exit_two() {
    assert_eq!(powerlap(&["grid2x2", "--labels", "1.5"], None).status.code(), Some(2));
    assert_eq!(powerlap(&["grid2x2", "--reps", "0"], None).status.code(), Some(2));
    assert_eq!(powerlap(&["grid2x2", "--gaps", "0.2"], None).status.code(), Some(2));
    assert_eq!(powerlap(&["grid2x2"], Some("zero")).status.code(), Some(2));
    assert_eq!(powerlap(&["timing", "--p", "1", "--sizes", "100"], None).status.code(), Some(2));
    assert_eq!(powerlap(&["--version"], None).status.code(), Some(0));
}

fn synthetic_args<'a>(views: &'a [String], truth: &'a str) -> Vec<&'a str> {
    let mut args = vec!["dataset"];
    for v in views {
        args.extend(["--features", v.as_str()]);
    }
    args.extend(["--truth", truth]);
    args
}

#[test]
fn dataset_on_bundled_fixture() {
    let views: Vec<String> = synthetic::VIEW_FILES.iter().map(|f| data(f).display().to_string()).collect();
    let truth = data(synthetic::LABEL_FILE).display().to_string();
    let mut args = synthetic_args(&views, &truth);
    args.extend(["--labels", "0.1,1", "--reps", "3"]);
    let text = stdout(&powerlap(&args, None));
    assert_eq!(text, stdout(&powerlap(&args, None)));
    let (header, rows) = records(&text);
    let (frac, lambda, mean, note) = (
        column(&header, "label_fraction"),
        column(&header, "lambda"),
        column(&header, "mean_error"),
        column(&header, "note"),
    );
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let expected_lambda = if r[2].ends_with("=1") { "0.1" } else { "10" };
        assert_eq!(&r[lambda], expected_lambda);
        if &r[frac] == "1" {
            assert_eq!(&r[mean], "");
            assert!(r[note].contains("no unlabeled nodes"));
        } else {
            // well below chance for three classes
            assert!(r[mean].parse::<f64>().unwrap() < 0.3);
        }
    }
}

#[test]
fn solve_writes_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let known = dir.path().join("known.csv");
    let truth = std::fs::read_to_string(data(synthetic::LABEL_FILE)).unwrap();
    // every fifth node is labeled
    let partial: String = truth
        .lines()
        .enumerate()
        .filter(|(i, _)| *i == 0 || (i - 1) % 5 == 0)
        .map(|(_, l)| format!("{l}\n"))
        .collect();
    std::fs::write(&known, partial).unwrap();
    let out = dir.path().join("pred.csv");
    let view1 = data("view1.csv");
    let view2 = data("view2.csv");
    let truth_path = data(synthetic::LABEL_FILE);
    let args = [
        "solve",
        "--features",
        view1.to_str().unwrap(),
        "--features",
        view2.to_str().unwrap(),
        "--labels",
        known.to_str().unwrap(),
        "--truth",
        truth_path.to_str().unwrap(),
        "--p",
        "-1",
        "--lambda",
        "10",
        "--out",
        out.to_str().unwrap(),
    ];
    let o = powerlap(&args, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("test error"));
    let (header, rows) = records(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        ["node_id", "class", "labeled", "score_1", "score_2", "score_3"]
    );
    assert_eq!(rows.len(), synthetic::NODES);
    let truth_classes: Vec<&str> = truth.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    let wrong = rows
        .iter()
        .filter(|r| &r[2] == "0" && r[1] != *truth_classes[r[0].parse::<usize>().unwrap()])
        .count();
    assert!((wrong as f64) / 240.0 < 0.15, "{wrong} wrong");
    // labeled nodes keep their class under this λ
    assert!(rows.iter().filter(|r| &r[2] == "1").all(|r| r[1] == *truth_classes[r[0].parse::<usize>().unwrap()]));
}

#[test]
fn isolated_nodes_need_self_loops() {
    let dir = tempfile::tempdir().unwrap();
    let layer = dir.path().join("a.mtx");
    // path 0-1-2 with node 3 isolated
    std::fs::write(
        &layer,
        "%%MatrixMarket matrix coordinate real symmetric\n4 4 2\n2 1 1\n3 2 1\n",
    )
    .unwrap();
    let labels = dir.path().join("l.csv");
    std::fs::write(&labels, "0,1\n2,2\n").unwrap();
    let base = ["solve", "--layer", layer.to_str().unwrap(), "--labels", labels.to_str().unwrap(), "--p", "1"];
    let o = powerlap(&base, None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("isolated"));
    let mut with_loops = base.to_vec();
    with_loops.push("--self-loops");
    let (_, rows) = records(&stdout(&powerlap(&with_loops, None)));
    assert_eq!(rows.len(), 4);
}

#[test]
fn bundled_fixture_matches_generator() {
    for (name, bytes) in synthetic::files(synthetic::SEED) {
        let on_disk = std::fs::read(data(name)).unwrap();
        assert!(on_disk == bytes, "{name} differs from the generator output");
    }
    let dir = tempfile::tempdir().unwrap();
    let written = synthetic::write(dir.path(), synthetic::SEED).unwrap();
    for path in written {
        let name = path.file_name().unwrap().to_str().unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(data(name)).unwrap());
    }
    assert!(Path::new(&data("view1.csv")).exists());
}
