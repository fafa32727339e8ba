use std::path::Path;
use std::process::{Command, Output};

use rpreg_cli::dataset::{format_dataset, parse_dataset};
use rpreg_cli::runner::{grid, run_grid, training_sample, HEADER};
use rpreg_cli::{load_dataset, ExperimentConfig};

fn config_text(output_dir: &Path, seeds: &str) -> String {
    format!(
        "[experiment]
partitioner = rptree
selector = cv
n_grid = 64
D_grid = 6
seeds = {seeds}
repetitions = 4
oracle_points = 500
output_dir = {}

[generator]
family = subspace
d = 2
rotation_seed = 1

[function]
shape = linear
lambda = 1.0
seed = 2

[noise]
y_diameter = 5
",
        output_dir.display()
    )
}

fn rpreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpreg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) -> String {
    std::fs::write(path, text).unwrap();
    path.display().to_string()
}

#[test]
fn run_writes_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write(&dir.path().join("exp.ini"), &config_text(&out, "5"));
    let result = rpreg(&["run", &cfg, "--jobs", "2"]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));

    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], HEADER.join(","));
    let summary = std::fs::read_to_string(out.join("summary.md")).unwrap();
    assert!(summary.contains("| 6 | 64 | 1 |"));
}

#[test]
fn flags_override_seeds_and_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir.path().join("exp.ini"), &config_text(&dir.path().join("unused"), "1, 2, 3"));
    let other = dir.path().join("other");
    let result = rpreg(&["run", &cfg, "--seed", "9", "--output-dir", &other.display().to_string()]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let csv = std::fs::read_to_string(other.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn invalid_config_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir.path().join("bad.ini"), &config_text(dir.path(), ""));
    let result = rpreg(&["run", &cfg]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("seeds"));

    let missing = dir.path().join("missing.ini").display().to_string();
    assert_eq!(rpreg(&["run", &missing]).status.code(), Some(2));
}

#[test]
fn gen_then_eval_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir.path().join("exp.ini"), &config_text(dir.path(), "4"));
    let data = dir.path().join("train.txt").display().to_string();
    let result = rpreg(&["gen", &cfg, "-o", &data]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));

    let config = ExperimentConfig::load(Path::new(&cfg)).unwrap();
    let point = grid(&config)[0];
    let sample = training_sample(&config, point).unwrap();
    assert_eq!(load_dataset(Path::new(&data)).unwrap(), sample.data);

    let spec = format!("{cfg}:4");
    let result = rpreg(&["eval", "--model-seedspec", &spec, "--data", &data]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let stdout = String::from_utf8_lossy(&result.stdout);
    let risk: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("empirical_risk "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(risk.is_finite() && risk >= 0.0);

    let bad = write(&dir.path().join("bad.txt"), "x:6 y:1\n1 2 3\n");
    let result = rpreg(&["eval", "--model-seedspec", &spec, "--data", &bad]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains(":2:"));
}

#[test]
fn generated_dataset_round_trips_through_text() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::parse(&config_text(dir.path(), "0")).unwrap();
    let sample = training_sample(&config, grid(&config)[0]).unwrap();
    let back = parse_dataset(&format_dataset(&sample.data), "mem").unwrap();
    for (a, b) in back.x.coords().iter().chain(back.y.coords()).zip(sample.data.x.coords().iter().chain(sample.data.y.coords())) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}

#[test]
fn runtime_abort_flushes_completed_rows() {
    // Two levels always separate two points but cannot refine 64 points twice.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let text = config_text(&out, "0, 1")
        .replace("n_grid = 64", "n_grid = 2, 64")
        .replace("repetitions = 4", "repetitions = 2\ndepth_cap = 2");
    let cfg = write(&dir.path().join("exp.ini"), &text);

    let config = ExperimentConfig::load(Path::new(&cfg)).unwrap();
    let outcome = run_grid(&config, Some(2)).unwrap();
    assert_eq!(outcome.rows.len(), 2);
    assert!(outcome.rows.iter().all(|r| r.n == 2));
    assert!(outcome.failures.iter().all(|(p, _)| p.n == 64));

    let result = rpreg(&["run", &cfg]);
    assert_eq!(result.status.code(), Some(3));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
