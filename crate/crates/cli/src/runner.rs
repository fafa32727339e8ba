//! Grid execution and result emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rpreg::baselines::{DyadicPartitioner, KdPartitioner};
use rpreg::regress::{
    adaptive_partition, decrease_rate, empirical_risk, AdaptiveConfig, RpTreePartitioner,
    SelectionRule, Selector,
};
use rpreg::rng::derive_seed;
use rpreg::rptree::SplitOptions;
use rpreg::synth::{oracle_excess_risk_with_se, SyntheticSample};
use rpreg::{Dataset, RegressorModel, Trace};

use crate::config::{ExperimentConfig, PartitionerKind};
use crate::error::{CliError, Result};

/// Queries timed for the per-query latency column.
const TIMED_QUERIES: usize = 10_000;

const TRAIN: u64 = 1;
const HOLDOUT: u64 = 2;
const EVAL: u64 = 3;
const TREE: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridPoint {
    pub dim: usize,
    pub n: usize,
    pub seed: u64,
}

impl GridPoint {
    fn stream_seed(&self, label: u64) -> u64 {
        let s = derive_seed(self.seed, self.dim as u64);
        derive_seed(derive_seed(s, self.n as u64), label)
    }

    fn rng(&self, label: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.stream_seed(label))
    }
}

/// Grid points in output order: dimension, then sample size, then seed.
pub fn grid(config: &ExperimentConfig) -> Vec<GridPoint> {
    let mut points = Vec::new();
    for &dim in &config.dims {
        for &n in &config.n_grid {
            for &seed in &config.seeds {
                points.push(GridPoint { dim, n, seed });
            }
        }
    }
    points
}

/// A fitted model together with the data it was built from.
pub struct Build {
    pub model: RegressorModel,
    pub trace: Trace,
    pub train: SyntheticSample,
    pub build_ms: f64,
}

/// Draws the training sample of a grid point.
pub fn training_sample(config: &ExperimentConfig, point: GridPoint) -> Result<SyntheticSample> {
    let spec = config.generator_for(point.dim);
    Ok(spec.sample(point.n, &mut point.rng(TRAIN))?)
}

/// Draws data and fits the model of one grid point.
pub fn build_model(config: &ExperimentConfig, point: GridPoint) -> Result<Build> {
    let spec = config.generator_for(point.dim);
    let train = training_sample(config, point)?;
    let holdout = match config.selector {
        SelectionRule::CrossValidation => Some(spec.sample(point.n, &mut point.rng(HOLDOUT))?),
        SelectionRule::AutoStop => None,
    };
    let selector = match &holdout {
        Some(h) => Selector::CrossValidation(&h.data),
        None => Selector::AutoStop,
    };
    let adaptive = AdaptiveConfig {
        delta: config.delta,
        seed: point.stream_seed(TREE),
        autostop_squared: config.autostop_squared,
    };
    let start = Instant::now();
    let (model, trace) = fit(config, &train.data, &adaptive, selector)?;
    let build_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(Build {
        model,
        trace,
        train,
        build_ms,
    })
}

fn fit(
    config: &ExperimentConfig,
    data: &Dataset,
    adaptive: &AdaptiveConfig,
    selector: Selector<'_>,
) -> rpreg::Result<(RegressorModel, Trace)> {
    match config.partitioner {
        PartitionerKind::RpTree => {
            let options = SplitOptions {
                diameter_mode: config.diameter_mode,
                noisy_median_scope: config.noisy_median_scope,
                depth_cap: config.depth_cap,
                repetitions: config.repetitions,
            };
            adaptive_partition(data, &RpTreePartitioner { options }, adaptive, selector)
        }
        PartitionerKind::Kd => {
            let kd = KdPartitioner { depth_cap: config.depth_cap };
            adaptive_partition(data, &kd, adaptive, selector)
        }
        PartitionerKind::Dyadic => {
            let dyadic = DyadicPartitioner { depth_cap: config.depth_cap };
            adaptive_partition(data, &dyadic, adaptive, selector)
        }
    }
}

/// One CSV row. Timing fields come last and are excluded from determinism.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub partitioner: &'static str,
    pub selector: &'static str,
    pub family: &'static str,
    pub dim: usize,
    pub intrinsic_dim: usize,
    pub n: usize,
    pub seed: u64,
    pub delta: f64,
    pub diameter_mode: &'static str,
    pub noisy_median_scope: &'static str,
    pub repetitions: Option<usize>,
    /// Diameter decrease rate.
    pub k: usize,
    pub cells: usize,
    pub level: usize,
    pub avg_diam: f64,
    pub chosen_round: usize,
    pub fired_round: usize,
    pub empirical_risk: f64,
    pub empirical_se: f64,
    pub oracle_excess_risk: f64,
    pub oracle_se: f64,
    pub noise_floor: f64,
    pub build_ms: f64,
    pub predict_ns_per_query: f64,
}

pub const HEADER: [&str; 24] = [
    "partitioner",
    "selector",
    "family",
    "D",
    "d",
    "n",
    "seed",
    "delta",
    "diameter_mode",
    "noisy_median_scope",
    "repetitions",
    "k",
    "cells",
    "level",
    "avg_diam",
    "chosen_round",
    "fired_round",
    "empirical_risk",
    "empirical_se",
    "oracle_excess_risk",
    "oracle_se",
    "noise_floor",
    "build_ms",
    "predict_ns_per_query",
];

/// Number of trailing timing columns.
pub const TIMING_COLUMNS: usize = 2;

impl ResultRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.partitioner.to_string(),
            self.selector.to_string(),
            self.family.to_string(),
            self.dim.to_string(),
            self.intrinsic_dim.to_string(),
            self.n.to_string(),
            self.seed.to_string(),
            self.delta.to_string(),
            self.diameter_mode.to_string(),
            self.noisy_median_scope.to_string(),
            self.repetitions.map_or_else(|| "auto".to_string(), |r| r.to_string()),
            self.k.to_string(),
            self.cells.to_string(),
            self.level.to_string(),
            self.avg_diam.to_string(),
            self.chosen_round.to_string(),
            self.fired_round.to_string(),
            self.empirical_risk.to_string(),
            self.empirical_se.to_string(),
            self.oracle_excess_risk.to_string(),
            self.oracle_se.to_string(),
            self.noise_floor.to_string(),
            format!("{:.3}", self.build_ms),
            format!("{:.1}", self.predict_ns_per_query),
        ]
    }
}

/// Runs one grid point end to end.
pub fn run_point(config: &ExperimentConfig, point: GridPoint) -> Result<ResultRow> {
    let spec = config.generator_for(point.dim);
    let build = build_model(config, point)?;
    let model = &build.model;
    let f = spec.function()?;
    let eval = spec.sample(config.oracle_points, &mut point.rng(EVAL))?;

    let (oracle, oracle_se) = oracle_excess_risk_with_se(model, &f, &eval.data.x)?;
    let empirical = empirical_risk(model, &eval.data)?;
    let losses: Vec<f64> = (0..eval.data.len())
        .into_par_iter()
        .map(|i| {
            let pred = model.predict_ref(eval.data.x.point(i)).expect("dimension checked");
            pred.iter()
                .zip(eval.data.y.point(i))
                .map(|(p, y)| (p - y) * (p - y))
                .sum::<f64>()
        })
        .collect();
    let (_, empirical_se) = rpreg::synth::mean_and_se(&losses);

    let timed = eval.data.len().min(TIMED_QUERIES);
    let start = Instant::now();
    let mut sink = 0.0;
    for i in 0..timed {
        sink += model.predict_ref(eval.data.x.point(i))?[0];
    }
    let predict_ns = start.elapsed().as_nanos() as f64 / timed as f64;
    std::hint::black_box(sink);

    let chosen = &build.trace.snapshots[build.trace.selection.chosen_round];
    Ok(ResultRow {
        partitioner: config.partitioner.as_str(),
        selector: config.selector.as_str(),
        family: spec.family.name(),
        dim: point.dim,
        intrinsic_dim: spec.intrinsic_dim(),
        n: point.n,
        seed: point.seed,
        delta: config.delta,
        diameter_mode: config.diameter_mode.as_str(),
        noisy_median_scope: config.noisy_median_scope.as_str(),
        repetitions: config.repetitions,
        k: decrease_rate(&build.trace)?,
        cells: chosen.size,
        level: chosen.level,
        avg_diam: chosen.avg_diam,
        chosen_round: build.trace.selection.chosen_round,
        fired_round: build.trace.selection.fired_round,
        empirical_risk: empirical,
        empirical_se,
        oracle_excess_risk: oracle,
        oracle_se,
        noise_floor: spec.noise_floor()?,
        build_ms: build.build_ms,
        predict_ns_per_query: predict_ns,
    })
}

/// Rows of every completed grid point in grid order, plus the failures.
pub struct GridOutcome {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<(GridPoint, CliError)>,
}

/// Runs the whole grid on a pool of `jobs` threads (all cores when `None`).
pub fn run_grid(config: &ExperimentConfig, jobs: Option<usize>) -> Result<GridOutcome> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs:?} workers: {e}")))?;
    let points = grid(config);
    let results: Vec<Result<ResultRow>> = pool.install(|| {
        points
            .par_iter()
            .map(|&p| {
                log::info!("running D = {}, n = {}, seed = {}", p.dim, p.n, p.seed);
                run_point(config, p)
            })
            .collect()
    });
    let mut outcome = GridOutcome {
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for (point, result) in points.into_iter().zip(results) {
        match result {
            Ok(row) => outcome.rows.push(row),
            Err(e) => {
                log::error!("D = {}, n = {}, seed = {}: {e}", point.dim, point.n, point.seed);
                outcome.failures.push((point, e));
            }
        }
    }
    Ok(outcome)
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        (values[m / 2 - 1] + values[m / 2]) / 2.0
    }
}

/// Least-squares slope of `ys` against `xs`; `None` with fewer than two
/// distinct abscissae.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Per-(D, n) medians of the deterministic columns.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub dim: usize,
    pub n: usize,
    pub runs: usize,
    pub k: f64,
    pub cells: f64,
    pub level: f64,
    pub empirical_risk: f64,
    pub oracle_excess_risk: f64,
}

pub fn summarize(config: &ExperimentConfig, rows: &[ResultRow]) -> Vec<GroupSummary> {
    let mut groups = Vec::new();
    for &dim in &config.dims {
        for &n in &config.n_grid {
            let sel: Vec<&ResultRow> = rows.iter().filter(|r| r.dim == dim && r.n == n).collect();
            if sel.is_empty() {
                continue;
            }
            let med = |f: &dyn Fn(&ResultRow) -> f64| median(&mut sel.iter().map(|r| f(r)).collect::<Vec<_>>());
            groups.push(GroupSummary {
                dim,
                n,
                runs: sel.len(),
                k: med(&|r| r.k as f64),
                cells: med(&|r| r.cells as f64),
                level: med(&|r| r.level as f64),
                empirical_risk: med(&|r| r.empirical_risk),
                oracle_excess_risk: med(&|r| r.oracle_excess_risk),
            });
        }
    }
    groups
}

/// Log-log slope of median excess risk against `n`, per ambient dimension.
pub fn risk_slopes(groups: &[GroupSummary]) -> Vec<(usize, Option<f64>)> {
    let mut dims: Vec<usize> = groups.iter().map(|g| g.dim).collect();
    dims.dedup();
    dims.into_iter()
        .map(|dim| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = groups
                .iter()
                .filter(|g| g.dim == dim && g.oracle_excess_risk > 0.0)
                .map(|g| ((g.n as f64).log2(), g.oracle_excess_risk.log2()))
                .unzip();
            (dim, fit_slope(&xs, &ys))
        })
        .collect()
}

pub fn summary_markdown(config: &ExperimentConfig, rows: &[ResultRow]) -> String {
    let groups = summarize(config, rows);
    let mut out = String::new();
    let g = &config.generator;
    let _ = writeln!(out, "# Experiment summary\n");
    let _ = writeln!(
        out,
        "partitioner `{}`, selector `{}`, family `{}` (d = {}), delta {}, {} rows\n",
        config.partitioner.as_str(),
        config.selector.as_str(),
        g.family.name(),
        g.intrinsic_dim(),
        config.delta,
        rows.len()
    );
    let _ = writeln!(out, "## Medians by sample size\n");
    let _ = writeln!(
        out,
        "| D | n | runs | k | cells | level | empirical risk | excess risk |\n|---|---|---|---|---|---|---|---|"
    );
    for s in &groups {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {:.6e} | {:.6e} |",
            s.dim, s.n, s.runs, s.k, s.cells, s.level, s.empirical_risk, s.oracle_excess_risk
        );
    }
    let _ = writeln!(out, "\n## Log-log excess risk slopes\n");
    let _ = writeln!(out, "| D | slope of log2(excess risk) on log2(n) |\n|---|---|");
    for (dim, slope) in risk_slopes(&groups) {
        match slope {
            Some(s) => {
                let _ = writeln!(out, "| {dim} | {s:.4} |");
            }
            None => {
                let _ = writeln!(out, "| {dim} | n/a |");
            }
        }
    }
    out
}

/// Files written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunReport {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub rows: usize,
}

/// Runs the grid and writes `results.csv` and `summary.md` to the output
/// directory. Completed rows are written even when some grid points fail.
pub fn run_experiment(config: &ExperimentConfig, jobs: Option<usize>) -> Result<RunReport> {
    config.validate()?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let outcome = run_grid(config, jobs)?;
    let csv = dir.join("results.csv");
    let summary = dir.join("summary.md");
    write_csv(&csv, &outcome.rows)?;
    std::fs::write(&summary, summary_markdown(config, &outcome.rows))
        .map_err(|e| CliError::io(&summary, e))?;
    if let Some((_, first)) = outcome.failures.first() {
        return Err(CliError::Aborted {
            failed: outcome.failures.len(),
            total: outcome.failures.len() + outcome.rows.len(),
            first: first.to_string(),
        });
    }
    Ok(RunReport {
        csv,
        summary,
        rows: outcome.rows.len(),
    })
}
