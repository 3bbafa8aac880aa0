//! Repeated-run benchmark: relative accuracy, baseline time and success
//! counts per algorithm, summarized as min / median / max.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::bigmeans::{big_means, BigMeansConfig, StepParams, StopCondition};
use crate::competitive::{run_competitive, CompetitiveConfig, Execution};
use crate::data::{evaluate_objective, DataMatrix};
use crate::error::{invalid, Error, Result};
use crate::kmeans::{kmeanspp_init, lloyd};
use crate::metrics::{baseline_time, compute_baseline, relative_accuracy, summarize, RunTrace, Summary};
use crate::rng::master_stream;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Parallel Big-means with competitive sample sizes.
    Competitive,
    /// Sequential Big-means at a fixed sample size.
    Bigmeans,
    /// K-means++ and Lloyd on the full data.
    Kmeans,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Competitive => "competitive",
            Algorithm::Bigmeans => "bigmeans",
            Algorithm::Kmeans => "kmeans",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "competitive" => Ok(Algorithm::Competitive),
            "bigmeans" | "big-means" => Ok(Algorithm::Bigmeans),
            "kmeans" | "k-means" => Ok(Algorithm::Kmeans),
            other => Err(format!("unknown algorithm {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub dataset: String,
    pub algorithms: Vec<Algorithm>,
    pub n_exec: usize,
    pub k: usize,
    /// Big-means sample size.
    pub sample_size: usize,
    pub s_min: usize,
    pub s_max: usize,
    pub workers: usize,
    pub passes_per_epoch: usize,
    pub epochs: usize,
    /// Samples for sequential Big-means; `workers * epochs * passes` when unset.
    pub bigmeans_samples: Option<usize>,
    pub time_budget: Option<Duration>,
    pub step: StepParams,
    pub seed: u64,
    /// Best known objective; the best full objective observed in this
    /// benchmark is used when absent.
    pub f_star: Option<f64>,
    /// Slack, in percentage points of relative accuracy, within which a run
    /// still counts as matching the best run of its execution.
    pub success_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub exec: usize,
    pub seed: u64,
    pub objective: f64,
    pub epsilon: f64,
    pub baseline_time: Option<f64>,
    pub success: bool,
    pub elapsed: f64,
    pub s_opt: Option<usize>,
    pub trace: RunTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmReport {
    pub algorithm: Algorithm,
    pub successes: usize,
    pub epsilon: Summary,
    /// Over the runs that reached the baseline objective.
    pub baseline_time: Option<Summary>,
    pub reached_baseline: usize,
    pub elapsed: Summary,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub dataset: String,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub n_exec: usize,
    pub f_star: f64,
    /// `"reference"` or `"observed"`.
    pub f_star_source: String,
    pub f_baseline: f64,
    pub algorithms: Vec<AlgorithmReport>,
}

struct RawRun {
    objective: f64,
    elapsed: f64,
    s_opt: Option<usize>,
    trace: RunTrace,
}

fn run_once(data: &DataMatrix, cfg: &BenchConfig, algorithm: Algorithm, seed: u64) -> Result<RawRun> {
    let start = Instant::now();
    let raw = match algorithm {
        Algorithm::Competitive => {
            let ccfg = CompetitiveConfig {
                k: cfg.k,
                workers: cfg.workers,
                s_min: cfg.s_min,
                s_max: cfg.s_max,
                passes_per_epoch: cfg.passes_per_epoch,
                epochs: cfg.epochs,
                time_budget: cfg.time_budget,
                step: cfg.step,
                seed,
                execution: Execution::Parallel,
            };
            let r = run_competitive(data, &ccfg)?;
            let objective = evaluate_objective(&r.centroids, data)?;
            let mut trace = RunTrace::merge(&r.traces);
            trace.final_full_objective = Some(objective);
            RawRun {
                objective,
                elapsed: start.elapsed().as_secs_f64(),
                s_opt: Some(r.s_opt),
                trace,
            }
        }
        Algorithm::Bigmeans => {
            let samples = cfg
                .bigmeans_samples
                .unwrap_or(cfg.workers * cfg.epochs * cfg.passes_per_epoch);
            let bcfg = BigMeansConfig {
                k: cfg.k,
                sample_size: cfg.sample_size,
                stop: StopCondition::new(Some(samples), cfg.time_budget)?,
                step: cfg.step,
            };
            let r = big_means(data, &bcfg, &mut master_stream(seed))?;
            RawRun {
                objective: r.trace.final_full_objective.expect("set by big_means"),
                elapsed: start.elapsed().as_secs_f64(),
                s_opt: None,
                trace: r.trace,
            }
        }
        Algorithm::Kmeans => {
            let mut rng = master_stream(seed);
            let init = kmeanspp_init(data, cfg.k, cfg.step.candidates, &mut rng)?;
            let r = lloyd(data, &init, &cfg.step.lloyd)?;
            let elapsed = start.elapsed().as_secs_f64();
            let mut trace = RunTrace::new();
            trace.push(elapsed, r.objective, 0);
            trace.final_full_objective = Some(r.objective);
            RawRun {
                objective: r.objective,
                elapsed,
                s_opt: None,
                trace,
            }
        }
    };
    Ok(raw)
}

/// Runs every algorithm `n_exec` times. Execution `i` of every algorithm uses
/// seed `seed + i`.
pub fn run_bench(data: &DataMatrix, cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.algorithms.is_empty() {
        return Err(invalid("algorithms", "at least one algorithm is required"));
    }
    if cfg.n_exec == 0 {
        return Err(invalid("n_exec", "must be at least 1"));
    }
    if let Some(f) = cfg.f_star {
        if !(f > 0.0) {
            return Err(Error::NonPositiveReference(f));
        }
    }

    let mut raw: Vec<Vec<RawRun>> = Vec::with_capacity(cfg.algorithms.len());
    for &alg in &cfg.algorithms {
        let runs = (0..cfg.n_exec)
            .map(|i| run_once(data, cfg, alg, cfg.seed.wrapping_add(i as u64)))
            .collect::<Result<Vec<_>>>()?;
        raw.push(runs);
    }

    let observed_best = raw
        .iter()
        .flatten()
        .map(|r| r.objective)
        .fold(f64::INFINITY, f64::min);
    let (f_star, source) = match cfg.f_star {
        Some(f) => (f, "reference"),
        None => (observed_best, "observed"),
    };
    if !(f_star > 0.0) {
        return Err(Error::NonPositiveReference(f_star));
    }

    let traces: Vec<Vec<RunTrace>> = raw
        .iter()
        .map(|runs| runs.iter().map(|r| r.trace.clone()).collect())
        .collect();
    let f_baseline = compute_baseline(&traces)?;

    let eps: Vec<Vec<f64>> = raw
        .iter()
        .map(|runs| {
            runs.iter()
                .map(|r| relative_accuracy(r.objective, f_star))
                .collect()
        })
        .collect::<Result<_>>()?;
    let best_eps: Vec<f64> = (0..cfg.n_exec)
        .map(|i| eps.iter().map(|e| e[i]).fold(f64::INFINITY, f64::min))
        .collect();

    let mut algorithms = Vec::with_capacity(cfg.algorithms.len());
    for ((&alg, runs), alg_eps) in cfg.algorithms.iter().zip(raw).zip(&eps) {
        let records: Vec<RunRecord> = runs
            .into_iter()
            .enumerate()
            .map(|(i, r)| RunRecord {
                exec: i,
                seed: cfg.seed.wrapping_add(i as u64),
                objective: r.objective,
                epsilon: alg_eps[i],
                baseline_time: baseline_time(&r.trace, f_baseline),
                success: alg_eps[i] <= best_eps[i] + cfg.success_tol,
                elapsed: r.elapsed,
                s_opt: r.s_opt,
                trace: r.trace,
            })
            .collect();
        let times: Vec<f64> = records.iter().filter_map(|r| r.baseline_time).collect();
        let elapsed: Vec<f64> = records.iter().map(|r| r.elapsed).collect();
        algorithms.push(AlgorithmReport {
            algorithm: alg,
            successes: records.iter().filter(|r| r.success).count(),
            epsilon: summarize(alg_eps)?,
            baseline_time: (!times.is_empty()).then(|| summarize(&times)).transpose()?,
            reached_baseline: times.len(),
            elapsed: summarize(&elapsed)?,
            runs: records,
        });
    }

    Ok(BenchReport {
        schema_version: REPORT_SCHEMA_VERSION,
        dataset: cfg.dataset.clone(),
        m: data.rows(),
        n: data.cols(),
        k: cfg.k,
        n_exec: cfg.n_exec,
        f_star,
        f_star_source: source.to_string(),
        f_baseline,
        algorithms,
    })
}

impl BenchReport {
    /// Human-readable table: success count and min / median / max of the
    /// relative accuracy (%) and of the baseline time (s), one row per
    /// algorithm.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "dataset {} (m = {}, n = {}, k = {}), f* = {} ({}), baseline f_s = {}",
            self.dataset, self.m, self.n, self.k, self.f_star, self.f_star_source, self.f_baseline
        );
        let _ = writeln!(
            out,
            "{:<12} | {:>7} | {:>9} {:>9} {:>9} | {:>9} {:>9} {:>9}",
            "algorithm", "#Succ", "eps Min", "Median", "Max", "t Min", "Median", "Max"
        );
        let _ = writeln!(out, "{}", "-".repeat(88));
        for a in &self.algorithms {
            let t = |f: fn(&Summary) -> f64| {
                a.baseline_time
                    .as_ref()
                    .map_or_else(|| "-".to_string(), |s| format!("{:.2}", f(s)))
            };
            let _ = writeln!(
                out,
                "{:<12} | {:>7} | {:>9.2} {:>9.2} {:>9.2} | {:>9} {:>9} {:>9}",
                a.algorithm.name(),
                format!("{}/{}", a.successes, a.runs.len()),
                a.epsilon.min,
                a.epsilon.median,
                a.epsilon.max,
                t(|s| s.min),
                t(|s| s.median),
                t(|s| s.max),
            );
        }
        out
    }

    /// Drops all wall-clock quantities so that reports of identical runs
    /// compare equal.
    pub fn strip_timing(&mut self) {
        for a in &mut self.algorithms {
            a.baseline_time = None;
            a.reached_baseline = 0;
            a.elapsed = Summary {
                min: 0.0,
                median: 0.0,
                max: 0.0,
            };
            for r in &mut a.runs {
                r.baseline_time = None;
                r.elapsed = 0.0;
                r.trace.events.clear();
            }
        }
    }
}

/// One line of a reference file: the best known objective for a dataset and
/// cluster count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub dataset: String,
    pub k: usize,
    pub f_star: f64,
}

/// Reads a `dataset,k,f_star` CSV file with a header row. Lines starting with
/// `#` are ignored.
pub fn load_references(path: &Path) -> Result<Vec<Reference>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
    reader
        .deserialize()
        .map(|row| {
            row.map_err(|e: csv::Error| Error::Parse {
                path: path.to_path_buf(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn find_reference(refs: &[Reference], dataset: &str, k: usize) -> Option<f64> {
    refs.iter()
        .find(|r| r.dataset == dataset && r.k == k)
        .map(|r| r.f_star)
}
