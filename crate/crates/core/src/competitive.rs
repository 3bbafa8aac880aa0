//! Parallel Big-means with competitive stochastic sample-size optimization.
//!
//! `W` workers run Big-means independently over the shared dataset. At the
//! start of every epoch a worker draws a new sample size from
//! `[s_min, s_max]`, re-measures its incumbent on a fresh sample of that size
//! and then performs `p` Big-means passes. Every pass that improves a
//! worker's incumbent appends the worker's current sample size to a shared
//! improvement log. When all workers are done, the mean of the log gives
//! `s_opt`; all incumbents are scored on one common sample of size `s_opt`,
//! and the winner's centroids label the full dataset.
//!
//! Workers share nothing but the log, and every worker epoch draws from its
//! own stream keyed by `(seed, worker, epoch)`. Under epoch-count stopping the
//! parallel and sequential executions therefore return identical results;
//! only the append order of the log may differ.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use log::{info, warn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bigmeans::{big_means_step, Incumbent, StepParams};
use crate::data::{assign_all, evaluate_objective, Assignment, CentroidSet, DataMatrix};
use crate::error::{invalid, Error, Result};
use crate::metrics::RunTrace;
use crate::rng::{epoch_stream, final_evaluation_stream, sample_rows, Stream};

pub const DEFAULT_PASSES_PER_EPOCH: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    /// One OS thread per worker.
    #[default]
    Parallel,
    /// Workers run one after another on the calling thread.
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitiveConfig {
    pub k: usize,
    pub workers: usize,
    pub s_min: usize,
    pub s_max: usize,
    pub passes_per_epoch: usize,
    pub epochs: usize,
    /// Wall-clock limit per worker, measured from the start of the run and
    /// checked between passes.
    pub time_budget: Option<Duration>,
    pub step: StepParams,
    pub seed: u64,
    pub execution: Execution,
}

impl CompetitiveConfig {
    pub fn new(k: usize, workers: usize, s_min: usize, s_max: usize, epochs: usize, seed: u64) -> Self {
        Self {
            k,
            workers,
            s_min,
            s_max,
            passes_per_epoch: DEFAULT_PASSES_PER_EPOCH,
            epochs,
            time_budget: None,
            step: StepParams::default(),
            seed,
            execution: Execution::Parallel,
        }
    }

    /// Checks the configuration against a dataset of `m` points.
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("k", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(invalid("workers", "must be at least 1"));
        }
        if self.passes_per_epoch == 0 {
            return Err(invalid("passes_per_epoch", "must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs", "must be at least 1"));
        }
        if self.s_min == 0 || self.s_min > self.s_max {
            return Err(invalid(
                "s_min",
                format!("need 1 <= s_min <= s_max, got [{}, {}]", self.s_min, self.s_max),
            ));
        }
        if self.s_max > m {
            return Err(Error::InvalidSampleSize { s: self.s_max, m });
        }
        if self.k > self.s_min {
            return Err(Error::TooFewPoints {
                k: self.k,
                m: self.s_min,
            });
        }
        if self.step.candidates == 0 {
            return Err(invalid("candidates", "must be at least 1"));
        }
        self.step.lloyd.validate()
    }
}

/// Sample-size range derived from a single Big-means sample size `s`:
/// `[s/2, min(2s, m)]`, with `s/2` rounded half up.
pub fn sample_range_around(s: usize, m: usize) -> (usize, usize) {
    let s_min = s.div_ceil(2).max(1);
    let s_max = (2 * s).min(m).max(s_min);
    (s_min, s_max)
}

/// Shared, append-only record of the sample sizes that produced an
/// improvement.
#[derive(Debug, Default)]
pub struct ImprovementLog {
    entries: Mutex<Vec<usize>>,
}

impl ImprovementLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&self, s: usize) {
        self.entries.lock().expect("improvement log poisoned").push(s);
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("improvement log poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entries in append order.
    pub fn snapshot(&self) -> Vec<usize> {
        self.entries.lock().expect("improvement log poisoned").clone()
    }
}

#[derive(Debug, Clone)]
pub struct WorkerState {
    pub id: usize,
    pub incumbent: Incumbent,
    /// Current sample size.
    pub s_w: usize,
    /// Completed epochs.
    pub epochs_done: usize,
    /// Passes completed in the current (or last) epoch.
    pub passes_done: usize,
    pub trace: RunTrace,
    rng: Stream,
}

impl WorkerState {
    pub fn new(id: usize, k: usize, dim: usize, cfg: &CompetitiveConfig) -> Result<Self> {
        Ok(Self {
            id,
            incumbent: Incumbent::new(k, dim)?,
            s_w: cfg.s_min,
            epochs_done: 0,
            passes_done: 0,
            trace: RunTrace::new(),
            rng: epoch_stream(cfg.seed, id, 0),
        })
    }

    pub fn centroids(&self) -> &CentroidSet {
        &self.incumbent.centroids
    }

    pub fn f_hat(&self) -> f64 {
        self.incumbent.f_hat
    }
}

/// Uniform integer in `[s_min, s_max]`, both ends included. A one-value range
/// does not consume randomness.
pub fn draw_sample_size<R: Rng + ?Sized>(rng: &mut R, s_min: usize, s_max: usize) -> usize {
    assert!(s_min <= s_max, "empty sample-size range [{s_min}, {s_max}]");
    if s_min == s_max {
        return s_min;
    }
    rng.random_range(s_min..=s_max)
}

/// Switches the worker to sample size `new_s` and re-measures its incumbent
/// on a fresh sample of that size. Centroids are left untouched. A worker
/// without an incumbent only records the new size.
pub fn recalibrate(worker: &mut WorkerState, new_s: usize, data: &DataMatrix) -> Result<()> {
    if new_s == 0 || new_s > data.rows() {
        return Err(Error::InvalidSampleSize {
            s: new_s,
            m: data.rows(),
        });
    }
    worker.s_w = new_s;
    if worker.incumbent.initialized() {
        let sample = sample_rows(&mut worker.rng, data, new_s)?;
        worker.incumbent.f_hat = evaluate_objective(&worker.incumbent.centroids, &sample)?;
    }
    Ok(())
}

/// One epoch of one worker: draw a sample size, recalibrate, then run up to
/// `p` Big-means passes, logging the sample size on every improvement.
///
/// `clock` is the run's start time; once the time budget has elapsed the
/// remaining passes are skipped (a worker's very first pass always runs).
pub fn run_worker_epoch(
    worker: &mut WorkerState,
    data: &DataMatrix,
    cfg: &CompetitiveConfig,
    log: &ImprovementLog,
    clock: Instant,
) -> Result<()> {
    if worker.epochs_done >= cfg.epochs {
        return Err(invalid(
            "epochs",
            format!("worker {} already completed {} epochs", worker.id, cfg.epochs),
        ));
    }
    let epoch = worker.epochs_done;
    worker.rng = epoch_stream(cfg.seed, worker.id, epoch);
    let s = draw_sample_size(&mut worker.rng, cfg.s_min, cfg.s_max);
    recalibrate(worker, s, data)?;
    if worker.incumbent.initialized() {
        worker
            .trace
            .push(clock.elapsed().as_secs_f64(), worker.incumbent.f_hat, epoch);
    }

    worker.passes_done = 0;
    let mut improvements = 0;
    while worker.passes_done < cfg.passes_per_epoch {
        if worker.incumbent.initialized() && out_of_time(cfg, clock) {
            break;
        }
        let outcome = big_means_step(
            data,
            &mut worker.incumbent,
            worker.s_w,
            &cfg.step,
            &mut worker.rng,
        )?;
        if outcome.improved {
            log.append(worker.s_w);
            improvements += 1;
        }
        worker.passes_done += 1;
        worker
            .trace
            .push(clock.elapsed().as_secs_f64(), worker.incumbent.f_hat, epoch);
    }
    worker.epochs_done += 1;
    info!(
        "worker {} epoch {}: s_w = {}, passes = {}, improvements = {}, f_hat = {}",
        worker.id, epoch, worker.s_w, worker.passes_done, improvements, worker.incumbent.f_hat
    );
    Ok(())
}

fn out_of_time(cfg: &CompetitiveConfig, clock: Instant) -> bool {
    cfg.time_budget.is_some_and(|t| clock.elapsed() >= t)
}

/// Runs all epochs of one worker, or until the time budget is spent.
pub fn run_worker(
    worker: &mut WorkerState,
    data: &DataMatrix,
    cfg: &CompetitiveConfig,
    log: &ImprovementLog,
    clock: Instant,
) -> Result<()> {
    while worker.epochs_done < cfg.epochs {
        if worker.incumbent.initialized() && out_of_time(cfg, clock) {
            break;
        }
        run_worker_epoch(worker, data, cfg, log, clock)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSizeChoice {
    pub s_opt: usize,
    /// Set when the log was empty and the range midpoint was used.
    pub fallback: bool,
}

/// Mean of the improvement log, rounded half up and clamped to
/// `[s_min, s_max]`. An empty log yields the range midpoint.
pub fn select_s_opt(entries: &[usize], s_min: usize, s_max: usize) -> SampleSizeChoice {
    if entries.is_empty() {
        warn!("improvement log is empty; using the midpoint of [{s_min}, {s_max}]");
        return SampleSizeChoice {
            s_opt: (s_min + s_max).div_ceil(2),
            fallback: true,
        };
    }
    let sum: u128 = entries.iter().map(|&s| s as u128).sum();
    let len = entries.len() as u128;
    // round(sum / len) with halves going up, in exact integer arithmetic
    let rounded = ((2 * sum + len) / (2 * len)) as usize;
    SampleSizeChoice {
        s_opt: rounded.clamp(s_min, s_max),
        fallback: false,
    }
}

/// Scores every worker's incumbent on one shared sample of size `s_opt`
/// (clamped to the dataset size) and returns the winner and all scores.
/// Workers without an incumbent score `inf`. Ties go to the lowest id.
pub fn final_evaluation<R: Rng + ?Sized>(
    workers: &mut [WorkerState],
    s_opt: usize,
    data: &DataMatrix,
    rng: &mut R,
) -> Result<(usize, Vec<f64>)> {
    let s = s_opt.clamp(1, data.rows());
    let sample = sample_rows(rng, data, s)?;
    let mut scores = Vec::with_capacity(workers.len());
    for w in workers.iter_mut() {
        if w.incumbent.initialized() {
            w.incumbent.f_hat = evaluate_objective(&w.incumbent.centroids, &sample)?;
        }
        scores.push(w.incumbent.f_hat);
    }
    let mut best: Option<usize> = None;
    for (i, &f) in scores.iter().enumerate() {
        if f.is_finite() && best.is_none_or(|b| f < scores[b]) {
            best = Some(i);
        }
    }
    Ok((best.ok_or(Error::NoIncumbent)?, scores))
}

#[derive(Debug, Clone)]
pub struct CompetitiveResult {
    /// Centroids of the winning worker, verbatim.
    pub centroids: CentroidSet,
    pub assignment: Assignment,
    pub s_opt: usize,
    pub s_opt_fallback: bool,
    /// Improvement log in append order.
    pub log: Vec<usize>,
    pub best_worker: usize,
    /// Every worker's score on the shared final sample.
    pub per_worker_f_hat: Vec<f64>,
    pub traces: Vec<RunTrace>,
    pub epochs_done: Vec<usize>,
}

/// Runs the full competitive algorithm on `data`.
pub fn run_competitive(data: &DataMatrix, cfg: &CompetitiveConfig) -> Result<CompetitiveResult> {
    let (workers, log) = run_workers(data, cfg)?;
    finish(data, cfg, workers, log)
}

/// The worker phase alone: every worker's final state and the improvement log.
pub fn run_workers(data: &DataMatrix, cfg: &CompetitiveConfig) -> Result<(Vec<WorkerState>, Vec<usize>)> {
    cfg.validate(data.rows())?;
    let mut workers = (0..cfg.workers)
        .map(|id| WorkerState::new(id, cfg.k, data.cols(), cfg))
        .collect::<Result<Vec<_>>>()?;
    let log = ImprovementLog::new();
    let clock = Instant::now();

    match cfg.execution {
        Execution::Sequential => {
            for w in workers.iter_mut() {
                run_worker(w, data, cfg, &log, clock)?;
            }
        }
        Execution::Parallel => {
            let log = &log;
            std::thread::scope(|scope| {
                let handles: Vec<_> = workers
                    .iter_mut()
                    .map(|w| scope.spawn(move || run_worker(w, data, cfg, log, clock)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("worker thread panicked"))
                    .collect::<Result<Vec<()>>>()
            })?;
        }
    }
    Ok((workers, log.snapshot()))
}

fn finish(
    data: &DataMatrix,
    cfg: &CompetitiveConfig,
    mut workers: Vec<WorkerState>,
    log: Vec<usize>,
) -> Result<CompetitiveResult> {
    let choice = select_s_opt(&log, cfg.s_min, cfg.s_max);
    let mut rng = final_evaluation_stream(cfg.seed);
    let (best, scores) = final_evaluation(&mut workers, choice.s_opt, data, &mut rng)?;
    let centroids = workers[best].incumbent.centroids.clone();
    let assignment = assign_all(data, &centroids)?;
    Ok(CompetitiveResult {
        centroids,
        assignment,
        s_opt: choice.s_opt,
        s_opt_fallback: choice.fallback,
        log,
        best_worker: best,
        per_worker_f_hat: scores,
        epochs_done: workers.iter().map(|w| w.epochs_done).collect(),
        traces: workers.into_iter().map(|w| w.trace).collect(),
    })
}
