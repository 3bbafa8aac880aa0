//! Sequential Big-means: K-means on a fresh uniform sample per iteration,
//! warm-started from the best centroids found so far.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{assign_all, evaluate_objective, Assignment, CentroidSet, DataMatrix};
use crate::error::{invalid, Error, Result};
use crate::kmeans::{kmeanspp_init, kmeanspp_reseed, lloyd, LloydConfig, DEFAULT_CANDIDATES};
use crate::metrics::RunTrace;
use crate::rng::sample_rows;

/// When to stop iterating. At least one limit is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopCondition {
    max_samples: Option<usize>,
    time_budget: Option<Duration>,
}

impl StopCondition {
    pub fn new(max_samples: Option<usize>, time_budget: Option<Duration>) -> Result<Self> {
        if max_samples.is_none() && time_budget.is_none() {
            return Err(invalid("stop", "need a sample limit or a time budget"));
        }
        if max_samples == Some(0) {
            return Err(invalid("max_samples", "must be at least 1"));
        }
        Ok(Self {
            max_samples,
            time_budget,
        })
    }

    pub fn samples(n: usize) -> Result<Self> {
        Self::new(Some(n), None)
    }

    pub fn time(budget: Duration) -> Result<Self> {
        Self::new(None, Some(budget))
    }

    pub fn max_samples(&self) -> Option<usize> {
        self.max_samples
    }

    pub fn time_budget(&self) -> Option<Duration> {
        self.time_budget
    }

    fn reached(&self, samples: usize, elapsed: Duration) -> bool {
        self.max_samples.is_some_and(|n| samples >= n) || self.time_budget.is_some_and(|t| elapsed >= t)
    }
}

/// Best centroids found so far and their sample objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub centroids: CentroidSet,
    /// Infinite until the first sample has been clustered.
    pub f_hat: f64,
}

impl Incumbent {
    /// `k` centroids, all degenerate, with `f_hat = inf`.
    pub fn new(k: usize, dim: usize) -> Result<Self> {
        Ok(Self {
            centroids: CentroidSet::uninitialized(k, dim)?,
            f_hat: f64::INFINITY,
        })
    }

    pub fn initialized(&self) -> bool {
        self.f_hat.is_finite()
    }
}

/// K-means settings used inside each Big-means step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub lloyd: LloydConfig,
    /// K-means++ candidates per center.
    pub candidates: usize,
}

impl Default for StepParams {
    fn default() -> Self {
        Self {
            lloyd: LloydConfig::default(),
            candidates: DEFAULT_CANDIDATES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub improved: bool,
    pub sample_objective: f64,
}

/// Starting centroids for K-means on `sample`: K-means++ if the incumbent is
/// empty, otherwise the incumbent with only its degenerate centers reseeded.
pub fn prepare_centroids<R: Rng + ?Sized>(
    sample: &DataMatrix,
    incumbent: &Incumbent,
    candidates: usize,
    rng: &mut R,
) -> Result<CentroidSet> {
    if !incumbent.initialized() {
        kmeanspp_init(sample, incumbent.centroids.k(), candidates, rng)
    } else if incumbent.centroids.degenerate_count() > 0 {
        kmeanspp_reseed(sample, &incumbent.centroids, candidates, rng)
    } else {
        Ok(incumbent.centroids.clone())
    }
}

/// One Big-means iteration on a fresh sample of size `s`.
///
/// The incumbent is replaced when the new sample objective is strictly lower
/// than `f_hat`, even though `f_hat` was measured on a different sample.
pub fn big_means_step<R: Rng + ?Sized>(
    data: &DataMatrix,
    incumbent: &mut Incumbent,
    s: usize,
    params: &StepParams,
    rng: &mut R,
) -> Result<StepOutcome> {
    if s == 0 || s > data.rows() {
        return Err(Error::InvalidSampleSize { s, m: data.rows() });
    }
    if incumbent.centroids.dim() != data.cols() {
        return Err(Error::DimensionMismatch {
            expected: data.cols(),
            got: incumbent.centroids.dim(),
        });
    }
    let sample = sample_rows(rng, data, s)?;
    let start = prepare_centroids(&sample, incumbent, params.candidates, rng)?;
    let result = lloyd(&sample, &start, &params.lloyd)?;
    let improved = result.objective < incumbent.f_hat;
    if improved {
        incumbent.centroids = result.centroids;
        incumbent.f_hat = result.objective;
    }
    Ok(StepOutcome {
        improved,
        sample_objective: result.objective,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigMeansConfig {
    pub k: usize,
    pub sample_size: usize,
    pub stop: StopCondition,
    pub step: StepParams,
}

#[derive(Debug, Clone)]
pub struct BigMeansResult {
    pub centroids: CentroidSet,
    pub assignment: Assignment,
    /// Sample objective of the returned centroids.
    pub f_hat: f64,
    /// `f_hat` after every step; `final_full_objective` holds the objective on
    /// the whole dataset.
    pub trace: RunTrace,
    pub samples: usize,
}

/// Runs Big-means until the stop condition and assigns every point to the
/// best centroids found. At least one sample is always processed.
pub fn big_means<R: Rng + ?Sized>(
    data: &DataMatrix,
    cfg: &BigMeansConfig,
    rng: &mut R,
) -> Result<BigMeansResult> {
    if cfg.k == 0 {
        return Err(invalid("k", "must be at least 1"));
    }
    if cfg.sample_size == 0 || cfg.sample_size > data.rows() {
        return Err(Error::InvalidSampleSize {
            s: cfg.sample_size,
            m: data.rows(),
        });
    }
    if cfg.k > cfg.sample_size {
        return Err(Error::TooFewPoints {
            k: cfg.k,
            m: cfg.sample_size,
        });
    }
    cfg.step.lloyd.validate()?;

    let start = Instant::now();
    let mut incumbent = Incumbent::new(cfg.k, data.cols())?;
    let mut trace = RunTrace::new();
    let mut samples = 0;
    loop {
        big_means_step(data, &mut incumbent, cfg.sample_size, &cfg.step, rng)?;
        samples += 1;
        let elapsed = start.elapsed();
        trace.push(elapsed.as_secs_f64(), incumbent.f_hat, 0);
        if cfg.stop.reached(samples, elapsed) {
            break;
        }
    }

    let assignment = assign_all(data, &incumbent.centroids)?;
    trace.final_full_objective = Some(evaluate_objective(&incumbent.centroids, data)?);
    Ok(BigMeansResult {
        centroids: incumbent.centroids,
        assignment,
        f_hat: incumbent.f_hat,
        trace,
        samples,
    })
}
