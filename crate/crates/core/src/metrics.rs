//! Evaluation quantities: relative accuracy, baseline time and order statistics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Seconds since the start of the run.
    pub elapsed: f64,
    /// Best sample objective held at this moment.
    pub objective: f64,
    /// Run segment (epoch) the event belongs to. The objective is
    /// non-increasing within a segment only.
    pub segment: usize,
}

/// Timestamped objective trajectory of one run or one worker.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub events: Vec<TraceEvent>,
    pub final_full_objective: Option<f64>,
}

impl RunTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an event, nudging `elapsed` forward if the clock did not
    /// advance since the previous event.
    pub fn push(&mut self, elapsed: f64, objective: f64, segment: usize) {
        let elapsed = match self.events.last() {
            Some(last) if elapsed <= last.elapsed => last.elapsed.next_up(),
            _ => elapsed,
        };
        self.events.push(TraceEvent {
            elapsed,
            objective,
            segment,
        });
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Lowest objective seen anywhere in the trace.
    pub fn best_objective(&self) -> Option<f64> {
        self.events.iter().map(|e| e.objective).reduce(f64::min)
    }

    /// Interleaves several worker traces into one time-ordered trace.
    /// Segment numbers are kept as recorded.
    pub fn merge(traces: &[RunTrace]) -> RunTrace {
        let mut events: Vec<TraceEvent> = traces.iter().flat_map(|t| t.events.iter().copied()).collect();
        events.sort_by(|a, b| a.elapsed.total_cmp(&b.elapsed));
        let mut merged = RunTrace::new();
        for e in events {
            merged.push(e.elapsed, e.objective, e.segment);
        }
        merged
    }
}

/// `100 * (f - f_star) / f_star`, in percent. Negative when `f` beats the
/// reference.
pub fn relative_accuracy(f: f64, f_star: f64) -> Result<f64> {
    if !(f_star > 0.0) {
        return Err(Error::NonPositiveReference(f_star));
    }
    Ok(100.0 * (f - f_star) / f_star)
}

/// Earliest time at which the trace's objective is at or below `f_baseline`.
pub fn baseline_time(trace: &RunTrace, f_baseline: f64) -> Option<f64> {
    trace
        .events
        .iter()
        .find(|e| e.objective <= f_baseline)
        .map(|e| e.elapsed)
}

/// Baseline time of a multi-worker run: the fastest worker's time.
pub fn baseline_time_fastest(workers: &[RunTrace], f_baseline: f64) -> Option<f64> {
    workers
        .iter()
        .filter_map(|t| baseline_time(t, f_baseline))
        .reduce(f64::min)
}

/// Baseline sample objective: for every algorithm, the median over its runs
/// of each run's best sample objective; then the maximum of those medians.
///
/// Each inner slice holds the traces of one algorithm, one trace per run.
/// Multi-worker runs should be passed as a merged trace.
pub fn compute_baseline(per_algorithm: &[Vec<RunTrace>]) -> Result<f64> {
    if per_algorithm.is_empty() {
        return Err(invalid("traces", "no algorithms given"));
    }
    let mut worst = f64::NEG_INFINITY;
    for runs in per_algorithm {
        let finals = runs
            .iter()
            .map(|t| {
                t.best_objective()
                    .ok_or_else(|| invalid("traces", "empty run trace"))
            })
            .collect::<Result<Vec<f64>>>()?;
        worst = worst.max(summarize(&finals)?.median);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// Min, median and max. An even count takes the mean of the two middle values.
pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(invalid("values", "cannot summarize an empty list"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(Summary {
        min: sorted[0],
        median,
        max: sorted[n - 1],
    })
}
