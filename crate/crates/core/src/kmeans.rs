//! Lloyd iterations and greedy K-means++ seeding.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{nearest, sq_dist, Assignment, CentroidSet, DataMatrix};
use crate::error::{invalid, Error, Result};

/// Candidate draws per K-means++ center.
pub const DEFAULT_CANDIDATES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LloydConfig {
    pub max_iter: usize,
    /// Stop once the relative objective decrease falls below this value.
    pub rel_tol: f64,
}

impl Default for LloydConfig {
    fn default() -> Self {
        Self {
            max_iter: 300,
            rel_tol: 1e-4,
        }
    }
}

impl LloydConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(invalid("rel_tol", format!("must be >= 0, got {}", self.rel_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LloydResult {
    pub centroids: CentroidSet,
    pub objective: f64,
    /// Number of centroid update steps performed.
    pub iterations: usize,
    pub assignment: Assignment,
    /// Objective after every assignment pass, starting with the initial centroids.
    pub history: Vec<f64>,
}

/// Lloyd's algorithm from the given starting centroids.
///
/// A cluster that receives no points keeps its previous center and comes back
/// flagged degenerate; no reseeding happens here. Stops after `max_iter`
/// updates, when the labels stop changing, or when the relative objective
/// decrease drops below `rel_tol`.
pub fn lloyd(data: &DataMatrix, init: &CentroidSet, cfg: &LloydConfig) -> Result<LloydResult> {
    cfg.validate()?;
    if init.dim() != data.cols() {
        return Err(Error::DimensionMismatch {
            expected: data.cols(),
            got: init.dim(),
        });
    }
    let k = init.k();
    let n = data.cols();
    let mut centroids = init.clone();
    let mut labels = vec![0usize; data.rows()];
    let mut prev_labels: Option<Vec<usize>> = None;
    let mut counts = vec![0usize; k];
    let mut sums = vec![0.0f64; k * n];
    let mut history = Vec::new();
    let mut iterations = 0;

    loop {
        counts.fill(0);
        let mut objective = 0.0;
        for (label, x) in labels.iter_mut().zip(data.iter_rows()) {
            let (j, d) = nearest(x, &centroids);
            *label = j;
            counts[j] += 1;
            objective += d;
        }
        history.push(objective);

        let converged = objective == 0.0
            || match (history.len().checked_sub(2).map(|i| history[i]), &prev_labels) {
                (Some(prev), Some(prev_labels)) => {
                    *prev_labels == labels || (prev - objective) / objective.max(f64::EPSILON) < cfg.rel_tol
                }
                _ => false,
            };
        if converged || iterations == cfg.max_iter {
            for (j, &c) in counts.iter().enumerate() {
                centroids.set_degenerate(j, c == 0);
            }
            return Ok(LloydResult {
                centroids,
                objective,
                iterations,
                assignment: Assignment { labels },
                history,
            });
        }

        sums.fill(0.0);
        for (&j, x) in labels.iter().zip(data.iter_rows()) {
            for (s, v) in sums[j * n..(j + 1) * n].iter_mut().zip(x) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                centroids.set_degenerate(j, true);
                continue;
            }
            let inv = counts[j] as f64;
            for (c, s) in centroids.center_mut(j).iter_mut().zip(&sums[j * n..(j + 1) * n]) {
                *c = s / inv;
            }
            centroids.set_degenerate(j, false);
        }
        iterations += 1;
        prev_labels = Some(labels.clone());
    }
}

/// K-means++ seeding with greedy candidate selection.
///
/// The first center is a uniform draw. Every further center is the best of
/// `candidates` D²-weighted draws, where "best" means the lowest resulting
/// total squared distance over `data`. If every point already coincides with
/// a chosen center, the remaining centers are uniform duplicates flagged
/// degenerate.
pub fn kmeanspp_init<R: Rng + ?Sized>(
    data: &DataMatrix,
    k: usize,
    candidates: usize,
    rng: &mut R,
) -> Result<CentroidSet> {
    if k == 0 {
        return Err(invalid("k", "must be at least 1"));
    }
    if candidates == 0 {
        return Err(invalid("candidates", "must be at least 1"));
    }
    if k > data.rows() {
        return Err(Error::TooFewPoints { k, m: data.rows() });
    }
    let mut centroids = CentroidSet::uninitialized(k, data.cols())?;
    let slots: Vec<usize> = (0..k).collect();
    let fallbacks = fill_slots(data, &mut centroids, &slots, None, candidates, rng);
    for j in 0..k {
        centroids.set_degenerate(j, fallbacks.contains(&j));
    }
    Ok(centroids)
}

/// Replaces every degenerate centroid with a K-means++ draw from `data`.
///
/// Non-degenerate centers are kept verbatim. Degenerate ones are replaced in
/// index order; D² is measured against the kept centers plus those already
/// replaced, never against stale degenerate positions. All flags are cleared.
pub fn kmeanspp_reseed<R: Rng + ?Sized>(
    data: &DataMatrix,
    centroids: &CentroidSet,
    candidates: usize,
    rng: &mut R,
) -> Result<CentroidSet> {
    if centroids.dim() != data.cols() {
        return Err(Error::DimensionMismatch {
            expected: data.cols(),
            got: centroids.dim(),
        });
    }
    if candidates == 0 {
        return Err(invalid("candidates", "must be at least 1"));
    }
    let slots: Vec<usize> = (0..centroids.k())
        .filter(|&j| centroids.is_degenerate(j))
        .collect();
    if slots.is_empty() {
        return Err(Error::NothingToReseed);
    }
    let kept: Vec<&[f64]> = (0..centroids.k())
        .filter(|&j| !centroids.is_degenerate(j))
        .map(|j| centroids.center(j))
        .collect();
    let d2 = (!kept.is_empty()).then(|| {
        data.iter_rows()
            .map(|x| kept.iter().map(|c| sq_dist(x, c)).fold(f64::INFINITY, f64::min))
            .collect()
    });

    let mut out = centroids.clone();
    let fallbacks = fill_slots(data, &mut out, &slots, d2, candidates, rng);
    if !fallbacks.is_empty() {
        warn!(
            "sample of {} points has too few distinct points to reseed {} centroids; using uniform duplicates",
            data.rows(),
            slots.len()
        );
    }
    for j in slots {
        out.set_degenerate(j, false);
    }
    Ok(out)
}

/// Fills `slots` in order; returns the slots that fell back to a uniform draw
/// because all remaining D² mass was zero.
fn fill_slots<R: Rng + ?Sized>(
    data: &DataMatrix,
    centroids: &mut CentroidSet,
    slots: &[usize],
    mut d2: Option<Vec<f64>>,
    candidates: usize,
    rng: &mut R,
) -> Vec<usize> {
    let m = data.rows();
    let mut fallbacks = Vec::new();
    let mut cumulative = Vec::with_capacity(m);

    for &slot in slots {
        let pick = match d2.as_mut() {
            None => {
                let i = rng.random_range(0..m);
                d2 = Some(data.iter_rows().map(|x| sq_dist(x, data.row(i))).collect());
                i
            }
            Some(dist) => {
                cumulative.clear();
                let mut acc = 0.0;
                for &d in dist.iter() {
                    acc += d;
                    cumulative.push(acc);
                }
                if !(acc > 0.0) {
                    fallbacks.push(slot);
                    rng.random_range(0..m)
                } else {
                    let mut best: Option<(usize, f64, Vec<f64>)> = None;
                    for _ in 0..candidates {
                        let cand = weighted_pick(&cumulative, rng);
                        let c = data.row(cand);
                        let updated: Vec<f64> = data
                            .iter_rows()
                            .zip(dist.iter())
                            .map(|(x, &d)| d.min(sq_dist(x, c)))
                            .collect();
                        let potential: f64 = updated.iter().sum();
                        if best.as_ref().is_none_or(|(_, p, _)| potential < *p) {
                            best = Some((cand, potential, updated));
                        }
                    }
                    let (cand, _, updated) = best.expect("at least one candidate");
                    *dist = updated;
                    cand
                }
            }
        };
        centroids.center_mut(slot).copy_from_slice(data.row(pick));
    }
    fallbacks
}

/// Index drawn with probability proportional to its weight, given the running
/// sums of the weights. Zero-weight entries are never returned.
fn weighted_pick<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let total = *cumulative.last().expect("nonempty");
    let target = rng.random::<f64>() * total;
    let i = cumulative.partition_point(|&c| c <= target);
    if i < cumulative.len() {
        return i;
    }
    // target rounded up to total: the last positive-weight entry
    cumulative.partition_point(|&c| c < total)
}
