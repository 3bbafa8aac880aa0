//! Result serialization. JSON is canonical; CSV only dumps centroids and labels.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;

use bigmeans::metrics::{relative_accuracy, RunTrace};
use bigmeans::{CentroidSet, DataMatrix};

/// Bumped whenever a field is renamed, removed or changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// JSON document written by the `kmeans`, `bigmeans` and `competitive`
/// subcommands. Fields that do not apply to an algorithm are omitted.
#[derive(Debug, Serialize)]
pub struct ClusteringOutput {
    pub schema_version: u32,
    pub algorithm: &'static str,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    /// Objective on the full dataset.
    pub objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_star: Option<f64>,
    /// Relative accuracy in percent, when a reference objective is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub centroids: Vec<Vec<f64>>,
    pub degenerate: Vec<bool>,
    pub labels: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_min: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_opt: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_opt_fallback: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_worker: Option<usize>,
    /// Scores on the shared final sample; `null` for a worker with no incumbent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_worker_f_hat: Option<Vec<f64>>,
    /// Improvement log, sorted ascending.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub improvement_log: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traces: Option<Vec<RunTrace>>,
}

impl ClusteringOutput {
    pub fn new(
        algorithm: &'static str,
        data: &DataMatrix,
        k: usize,
        seed: u64,
        centroids: &CentroidSet,
        labels: Vec<usize>,
        objective: f64,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            algorithm,
            m: data.rows(),
            n: data.cols(),
            k,
            seed,
            objective,
            f_star: None,
            epsilon: None,
            centroids: centroids.to_rows(),
            degenerate: centroids.degenerate_flags().to_vec(),
            labels,
            iterations: None,
            sample_objective: None,
            samples: None,
            s_min: None,
            s_max: None,
            s_opt: None,
            s_opt_fallback: None,
            best_worker: None,
            per_worker_f_hat: None,
            improvement_log: None,
            elapsed_seconds: None,
            traces: None,
        }
    }

    pub fn set_reference(&mut self, f_star: Option<f64>) -> bigmeans::Result<()> {
        if let Some(f) = f_star {
            self.epsilon = Some(relative_accuracy(self.objective, f)?);
            self.f_star = Some(f);
        }
        Ok(())
    }

    pub fn strip_timing(&mut self) {
        self.elapsed_seconds = None;
        self.traces = None;
    }
}

fn open(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_text(path: Option<&Path>, text: &str) -> io::Result<()> {
    let mut w = open(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()
}

/// One row per line, comma separated, shortest round-trip float formatting.
pub fn write_centroids_csv(path: Option<&Path>, rows: &[Vec<f64>]) -> io::Result<()> {
    let mut w = open(path)?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()
}

pub fn write_labels_csv(path: &Path, labels: &[usize]) -> io::Result<()> {
    let mut w = open(Some(path))?;
    for l in labels {
        writeln!(w, "{l}")?;
    }
    w.flush()
}
