//! Minimum-sum-of-squares clustering for large datasets.
//!
//! The crate provides Lloyd's K-means with greedy K-means++ seeding, the
//! sample-based Big-means heuristic, and a parallel Big-means in which
//! competing workers vary their sample size at random and pool the sizes
//! that led to improvements. Evaluation helpers (relative accuracy, baseline
//! time, order statistics) and a small benchmark runner sit on top.
//!
//! ```
//! use bigmeans::{ingest::synth_blobs, competitive::{run_competitive, CompetitiveConfig}};
//!
//! let (data, _) = synth_blobs(5_000, 2, 3, 1.0, 7).unwrap();
//! let cfg = CompetitiveConfig::new(3, 2, 100, 400, 3, 7);
//! let result = run_competitive(&data, &cfg).unwrap();
//! assert!((100..=400).contains(&result.s_opt));
//! assert_eq!(result.assignment.len(), 5_000);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod bigmeans;
pub mod competitive;
pub mod data;
pub mod error;
pub mod ingest;
pub mod kmeans;
pub mod metrics;
pub mod rng;

pub use data::{
    assign_all, evaluate_objective, nearest_centroid, squared_euclidean, Assignment, CentroidSet, DataMatrix,
};
pub use error::{Error, Result};
