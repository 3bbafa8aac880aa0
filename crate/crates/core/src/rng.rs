//! Reproducible random streams and uniform sampling.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed, with the
//! ChaCha stream id selecting an independent sequence. A worker's epoch
//! stream depends only on `(seed, worker, epoch)`, so the order in which
//! workers are scheduled cannot change the numbers any of them sees.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

pub type Stream = ChaCha8Rng;

const FINAL_EVALUATION_STREAM: u64 = u64::MAX;

/// Stream for a standalone run (Big-means, K-means, synthetic data).
pub fn master_stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream owned by `worker` during `epoch`.
pub fn epoch_stream(seed: u64, worker: usize, epoch: usize) -> Stream {
    assert!(worker < (1 << 31) && epoch < (1 << 32), "stream id overflow");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((worker as u64) << 32) | epoch as u64);
    rng
}

/// Stream used for the shared sample of the final cross-worker evaluation.
pub fn final_evaluation_stream(seed: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(FINAL_EVALUATION_STREAM);
    rng
}

/// `s` distinct row indices drawn uniformly without replacement.
///
/// `s == m` returns every row in order without touching the generator.
pub fn sample_indices<R: Rng + ?Sized>(rng: &mut R, m: usize, s: usize) -> Result<Vec<usize>> {
    if s == 0 || s > m {
        return Err(Error::InvalidSampleSize { s, m });
    }
    if s == m {
        return Ok((0..m).collect());
    }
    Ok(index::sample(rng, m, s).into_vec())
}

/// Uniform sample of `s` rows of `data`, without replacement.
pub fn sample_rows<R: Rng + ?Sized>(rng: &mut R, data: &DataMatrix, s: usize) -> Result<DataMatrix> {
    if s == data.rows() {
        return Ok(data.clone());
    }
    let idx = sample_indices(rng, data.rows(), s)?;
    Ok(data.select_rows(&idx))
}
