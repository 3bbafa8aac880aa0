//! Dense point storage, the squared Euclidean kernel and the MSSC objective.
//!
//! Everything here is read-only over its inputs. The objective is accumulated
//! in `f64` in row order; summation order is an implementation detail, so
//! comparisons across different code paths should use a relative tolerance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `m x n` matrix of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyData { rows, cols });
        }
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                len: values.len(),
                rows,
                cols,
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { values, rows, cols })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, values)
    }

    /// Number of points (m).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of features (n).
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Copies the given rows, in the given order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> DataMatrix {
        assert!(!indices.is_empty(), "cannot select zero rows");
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        DataMatrix {
            values,
            rows: indices.len(),
            cols: self.cols,
        }
    }

    /// Adds `offset` to every row. Used by the translation-invariance checks.
    pub fn translated(&self, offset: &[f64]) -> Result<DataMatrix> {
        check_dim(self.cols, offset.len())?;
        let values = self
            .iter_rows()
            .flat_map(|r| r.iter().zip(offset).map(|(a, b)| a + b))
            .collect();
        DataMatrix::new(self.rows, self.cols, values)
    }
}

/// `k x n` centroid coordinates plus a degeneracy flag per centroid.
///
/// A degenerate centroid keeps its last coordinates and stays eligible for
/// assignment; the flag only marks it for K-means++ reseeding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidSet {
    centers: Vec<f64>,
    degenerate: Vec<bool>,
    dim: usize,
}

impl CentroidSet {
    pub fn new(k: usize, dim: usize, centers: Vec<f64>) -> Result<Self> {
        if k == 0 || dim == 0 {
            return Err(Error::EmptyData { rows: k, cols: dim });
        }
        if centers.len() != k * dim {
            return Err(Error::ShapeMismatch {
                len: centers.len(),
                rows: k,
                cols: dim,
            });
        }
        Ok(Self {
            centers,
            degenerate: vec![false; k],
            dim,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = DataMatrix::from_rows(rows)?;
        Self::new(m.rows, m.cols, m.values)
    }

    /// `k` uninitialized centroids at the origin, all flagged degenerate.
    pub fn uninitialized(k: usize, dim: usize) -> Result<Self> {
        let mut c = Self::new(k, dim, vec![0.0; k * dim])?;
        c.degenerate.fill(true);
        Ok(c)
    }

    pub fn k(&self) -> usize {
        self.degenerate.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn center(&self, j: usize) -> &[f64] {
        &self.centers[j * self.dim..(j + 1) * self.dim]
    }

    pub(crate) fn center_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.centers[j * self.dim..(j + 1) * self.dim]
    }

    pub fn iter_centers(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.centers.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.centers
    }

    pub fn is_degenerate(&self, j: usize) -> bool {
        self.degenerate[j]
    }

    pub fn degenerate_flags(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }

    pub fn set_degenerate(&mut self, j: usize, flag: bool) {
        self.degenerate[j] = flag;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter_centers().map(<[f64]>::to_vec).collect()
    }

    pub fn translated(&self, offset: &[f64]) -> Result<CentroidSet> {
        check_dim(self.dim, offset.len())?;
        let centers = self
            .iter_centers()
            .flat_map(|r| r.iter().zip(offset).map(|(a, b)| a + b))
            .collect();
        Ok(CentroidSet {
            centers,
            degenerate: self.degenerate.clone(),
            dim: self.dim,
        })
    }
}

/// Cluster label per point, each in `[0, k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub labels: Vec<usize>,
}

impl Assignment {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of points per cluster.
    pub fn counts(&self, k: usize) -> Vec<usize> {
        let mut counts = vec![0; k];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

/// Lowest-index argmin; callers guarantee matching dimensions.
#[inline]
pub(crate) fn nearest(x: &[f64], centroids: &CentroidSet) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter_centers().enumerate() {
        let d = sq_dist(x, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    (best, best_d)
}

pub fn squared_euclidean(x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    Ok(sq_dist(x, y))
}

/// Index and squared distance of the closest centroid. Ties go to the lowest
/// index; degenerate centroids are eligible.
pub fn nearest_centroid(x: &[f64], centroids: &CentroidSet) -> Result<(usize, f64)> {
    check_dim(centroids.dim(), x.len())?;
    Ok(nearest(x, centroids))
}

/// Sum over all points of the squared distance to the nearest centroid.
pub fn evaluate_objective(centroids: &CentroidSet, data: &DataMatrix) -> Result<f64> {
    check_dim(centroids.dim(), data.cols())?;
    Ok(objective_unchecked(centroids, data))
}

pub(crate) fn objective_unchecked(centroids: &CentroidSet, data: &DataMatrix) -> f64 {
    data.iter_rows().map(|x| nearest(x, centroids).1).sum()
}

/// Nearest-centroid label for every point.
pub fn assign_all(data: &DataMatrix, centroids: &CentroidSet) -> Result<Assignment> {
    check_dim(centroids.dim(), data.cols())?;
    let labels = data
        .as_slice()
        .par_chunks_exact(data.cols())
        .map(|x| nearest(x, centroids).0)
        .collect();
    Ok(Assignment { labels })
}
