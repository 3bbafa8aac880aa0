//! Delimited-text loading and synthetic Gaussian blobs.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{CentroidSet, DataMatrix};
use crate::error::{invalid, Error, Result};
use crate::rng::master_stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    None,
    /// Each feature mapped to `[0, 1]`; constant features become 0.
    MinMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSpec {
    pub path: PathBuf,
    pub delimiter: u8,
    pub skip_header: bool,
    /// Zero-based columns to keep, in output order. `None` keeps all.
    pub columns: Option<Vec<usize>>,
    pub normalization: Normalization,
}

impl IngestSpec {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            delimiter: b',',
            skip_header: false,
            columns: None,
            normalization: Normalization::None,
        }
    }
}

/// Reads a delimited numeric file into a matrix. Files ending in `.gz` are
/// decompressed on the fly.
pub fn load(spec: &IngestSpec) -> Result<DataMatrix> {
    let io_err = |source| Error::Io {
        path: spec.path.clone(),
        source,
    };
    let file = File::open(&spec.path).map_err(io_err)?;
    let reader: Box<dyn Read> = if is_gzip(&spec.path) {
        Box::new(MultiGzDecoder::new(BufReader::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    let mut data = parse(reader, spec)?;
    if spec.normalization == Normalization::MinMax {
        data = min_max(&data);
    }
    Ok(data)
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

fn parse<R: Read>(reader: R, spec: &IngestSpec) -> Result<DataMatrix> {
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .has_headers(spec.skip_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let parse_err = |line: u64, message: String| Error::Parse {
        path: spec.path.clone(),
        line,
        message,
    };

    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0;
    let mut record = csv::StringRecord::new();
    loop {
        let more = csv.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let selected: Vec<usize> = match &spec.columns {
            Some(cols) => cols.clone(),
            None => (0..record.len()).collect(),
        };
        match width {
            None => width = Some(selected.len()),
            Some(w) if spec.columns.is_none() && w != record.len() => {
                return Err(parse_err(
                    line,
                    format!("expected {w} fields, found {}", record.len()),
                ));
            }
            _ => {}
        }
        for c in selected {
            let field = record.get(c).ok_or_else(|| {
                parse_err(
                    line,
                    format!("column {} missing (row has {} fields)", c + 1, record.len()),
                )
            })?;
            let v: f64 = field.parse().map_err(|_| {
                parse_err(
                    line,
                    format!("column {}: cannot parse {field:?} as a number", c + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    line,
                    format!("column {}: non-finite value {field:?}", c + 1),
                ));
            }
            values.push(v);
        }
        rows += 1;
    }

    let cols = match width {
        Some(w) if rows > 0 => w,
        _ => return Err(Error::EmptyFile(spec.path.clone())),
    };
    DataMatrix::new(rows, cols, values)
}

/// Per-feature min-max scaling to `[0, 1]`. Constant features map to 0.
pub fn min_max(data: &DataMatrix) -> DataMatrix {
    let n = data.cols();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for row in data.iter_rows() {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    let values = data
        .iter_rows()
        .flat_map(|row| {
            row.iter().enumerate().map(|(j, &v)| {
                let span = hi[j] - lo[j];
                if span > 0.0 {
                    ((v - lo[j]) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
        })
        .collect::<Vec<_>>();
    DataMatrix::new(data.rows(), n, values).expect("scaled values are finite")
}

/// Half-width of the box the blob centers are drawn from.
pub const BLOB_CENTER_BOX: f64 = 10.0;

/// `k` isotropic Gaussian blobs of standard deviation `spread`, centers drawn
/// uniformly from `[-10, 10]^n`. Point `i` belongs to blob `i mod k`, so blob
/// sizes differ by at most one. Returns the data and the true centers.
pub fn synth_blobs(
    m: usize,
    n: usize,
    k: usize,
    spread: f64,
    seed: u64,
) -> Result<(DataMatrix, CentroidSet)> {
    if k == 0 || n == 0 {
        return Err(invalid("k", "k and n must be at least 1"));
    }
    if m < k {
        return Err(Error::TooFewPoints { k, m });
    }
    if !(spread >= 0.0) || !spread.is_finite() {
        return Err(invalid(
            "spread",
            format!("must be finite and >= 0, got {spread}"),
        ));
    }
    let mut rng = master_stream(seed);
    let centers: Vec<f64> = (0..k * n)
        .map(|_| rng.random_range(-BLOB_CENTER_BOX..=BLOB_CENTER_BOX))
        .collect();
    let mut values = Vec::with_capacity(m * n);
    for i in 0..m {
        let c = &centers[(i % k) * n..(i % k + 1) * n];
        for &mu in c {
            let z: f64 = rng.sample(StandardNormal);
            values.push(mu + spread * z);
        }
    }
    Ok((DataMatrix::new(m, n, values)?, CentroidSet::new(k, n, centers)?))
}
