//! Weighted point sets, metrics, CSV ingestion and duplicate merging.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Distance function attached to a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
    Chebyshev,
}

impl Metric {
    /// Distance without a dimension check. Callers guarantee equal lengths.
    #[inline]
    pub fn eval(self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        let diffs = x.iter().zip(y).map(|(a, b)| (a - b).abs());
        match self {
            Metric::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Metric::Manhattan => diffs.sum(),
            Metric::Chebyshev => diffs.fold(0.0, f64::max),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "manhattan" | "l1" => Ok(Metric::Manhattan),
            "chebyshev" | "linf" => Ok(Metric::Chebyshev),
            other => Err(Error::InvalidParameter(format!("unknown metric '{other}'"))),
        }
    }
}

/// Checked distance between two coordinate vectors.
pub fn distance(metric: Metric, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(metric.eval(x, y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub id: usize,
    pub coords: Vec<f64>,
    pub weight: f64,
}

/// Read access shared by raw datasets and coarsened node lists.
pub trait PointSet: Sync {
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    fn metric(&self) -> Metric;
    fn coords(&self, idx: usize) -> &[f64];
    fn weight(&self, idx: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dist(&self, a: usize, b: usize) -> f64 {
        self.metric().eval(self.coords(a), self.coords(b))
    }
}

/// An immutable set of weighted points sharing one dimension and metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedDataset {
    points: Vec<WeightedPoint>,
    dim: usize,
    metric: Metric,
}

impl WeightedDataset {
    /// Validates dimensions, finiteness and positivity of weights.
    pub fn new(points: Vec<WeightedPoint>, metric: Metric) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyInput)?;
        let dim = first.coords.len();
        if dim == 0 {
            return Err(Error::Validation(
                "points must have at least one coordinate".into(),
            ));
        }
        let mut total = 0.0;
        for p in &points {
            if p.coords.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.coords.len(),
                });
            }
            if let Some(c) = p.coords.iter().find(|c| !c.is_finite()) {
                return Err(Error::Validation(format!(
                    "point {} has non-finite coordinate {c}",
                    p.id
                )));
            }
            if !(p.weight > 0.0 && p.weight.is_finite()) {
                return Err(Error::Validation(format!(
                    "point {} has weight {}; weights must be positive and finite",
                    p.id, p.weight
                )));
            }
            total += p.weight;
        }
        if !total.is_finite() {
            return Err(Error::Validation("total weight overflows".into()));
        }
        Ok(Self {
            points,
            dim,
            metric,
        })
    }

    /// Unit-weight dataset with ids in row order.
    pub fn from_coords(rows: Vec<Vec<f64>>, metric: Metric) -> Result<Self> {
        let points = rows
            .into_iter()
            .enumerate()
            .map(|(id, coords)| WeightedPoint {
                id,
                coords,
                weight: 1.0,
            })
            .collect();
        Self::new(points, metric)
    }

    pub fn from_weighted(rows: Vec<(Vec<f64>, f64)>, metric: Metric) -> Result<Self> {
        let points = rows
            .into_iter()
            .enumerate()
            .map(|(id, (coords, weight))| WeightedPoint { id, coords, weight })
            .collect();
        Self::new(points, metric)
    }

    pub fn points(&self) -> &[WeightedPoint] {
        &self.points
    }

    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }

    /// SHA-256 over dimension, coordinates and weights, as lowercase hex.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.dim as u64).to_le_bytes());
        for p in &self.points {
            for c in &p.coords {
                hasher.update(c.to_le_bytes());
            }
            hasher.update(p.weight.to_le_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

impl PointSet for WeightedDataset {
    fn len(&self) -> usize {
        self.points.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn metric(&self) -> Metric {
        self.metric
    }

    fn coords(&self, idx: usize) -> &[f64] {
        &self.points[idx].coords
    }

    fn weight(&self, idx: usize) -> f64 {
        self.points[idx].weight
    }
}

/// Bit pattern used for exact duplicate detection; `-0.0` is folded onto `0.0`.
fn coord_key(coords: &[f64]) -> Vec<u64> {
    coords.iter().map(|c| (c + 0.0).to_bits()).collect()
}

/// Merges points with identical coordinates into the lowest-id member.
///
/// Returns the merged dataset together with, for every input position, the
/// position of its representative in the output.
pub fn dedupe_with_map(ds: &WeightedDataset) -> (WeightedDataset, Vec<usize>) {
    let mut slot_of: HashMap<Vec<u64>, usize> = HashMap::with_capacity(ds.len());
    let mut kept: Vec<WeightedPoint> = Vec::with_capacity(ds.len());
    let mut map = Vec::with_capacity(ds.len());

    // Visit in id order so the smallest id becomes the representative.
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.sort_by_key(|&i| ds.points[i].id);
    let mut slot_by_pos = vec![0; ds.len()];
    for &pos in &order {
        let p = &ds.points[pos];
        let slot = *slot_of.entry(coord_key(&p.coords)).or_insert_with(|| {
            kept.push(WeightedPoint {
                id: p.id,
                coords: p.coords.clone(),
                weight: 0.0,
            });
            kept.len() - 1
        });
        kept[slot].weight += p.weight;
        slot_by_pos[pos] = slot;
    }
    map.extend_from_slice(&slot_by_pos);

    let out = WeightedDataset {
        points: kept,
        dim: ds.dim,
        metric: ds.metric,
    };
    (out, map)
}

pub fn dedupe(ds: &WeightedDataset) -> WeightedDataset {
    dedupe_with_map(ds).0
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Header name of the weight column; absent means unit weights.
    pub weight_column: Option<String>,
    /// Header names of columns to skip (e.g. ground-truth labels).
    pub exclude_columns: Vec<String>,
    pub metric: Metric,
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<WeightedDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, opts)
}

/// Parses numeric CSV. A first row containing any non-numeric field is
/// treated as a header.
pub fn read_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<WeightedDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let mut records = rdr.records().enumerate().peekable();
    let mut header: Option<Vec<String>> = None;
    if let Some((_, Ok(first))) = records.peek() {
        if first.iter().any(|f| f.parse::<f64>().is_err()) {
            header = Some(first.iter().map(str::to_owned).collect());
            records.next();
        }
    }

    let column_index = |name: &str| -> Result<usize> {
        let hdr = header.as_ref().ok_or_else(|| {
            Error::Validation(format!(
                "column '{name}' requested but the file has no header"
            ))
        })?;
        hdr.iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Validation(format!("column '{name}' not found in header")))
    };
    let weight_idx = opts
        .weight_column
        .as_deref()
        .map(column_index)
        .transpose()?;
    let mut skip: Vec<usize> = opts
        .exclude_columns
        .iter()
        .map(|c| column_index(c))
        .collect::<Result<_>>()?;
    skip.extend(weight_idx);

    let mut rows = Vec::new();
    let mut width = header.as_ref().map(Vec::len);
    for (line, rec) in records {
        let row = line + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        match width {
            Some(w) if w != rec.len() => {
                return Err(Error::Parse {
                    row,
                    message: format!("expected {w} fields, found {}", rec.len()),
                })
            }
            None => width = Some(rec.len()),
            _ => {}
        }
        let mut coords = Vec::with_capacity(rec.len());
        let mut weight = 1.0;
        for (col, field) in rec.iter().enumerate() {
            if skip.contains(&col) && Some(col) != weight_idx {
                continue;
            }
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                message: format!("field {} ('{field}') is not a number", col + 1),
            })?;
            if Some(col) == weight_idx {
                weight = value;
            } else {
                coords.push(value);
            }
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::Validation(format!(
                "row {row} has invalid weight {weight}"
            )));
        }
        rows.push((coords, weight));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    WeightedDataset::from_weighted(rows, opts.metric)
}
