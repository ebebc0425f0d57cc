//! Synthetic Gaussian grid datasets.
//!
//! Cell `(i, j)` of a `side x side` grid has mean `(10i + 5, 10j + 5)`; the
//! 3D variant adds a third index the same way. Each cell contributes
//! `samples_per_cell` draws from an isotropic normal with standard deviation
//! `sigma`.

use std::io::Write;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Metric, WeightedDataset};
use crate::error::{Error, Result};
use crate::rng;

pub const CELL_SPACING: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub side: usize,
    pub samples_per_cell: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            dim: 2,
            side: 10,
            samples_per_cell: 100,
            sigma: 2.0,
            seed: 0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !matches!(self.dim, 2 | 3) {
            return bad(format!("grid dimension must be 2 or 3, got {}", self.dim));
        }
        if self.side == 0 || self.samples_per_cell == 0 {
            return bad("side and samples per cell must be positive".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be non-negative, got {}", self.sigma));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn n_points(&self) -> usize {
        self.n_cells() * self.samples_per_cell
    }

    /// Mean of cell `cell`; the first axis varies fastest.
    pub fn cell_mean(&self, cell: usize) -> Vec<f64> {
        let mut rest = cell;
        (0..self.dim)
            .map(|_| {
                let i = rest % self.side;
                rest /= self.side;
                CELL_SPACING * i as f64 + CELL_SPACING / 2.0
            })
            .collect()
    }
}

/// Sampled points together with the index of the cell each came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSample {
    pub rows: Vec<Vec<f64>>,
    pub cells: Vec<usize>,
}

impl GridSample {
    pub fn dataset(&self) -> Result<WeightedDataset> {
        WeightedDataset::from_coords(self.rows.clone(), Metric::Euclidean)
    }

    /// CSV with one column per axis (`x`, `y`, `z`) and a trailing `label`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.rows.first().map_or(0, Vec::len);
        let header: Vec<&str> = ["x", "y", "z"][..dim]
            .iter()
            .copied()
            .chain(["label"])
            .collect();
        let to_err = |e: csv::Error| Error::Validation(format!("cannot write csv: {e}"));
        w.write_record(&header).map_err(to_err)?;
        for (row, cell) in self.rows.iter().zip(&self.cells) {
            let fields = row.iter().map(f64::to_string).chain([cell.to_string()]);
            w.write_record(fields).map_err(to_err)?;
        }
        w.flush()
            .map_err(|e| Error::Validation(format!("cannot write csv: {e}")))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io)?;
        let mut buf = std::io::BufWriter::new(file);
        self.write_csv(&mut buf)?;
        buf.flush().map_err(io)
    }
}

pub fn generate_grid(spec: &GridSpec) -> Result<GridSample> {
    spec.validate()?;
    let normal = Normal::new(0.0, spec.sigma)
        .map_err(|e| Error::InvalidParameter(format!("sigma {}: {e}", spec.sigma)))?;
    let mut rng = rng::stream(spec.seed, &[]);
    let mut rows = Vec::with_capacity(spec.n_points());
    let mut cells = Vec::with_capacity(spec.n_points());
    for cell in 0..spec.n_cells() {
        let mean = spec.cell_mean(cell);
        for _ in 0..spec.samples_per_cell {
            rows.push(mean.iter().map(|m| m + normal.sample(&mut rng)).collect());
            cells.push(cell);
        }
    }
    Ok(GridSample { rows, cells })
}
