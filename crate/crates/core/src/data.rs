//! Dense input matrices and 2-D embeddings.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Result};

/// Dense `n × D` matrix of input points, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    /// Wraps row-major `values`. Requires `n_rows ≥ 2`, `n_cols ≥ 1` and
    /// finite entries.
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if n_rows < 2 {
            return Err(invalid_input!("need at least 2 rows, got {n_rows}"));
        }
        if n_cols == 0 {
            return Err(invalid_input!("need at least 1 column"));
        }
        if values.len() != n_rows * n_cols {
            return Err(invalid_input!(
                "{} values do not fill a {n_rows}x{n_cols} matrix",
                values.len()
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid_input!(
                "non-finite entry at row {}, column {}",
                pos / n_cols,
                pos % n_cols
            ));
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(invalid_input!(
                    "row {i} has {} columns, expected {n_cols}",
                    r.len()
                ));
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), n_cols, values)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Squared Euclidean distance between rows `i` and `j`.
    #[inline]
    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.row(i), self.row(j))
    }

    /// Rows selected by `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.n_cols, values)
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Low-dimensional coordinates `y_i`, one `[x, y]` pair per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub coords: Vec<[f64; 2]>,
    /// Number of optimisation iterations applied so far.
    pub generation: usize,
}

impl Embedding {
    pub fn new(coords: Vec<[f64; 2]>) -> Result<Self> {
        if let Some(i) = coords
            .iter()
            .position(|c| !(c[0].is_finite() && c[1].is_finite()))
        {
            return Err(invalid_input!("non-finite coordinate for point {i}"));
        }
        Ok(Self {
            coords,
            generation: 0,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        let a = self.coords[i];
        let b = self.coords[j];
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        dx * dx + dy * dy
    }

    /// Axis-aligned bounding box as `([min_x, min_y], [max_x, max_y])`.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in &self.coords {
            for a in 0..2 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        (lo, hi)
    }

    /// Largest side of the bounding box.
    pub fn span(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi[0] - lo[0]).max(hi[1] - lo[1])
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coords: self
                .coords
                .iter()
                .map(|c| [c[0] * factor, c[1] * factor])
                .collect(),
            generation: self.generation,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coords
            .iter()
            .all(|c| c[0].is_finite() && c[1].is_finite())
    }
}
