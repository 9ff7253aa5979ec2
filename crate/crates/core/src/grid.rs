//! Square, origin-centred sample grids shared by modes, screens and overlaps.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n × n` grid with sample `(row, col)` at
/// `x = (col - (n-1)/2)·spacing`, `y = (row - (n-1)/2)·spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub spacing: f64,
}

impl GridSpec {
    pub fn new(n: usize, spacing: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("n", format!("grid side must be at least 2, got {n}")));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::param("spacing", format!("must be positive, got {spacing}")));
        }
        Ok(Self { n, spacing })
    }

    /// Grid with `n` samples spanning `extent` per side.
    pub fn with_extent(n: usize, extent: f64) -> Result<Self> {
        Self::new(n, extent / n as f64)
    }

    pub fn extent(&self) -> f64 {
        self.n as f64 * self.spacing
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn coord(&self, idx: usize) -> f64 {
        (idx as f64 - 0.5 * (self.n as f64 - 1.0)) * self.spacing
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }
}

/// Complex samples on a [`GridSpec`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub grid: GridSpec,
    pub data: Vec<Complex64>,
}

impl FieldGrid {
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> Complex64) -> Self {
        let xs = grid.coords();
        let mut data = Vec::with_capacity(grid.len());
        for &y in &xs {
            for &x in &xs {
                data.push(f(x, y));
            }
        }
        Self { grid, data }
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.grid.n + col]
    }

    /// Discrete `∫ conj(self)·other d²x`.
    pub fn inner(&self, other: &FieldGrid) -> Complex64 {
        debug_assert_eq!(self.grid, other.grid);
        let sum: Complex64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum();
        sum * self.grid.cell_area()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_are_symmetric() {
        let g = GridSpec::new(4, 0.5).unwrap();
        assert_eq!(g.coords(), vec![-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(g.extent(), 2.0);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec::new(1, 1.0).is_err());
        assert!(GridSpec::new(8, 0.0).is_err());
        assert!(GridSpec::new(8, f64::NAN).is_err());
    }
}
