//! Regular sampling grids.
//!
//! Axes are stored in coordinate order (x, y, z). Flat indices run with the
//! x axis fastest, i.e. row-major over an array shaped `[nz][ny][nx]`.

use crate::error::{Result, TcfError};
use crate::Vector;

/// `i`-th of `count` evenly spaced samples on `[lower, upper]`; both
/// endpoints are hit exactly.
pub(crate) fn sample(lower: f64, upper: f64, count: usize, i: usize) -> f64 {
    if i + 1 == count {
        upper
    } else {
        lower + (upper - lower) * (i as f64) / ((count - 1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<const N: usize> {
    pub counts: [usize; N],
    pub lower: [f64; N],
    pub upper: [f64; N],
}

impl<const N: usize> GridSpec<N> {
    pub fn new(counts: [usize; N], lower: [f64; N], upper: [f64; N]) -> Result<Self> {
        let grid = Self {
            counts,
            lower,
            upper,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Same sample count on every axis.
    pub fn cube(count: usize, lower: [f64; N], upper: [f64; N]) -> Result<Self> {
        Self::new([count; N], lower, upper)
    }

    pub fn validate(&self) -> Result<()> {
        for axis in 0..N {
            if self.counts[axis] < 2 {
                return Err(TcfError::InvalidGrid(format!(
                    "axis {axis} has {} samples, need at least 2",
                    self.counts[axis]
                )));
            }
            let (a, b) = (self.lower[axis], self.upper[axis]);
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(TcfError::InvalidGrid(format!(
                    "axis {axis} bounds [{a}, {b}] are not an increasing finite interval"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / ((self.counts[axis] - 1) as f64)
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        sample(self.lower[axis], self.upper[axis], self.counts[axis], i)
    }

    /// Per-axis indices of a flat index.
    pub fn unravel(&self, mut flat: usize) -> [usize; N] {
        let mut idx = [0; N];
        for (axis, slot) in idx.iter_mut().enumerate() {
            *slot = flat % self.counts[axis];
            flat /= self.counts[axis];
        }
        idx
    }

    pub fn ravel(&self, idx: [usize; N]) -> usize {
        let mut flat = 0;
        for axis in (0..N).rev() {
            flat = flat * self.counts[axis] + idx[axis];
        }
        flat
    }

    pub fn point(&self, flat: usize) -> Vector<N> {
        let idx = self.unravel(flat);
        Vector::<N>::from_fn(|axis, _| self.coordinate(axis, idx[axis]))
    }
}
