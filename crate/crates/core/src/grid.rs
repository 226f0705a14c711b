//! Uniform nuclear-coordinate grids (up to 3 dimensions for field maps).

use crate::error::CoreError;
use serde::{Deserialize, Serialize};

/// One uniformly spaced axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub start: f64,
    pub step: f64,
    pub n: usize,
}

impl AxisSpec {
    pub fn point(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn end(&self) -> f64 {
        self.point(self.n - 1)
    }
}

/// Cartesian product of uniform axes, indexed row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct NuclearGrid {
    axes: Vec<AxisSpec>,
}

impl NuclearGrid {
    pub fn new(axes: Vec<AxisSpec>) -> Result<Self, CoreError> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(CoreError::Grid(format!(
                "field-map grids support 1..=3 axes, got {}",
                axes.len()
            )));
        }
        for (k, ax) in axes.iter().enumerate() {
            if !(ax.step > 0.0) {
                return Err(CoreError::Grid(format!("axis {k}: step must be > 0")));
            }
            if ax.n < 3 {
                return Err(CoreError::Grid(format!(
                    "axis {k}: need at least 3 points for central differences, got {}",
                    ax.n
                )));
            }
        }
        Ok(Self { axes })
    }

    /// 1-D convenience constructor.
    pub fn line(start: f64, step: f64, n: usize) -> Result<Self, CoreError> {
        Self::new(vec![AxisSpec { start, step, n }])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[AxisSpec] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &AxisSpec {
        &self.axes[k]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut rem = flat;
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = rem % self.axes[k].n;
            rem /= self.axes[k].n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for k in 0..self.dim() {
            debug_assert!(idx[k] < self.axes[k].n);
            flat = flat * self.axes[k].n + idx[k];
        }
        flat
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, ax)| ax.point(i))
            .collect()
    }

    /// Flat index of the neighbor displaced by `offset` along `axis`, if it
    /// stays inside the grid.
    pub fn neighbor(&self, flat: usize, axis: usize, offset: isize) -> Option<usize> {
        let mut idx = self.multi_index(flat);
        let i = idx[axis] as isize + offset;
        if i < 0 || i >= self.axes[axis].n as isize {
            return None;
        }
        idx[axis] = i as usize;
        Some(self.flat_index(&idx))
    }

    /// True when the point has both neighbors along every axis.
    pub fn is_interior(&self, flat: usize) -> bool {
        let idx = self.multi_index(flat);
        idx.iter()
            .zip(&self.axes)
            .all(|(&i, ax)| i > 0 && i + 1 < ax.n)
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|f| self.point(f))
    }
}
