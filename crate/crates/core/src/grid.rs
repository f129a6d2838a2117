//! Uniform cell-centred axes and tensor-product grids.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Uniform cell-centred axis on `[min, min + n * spacing]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub n: usize,
    pub spacing: f64,
}

const ALIGN_TOL: f64 = 1e-9;

/// Returns `k` when `value / step` is within tolerance of the integer `k`.
pub(crate) fn integer_ratio(value: f64, step: f64) -> Option<i64> {
    let r = value / step;
    let k = r.round();
    ((r - k).abs() < ALIGN_TOL * r.abs().max(1.0)).then_some(k as i64)
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if n == 0 || !(max > min) {
            return Err(invalid(format!("axis [{min}, {max}] with {n} cells")));
        }
        Ok(Self {
            min,
            n,
            spacing: (max - min) / n as f64,
        })
    }

    /// Axis whose extent must be an integer multiple of `spacing`.
    pub fn with_spacing(min: f64, max: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !(max > min) {
            return Err(invalid(format!(
                "axis [{min}, {max}] with spacing {spacing}"
            )));
        }
        let n = integer_ratio(max - min, spacing).ok_or_else(|| {
            Error::Misaligned(format!(
                "extent [{min}, {max}] is not a multiple of spacing {spacing}"
            ))
        })?;
        Ok(Self {
            min,
            n: n as usize,
            spacing,
        })
    }

    pub fn max(&self) -> f64 {
        self.min + self.n as f64 * self.spacing
    }

    pub fn length(&self) -> f64 {
        self.n as f64 * self.spacing
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.min + (i as f64 + 0.5) * self.spacing
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }

    /// Left face of cell `i` (`i == n` gives the right edge).
    pub fn face(&self, i: usize) -> f64 {
        self.min + i as f64 * self.spacing
    }
}

/// Row-major strides for `shape`.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

/// Tensor-product phase-space grid; storage order is `[x_1..x_d, p_1..p_d]`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub spatial: Vec<Axis>,
    pub momentum: Vec<Axis>,
}

impl PhaseGrid {
    pub fn new(spatial: Vec<Axis>, momentum: Vec<Axis>) -> Result<Self> {
        if spatial.is_empty() || spatial.len() != momentum.len() || spatial.len() > 2 {
            return Err(invalid(format!(
                "phase grid needs matching spatial/momentum dimensions (1 or 2), got {} and {}",
                spatial.len(),
                momentum.len()
            )));
        }
        Ok(Self { spatial, momentum })
    }

    pub fn dim(&self) -> usize {
        self.spatial.len()
    }

    pub fn axes(&self) -> impl Iterator<Item = &Axis> {
        self.spatial.iter().chain(self.momentum.iter())
    }

    pub fn axis(&self, k: usize) -> &Axis {
        let d = self.dim();
        if k < d {
            &self.spatial[k]
        } else {
            &self.momentum[k - d]
        }
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes().map(|a| a.n).collect()
    }

    pub fn len(&self) -> usize {
        self.axes().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spatial_len(&self) -> usize {
        self.spatial.iter().map(|a| a.n).product()
    }

    pub fn momentum_len(&self) -> usize {
        self.momentum.iter().map(|a| a.n).product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes().map(|a| a.spacing).product()
    }

    pub fn spatial_cell_volume(&self) -> f64 {
        self.spatial.iter().map(|a| a.spacing).product()
    }

    pub fn momentum_cell_volume(&self) -> f64 {
        self.momentum.iter().map(|a| a.spacing).product()
    }

    /// Spatial part as a standalone grid of cell-centred axes.
    pub fn spatial_axes(&self) -> &[Axis] {
        &self.spatial
    }

    /// Cell-centre coordinates of the spatial index `s` (row-major over spatial axes).
    pub fn spatial_point(&self, s: usize) -> [f64; 2] {
        let mut out = [0.0; 2];
        let mut rem = s;
        for k in (0..self.dim()).rev() {
            let n = self.spatial[k].n;
            out[k] = self.spatial[k].center(rem % n);
            rem /= n;
        }
        out
    }

    /// Cell-centre coordinates of the momentum index `m` (row-major over momentum axes).
    pub fn momentum_point(&self, m: usize) -> [f64; 2] {
        let mut out = [0.0; 2];
        let mut rem = m;
        for k in (0..self.dim()).rev() {
            let n = self.momentum[k].n;
            out[k] = self.momentum[k].center(rem % n);
            rem /= n;
        }
        out
    }
}
