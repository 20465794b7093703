//! Uniform Cartesian node grids and grid functions.
//!
//! Nodes are stored row-major: the last axis varies fastest. A cell is
//! addressed by its lower corner node.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{ceil, fabs, floor, pow};
use crate::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: Vec<usize>,
    strides: Vec<usize>,
    h: f64,
    origin: Vec<f64>,
}

impl Grid {
    pub fn new(origin: Vec<f64>, dims: Vec<usize>, h: f64) -> Result<Self> {
        let d = dims.len();
        if d == 0 || d > MAX_DIM {
            return Err(Error::invalid("dims", "grid dimension must be between 1 and 4"));
        }
        if origin.len() != d {
            return Err(Error::invalid("origin", "length differs from dims"));
        }
        if dims.iter().any(|&n| n < 2) {
            return Err(Error::invalid("dims", "each axis needs at least two nodes"));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid("h", "grid spacing must be positive"));
        }
        let mut strides = vec![1; d];
        for i in (0..d - 1).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        Ok(Self { dims, strides, h, origin })
    }

    /// Cube `[-m h, m h]^d` with `m = ⌈half_width / h⌉`, so the origin is a
    /// node.
    pub fn centered(dim: usize, half_width: f64, h: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::invalid("half_width", "must be positive"));
        }
        let m = ceil(half_width / h - 1e-9) as usize;
        Self::new(vec![-(m as f64) * h; dim], vec![2 * m + 1; dim], h)
    }

    /// Box grid whose nodes include both corners of `[lo, hi]`; the spacing
    /// is shrunk so every side holds a whole number of cells.
    pub fn fitted(lo: &[f64], hi: &[f64], target_h: f64) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::invalid("box", "corner lengths differ"));
        }
        let longest = lo.iter().zip(hi).map(|(a, b)| b - a).fold(0.0, f64::max);
        let cells = ceil(longest / target_h - 1e-9).max(1.0);
        let h = longest / cells;
        let dims = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| {
                let n = (b - a) / h;
                let r = libm::round(n);
                if fabs(n - r) > 1e-6 {
                    Err(Error::invalid("box", "side lengths are not commensurate with the spacing"))
                } else {
                    Ok(r as usize + 1)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(lo.to_vec(), dims, h)
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        pow(self.h, self.dim() as f64)
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for (o, s) in out.iter_mut().zip(&self.strides) {
            *o = idx / s;
            idx %= s;
        }
    }

    pub fn node_point(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for i in 0..self.dim() {
            let k = rem / self.strides[i];
            rem %= self.strides[i];
            out[i] = self.origin[i] + k as f64 * self.h;
        }
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.node_point(idx, &mut x);
        x
    }

    /// Whether the node lies on the boundary of the grid box.
    pub fn is_boundary_node(&self, idx: usize) -> bool {
        let mut rem = idx;
        for i in 0..self.dim() {
            let k = rem / self.strides[i];
            rem %= self.strides[i];
            if k == 0 || k + 1 == self.dims[i] {
                return true;
            }
        }
        false
    }

    /// Lower-corner node of every cell.
    pub fn cell_bases(&self) -> Vec<usize> {
        let count: usize = self.dims.iter().map(|n| n - 1).product();
        let mut out = Vec::with_capacity(count);
        let d = self.dim();
        let mut k = vec![0usize; d];
        loop {
            out.push(self.flat_index(&k));
            let mut axis = d;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                k[axis] += 1;
                if k[axis] + 1 < self.dims[axis] {
                    break;
                }
                k[axis] = 0;
            }
        }
    }

    /// Multilinear interpolation stencil at `x`, or `None` outside the grid.
    pub fn interpolation_stencil(&self, x: &[f64]) -> Option<Vec<(usize, f64)>> {
        let d = self.dim();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for i in 0..d {
            let u = (x[i] - self.origin[i]) / self.h;
            let top = (self.dims[i] - 1) as f64;
            if !(u >= -1e-9 && u <= top + 1e-9) {
                return None;
            }
            let u = u.clamp(0.0, top);
            let b = (floor(u) as usize).min(self.dims[i] - 2);
            base[i] = b;
            frac[i] = u - b as f64;
        }
        let mut out = Vec::with_capacity(1 << d);
        for corner in 0..(1usize << d) {
            let mut idx = 0;
            let mut w = 1.0;
            for i in 0..d {
                let up = (corner >> i) & 1 == 1;
                idx += (base[i] + up as usize) * self.strides[i];
                w *= if up { frac[i] } else { 1.0 - frac[i] };
            }
            if w != 0.0 {
                out.push((idx, w));
            }
        }
        Some(out)
    }

    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> Option<f64> {
        self.interpolation_stencil(x).map(|s| s.iter().map(|&(i, w)| w * values[i]).sum())
    }

    /// Samples a field on `self` at the nodes of `target`; nodes outside
    /// `self` get `fill`.
    pub fn resample(&self, values: &[f64], target: &Grid, fill: f64) -> Vec<f64> {
        let mut x = vec![0.0; target.dim()];
        (0..target.len())
            .map(|i| {
                target.node_point(i, &mut x);
                self.interpolate(values, &x).unwrap_or(fill)
            })
            .collect()
    }

    /// `(Σ |v_i|^p h^d)^{1/p}` over all nodes.
    pub fn lp_norm(&self, values: &[f64], p: f64) -> f64 {
        let s: f64 = values.iter().map(|v| pow(fabs(*v), p)).sum();
        pow(s * self.cell_volume(), 1.0 / p)
    }
}

/// A grid together with nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid("values", "length differs from the node count"));
        }
        Ok(Self { grid, values })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}
