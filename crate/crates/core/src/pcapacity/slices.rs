use alloc::vec;
use alloc::vec::Vec;

use crate::math::{cos, fabs, norm, sin, PI};
use crate::surface_geometry::{HoleShape, SliceSet};
use crate::{Error, Result};

use super::condenser::{solve_capacity, CapacityProblem, CondenserSet, Resolution};

/// `T ∩ {P_ν + tν}` in the plane coordinates of `orthonormal_complement(ν)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSlice {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub set: SliceSet,
}

pub fn slice(hole: &HoleShape, nu: &[f64], t: f64) -> Result<PlaneSlice> {
    if nu.len() != hole.dim() {
        return Err(Error::invalid("nu", "dimension differs from the hole"));
    }
    if fabs(norm(nu) - 1.0) > 1e-12 {
        return Err(Error::invalid("nu", "normal must be a unit vector"));
    }
    Ok(PlaneSlice { normal: nu.to_vec(), offset: t, set: hole.slice_set(nu, t) })
}

/// Grid for one slice, relative to the slice radius `r`: `B_R` with
/// `R = outer_factor · r` and base spacing `r / cells_per_radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceResolution {
    pub cells_per_radius: usize,
    pub levels: usize,
    pub outer_factor: f64,
}

impl Default for SliceResolution {
    fn default() -> Self {
        Self { cells_per_radius: 4, levels: 2, outer_factor: 4.0 }
    }
}

/// Global p-capacity of a slice, embedded as a flat set in `R^d`.
pub fn slice_capacity(p: f64, slice: &PlaneSlice, resolution: &SliceResolution) -> Result<f64> {
    if slice.set.is_empty() {
        return Ok(0.0);
    }
    let r = slice.set.bounding_radius();
    let d = slice.normal.len();
    let set = CondenserSet::Flat { slice: slice.set.clone(), shift: vec![0.0; d - 1] };
    let problem = CapacityProblem::new(
        p,
        resolution.outer_factor * r,
        set,
        Resolution::new(r / resolution.cells_per_radius as f64, resolution.levels)?,
    )?;
    Ok(solve_capacity(&problem)?.global)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCapacityOptions {
    /// Relative tolerance of the adaptive quadrature.
    pub tolerance: f64,
    pub max_depth: usize,
    pub slices: SliceResolution,
}

impl Default for MeanCapacityOptions {
    fn default() -> Self {
        Self { tolerance: 1e-2, max_depth: 6, slices: SliceResolution::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanCapacity {
    pub value: f64,
    /// `(t, cap_p(slice_t))` at every evaluated offset, sorted by `t`.
    pub table: Vec<(f64, f64)>,
    pub support: (f64, f64),
}

/// `∫ cap_p(T ∩ {P_ν + tν}) dt` over the support interval of `T` along `ν`.
pub fn mean_capacity(hole: &HoleShape, nu: &[f64], p: f64, options: &MeanCapacityOptions) -> Result<MeanCapacity> {
    let eval = |ts: &[f64]| -> Result<Vec<f64>> {
        ts.iter().map(|&t| slice_capacity(p, &slice(hole, nu, t)?, &options.slices)).collect()
    };
    mean_capacity_with(hole, nu, options, eval)
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    depth: usize,
}

impl Panel {
    fn simpson(&self) -> f64 {
        (self.b - self.a) / 6.0 * (self.fa + 4.0 * self.fm + self.fb)
    }
}

/// [`mean_capacity`] with a caller-supplied batch evaluator of slice
/// capacities at offsets `t` (for parallel evaluation).
///
/// Adaptive Simpson in `θ ∈ [0, π]` with `t = m − w cos θ`, which removes
/// the square-root behavior of slice capacities at the support ends.
pub fn mean_capacity_with<F>(hole: &HoleShape, nu: &[f64], options: &MeanCapacityOptions, eval: F) -> Result<MeanCapacity>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if fabs(norm(nu) - 1.0) > 1e-12 || nu.len() != hole.dim() {
        return Err(Error::invalid("nu", "normal must be a unit vector of the hole dimension"));
    }
    let (tmin, tmax) = hole.support_interval(nu);
    if !(tmax > tmin) {
        return Ok(MeanCapacity { value: 0.0, table: Vec::new(), support: (tmin, tmax) });
    }
    let mid = 0.5 * (tmin + tmax);
    let half = 0.5 * (tmax - tmin);
    let t_of = |th: f64| mid - half * cos(th);
    let mut table: Vec<(f64, f64)> = Vec::new();
    // integrand in θ from slice values
    let batch = |ths: &[f64], table: &mut Vec<(f64, f64)>| -> Result<Vec<f64>> {
        let inner: Vec<f64> = ths.iter().copied().filter(|&th| th > 0.0 && th < PI).collect();
        let ts: Vec<f64> = inner.iter().map(|&th| t_of(th)).collect();
        let caps = eval(&ts)?;
        if caps.len() != ts.len() {
            return Err(Error::invalid("evaluator", "returned the wrong number of values"));
        }
        let mut it = caps.iter();
        let mut out = Vec::with_capacity(ths.len());
        for (&th, _) in ths.iter().zip(0..) {
            if th > 0.0 && th < PI {
                let c = *it.next().unwrap_or(&0.0);
                table.push((t_of(th), c));
                out.push(c * half * sin(th));
            } else {
                out.push(0.0);
            }
        }
        Ok(out)
    };
    const START: usize = 4;
    let nodes: Vec<f64> = (0..=2 * START).map(|j| PI * j as f64 / (2 * START) as f64).collect();
    let f = batch(&nodes, &mut table)?;
    let mut pending: Vec<Panel> = (0..START)
        .map(|j| Panel { a: nodes[2 * j], b: nodes[2 * j + 2], fa: f[2 * j], fm: f[2 * j + 1], fb: f[2 * j + 2], depth: 0 })
        .collect();
    let mut accepted = 0.0;
    while !pending.is_empty() {
        let quarter: Vec<f64> = pending
            .iter()
            .flat_map(|p| [0.5 * (p.a + 0.5 * (p.a + p.b)), 0.5 * (0.5 * (p.a + p.b) + p.b)])
            .collect();
        let fq = batch(&quarter, &mut table)?;
        let estimate = accepted + pending.iter().map(Panel::simpson).sum::<f64>();
        let mut next = Vec::new();
        for (j, p) in pending.into_iter().enumerate() {
            let m = 0.5 * (p.a + p.b);
            let left = Panel { a: p.a, b: m, fa: p.fa, fm: fq[2 * j], fb: p.fm, depth: p.depth + 1 };
            let right = Panel { a: m, b: p.b, fa: p.fm, fm: fq[2 * j + 1], fb: p.fb, depth: p.depth + 1 };
            let whole = p.simpson();
            let split = left.simpson() + right.simpson();
            let allowed = 15.0 * options.tolerance * fabs(estimate) * (p.b - p.a) / PI;
            if fabs(split - whole) <= allowed || estimate == 0.0 {
                accepted += split + (split - whole) / 15.0;
            } else if p.depth + 1 >= options.max_depth {
                table.sort_by(|x, y| x.0.total_cmp(&y.0));
                return Err(Error::Quadrature { estimate, table });
            } else {
                next.push(left);
                next.push(right);
            }
        }
        pending = next;
    }
    table.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(MeanCapacity { value: accepted, table, support: (tmin, tmax) })
}
