use alloc::vec;
use alloc::vec::Vec;

use crate::math::{dot, pow};
use crate::pcapacity::{cell_capacity, Resolution};
use crate::surface_geometry::{enumerate_hit_cells, AxisBox, CellIndex, ConvexSurface, SieveConfig, UnitPatch};
use crate::{Error, Result};

use super::measure::CapacityCache;

/// How the capacity of one cell, `cap_p(Γ_ε^k)`, is obtained.
#[derive(Debug)]
pub enum CellModel<'a> {
    /// Solve every cell condenser on its own grid ([`cell_capacity`]).
    Exact(Resolution),
    /// Replace `Γ_ε^k` by the slice of `T` with the tangent plane at the
    /// point of `Γ` nearest the hole center, read from the slice profile
    /// of its normal. Missing normals are computed into the cache.
    TangentSlices(&'a mut CapacityCache),
}

/// Tangent-plane data of a hit cell in template coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry {
    pub index: CellIndex,
    pub normal: Vec<f64>,
    /// `ν · x` for the nearest point `x` of `Γ`, so the tangent plane is
    /// `{P_ν + tν}`.
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellEnergy {
    pub geometry: CellGeometry,
    /// Template-scale capacity.
    pub unit: f64,
    /// `unit · a_ε^{d−p}`.
    pub physical: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorEnergy {
    pub eps: f64,
    pub total: f64,
    /// `|Q|`.
    pub volume: f64,
    pub cells: Vec<CellEnergy>,
}

impl CorrectorEnergy {
    /// `total / |Q|`.
    pub fn density(&self) -> f64 {
        self.total / self.volume
    }
}

/// Hit cells with hole center `εk` in `Q` (half-open), with their tangent
/// planes.
pub fn hit_cells_in(surface: &ConvexSurface, sieve: &SieveConfig, q: &AxisBox) -> Result<Vec<CellGeometry>> {
    let d = sieve.d();
    if q.dim() != d || surface.dim() != d {
        return Err(Error::invalid("Q", "box dimension differs from the sieve"));
    }
    let chart = AxisBox::new(q.lo[..d - 1].to_vec(), q.hi[..d - 1].to_vec())?;
    if !chart.is_subset_of(surface.domain()) {
        return Err(Error::invalid("Q", "box must lie over the surface chart"));
    }
    let mut out = Vec::new();
    for hit in enumerate_hit_cells(surface, sieve, &chart) {
        let center = sieve.hole_center(&hit.index);
        if !q.contains_half_open(&center) {
            continue;
        }
        let patch = UnitPatch::for_cell(surface, sieve, &hit.index);
        let z = patch.project(&vec![0.0; d]);
        let mut x = z.clone();
        x.push(patch.height(&z));
        let normal = patch.normal(&z);
        let offset = dot(&normal, &x);
        out.push(CellGeometry { index: hit.index, normal, offset });
    }
    Ok(out)
}

/// `Σ_{k : εk ∈ Q} cap_p(Γ_ε^k)`, the energy of the corrector `w_ε`
/// in `Q` up to `o(a_ε^{d−p})` per cell.
pub fn corrector_energy(
    surface: &ConvexSurface,
    sieve: &SieveConfig,
    q: &AxisBox,
    model: CellModel<'_>,
) -> Result<CorrectorEnergy> {
    let cells = hit_cells_in(surface, sieve, q)?;
    let factor = pow(sieve.hole_size(), sieve.d() as f64 - sieve.p());
    let mut out = Vec::with_capacity(cells.len());
    match model {
        CellModel::Exact(resolution) => {
            for geometry in cells {
                let c = cell_capacity(surface, sieve, &geometry.index, resolution)?;
                out.push(CellEnergy { unit: c.unit.global, physical: c.physical, geometry });
            }
        }
        CellModel::TangentSlices(cache) => {
            if cache.hole() != sieve.hole() || cache.p() != sieve.p() {
                return Err(Error::invalid("cache", "built for another template or exponent"));
            }
            let normals: Vec<Vec<f64>> = cells.iter().map(|c| c.normal.clone()).collect();
            cache.fill(&normals)?;
            for geometry in cells {
                let profile = cache.get(&geometry.normal).ok_or(Error::invalid("cache", "normal missing"))?;
                let unit = profile.capacity_at(geometry.offset);
                out.push(CellEnergy { unit, physical: unit * factor, geometry });
            }
        }
    }
    let total = out.iter().map(|c| c.physical).sum();
    Ok(CorrectorEnergy { eps: sieve.eps(), total, volume: q.volume(), cells: out })
}
