use alloc::vec;
use alloc::vec::Vec;

use crate::math::{dot, fabs, norm, orthonormal_complement, pow};
use crate::surface_geometry::{
    find_witness, CellIndex, ConvexSurface, Halfspace, HoleShape, SieveConfig, SliceSet, UnitPatch,
};
use crate::{Error, Result};

use super::condenser::{
    solve_capacity, CapacityEstimate, CapacityProblem, CondenserSet, PlanePieceSet, Resolution, SurfacePatchSet,
};
use super::maps::{last_inside, ChordToArc, CoordinateMap, RadialGauge};

/// Capacity of `Γ_ε^k = Γ ∩ (εk + a_ε T)` in its cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCapacity {
    pub index: CellIndex,
    pub hole_size: f64,
    /// Template-scale condenser `((Γ − εk)/a_ε ∩ T, B_{R_ε})`.
    pub unit: CapacityEstimate,
    /// `unit.extrapolated · a_ε^{d−p}`.
    pub physical_condenser: f64,
    /// `unit.global · a_ε^{d−p}`.
    pub physical: f64,
}

fn template_witness(surface: &ConvexSurface, sieve: &SieveConfig, k: &CellIndex) -> Result<Vec<f64>> {
    let patch = UnitPatch::for_cell(surface, sieve, k);
    find_witness(&patch, sieve.hole()).ok_or(Error::CellNotHit)
}

/// Solves the cell problem at template scale in `B_{R_ε}`,
/// `R_ε = ε / (2 a_ε)`, and rescales by `a_ε^{d−p}`.
pub fn cell_capacity(
    surface: &ConvexSurface,
    sieve: &SieveConfig,
    k: &CellIndex,
    resolution: Resolution,
) -> Result<CellCapacity> {
    template_witness(surface, sieve, k)?;
    let set = CondenserSet::Patch(SurfacePatchSet {
        surface: surface.clone(),
        center: sieve.hole_center(k),
        scale: sieve.hole_size(),
        hole: sieve.hole().clone(),
    });
    let problem = CapacityProblem::new(sieve.p(), sieve.unit_cell_radius(), set, resolution)?;
    let unit = solve_capacity(&problem)?;
    let factor = pow(sieve.hole_size(), sieve.d() as f64 - sieve.p());
    Ok(CellCapacity {
        index: k.clone(),
        hole_size: sieve.hole_size(),
        physical_condenser: unit.extrapolated * factor,
        physical: unit.global * factor,
        unit,
    })
}

/// Two capacities computed on one grid and their difference.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityGap {
    pub gap: f64,
    pub reference: CapacityEstimate,
    pub compared: CapacityEstimate,
}

/// `|cap_p(Γ_ε^k) − cap_p(P_x ∩ T_ε^k)| / a_ε^{d−p}` at template scale, with
/// `P_x` the tangent plane at a point `x ∈ Γ_ε^k` (the point of `Γ` nearest
/// the hole center when it lies in the hole, the enumeration witness
/// otherwise). Capacities are global, computed in `B_R` with
/// `R = 5 radius(T)`.
///
/// In the plane, the arc is the image of the tangent chord under a smooth
/// map, so both capacities share the grid and the Dirichlet nodes and the
/// gap carries no marking noise. In higher dimensions both sets are marked
/// directly.
pub fn tangent_approx_gap(
    surface: &ConvexSurface,
    sieve: &SieveConfig,
    k: &CellIndex,
    resolution: Resolution,
) -> Result<CapacityGap> {
    let witness = template_witness(surface, sieve, k)?;
    let hole = sieve.hole();
    let d = sieve.d();
    let patch = UnitPatch::for_cell(surface, sieve, k);
    let mut nearest = patch.project(&vec![0.0; d]);
    nearest.push(patch.height(&nearest));
    let anchor = if hole.contains(&nearest) { nearest } else { witness };
    let outer = 5.0 * hole.bounding_radius();
    let (reference, compared) = if d == 2 {
        let map = ChordToArc::new(surface, sieve.hole_center(k), sieve.hole_size(), hole, &anchor)?;
        let (l2, r2) = map.chord();
        let chord = SliceSet::Polygon {
            dim: 1,
            facets: vec![
                Halfspace { normal: vec![1.0], offset: r2 },
                Halfspace { normal: vec![-1.0], offset: -l2 },
            ],
            radius: fabs(l2).max(fabs(r2)),
        };
        let set = CondenserSet::Flat { slice: chord, shift: vec![0.0] };
        let flat = CapacityProblem::new(sieve.p(), outer, set, resolution)?;
        let curved = flat.clone().with_map(CoordinateMap::ChordToArc(map));
        (solve_capacity(&flat)?, solve_capacity(&curved)?)
    } else {
        let normal = patch.normal(&anchor[..d - 1]);
        let plane = CondenserSet::PlanePiece(PlanePieceSet { point: anchor.clone(), normal, hole: hole.clone() });
        let curved = CondenserSet::Patch(SurfacePatchSet {
            surface: surface.clone(),
            center: sieve.hole_center(k),
            scale: sieve.hole_size(),
            hole: hole.clone(),
        });
        (
            solve_capacity(&CapacityProblem::new(sieve.p(), outer, plane, resolution)?)?,
            solve_capacity(&CapacityProblem::new(sieve.p(), outer, curved, resolution)?)?,
        )
    };
    Ok(CapacityGap { gap: fabs(compared.global - reference.global), reference, compared })
}

/// Rotation in `span(a, b)` taking the unit vector `a` to the unit vector
/// `b`, applied to `v`.
fn rotate(a: &[f64], b: &[f64], v: &[f64]) -> Vec<f64> {
    let c = dot(a, b);
    let mut w: Vec<f64> = b.iter().zip(a).map(|(bi, ai)| bi - c * ai).collect();
    let s = norm(&w);
    if s < 1e-15 {
        return v.to_vec();
    }
    w.iter_mut().for_each(|x| *x /= s);
    let (va, vw) = (dot(v, a), dot(v, &w));
    let ca = (c - 1.0) * va - s * vw;
    let cw = s * va + (c - 1.0) * vw;
    v.iter().zip(a).zip(&w).map(|((vi, ai), wi)| vi + ca * ai + cw * wi).collect()
}

/// `|cap_p(P₁ ∩ T) − cap_p(P₂ ∩ T)|` at template scale for the planes
/// through `x` with normals `ν₁`, `ν₂`. Capacities are global, in `B_R`
/// with `R = 5 radius(T)`.
///
/// The second slice is represented as the image of the first under a
/// radial stretch about `x` (its in-plane frame is the first one rotated
/// by the minimal rotation `ν₁ → ν₂`), so both solves share grid and
/// Dirichlet nodes.
pub fn plane_tilt_gap(
    hole: &HoleShape,
    nu1: &[f64],
    nu2: &[f64],
    p: f64,
    x: &[f64],
    resolution: Resolution,
) -> Result<CapacityGap> {
    let d = hole.dim();
    for nu in [nu1, nu2] {
        if nu.len() != d || fabs(norm(nu) - 1.0) > 1e-12 {
            return Err(Error::invalid("nu", "normals must be unit vectors of the hole dimension"));
        }
    }
    if x.len() != d || !(hole.signed_distance(x) < 0.0) {
        return Err(Error::invalid("x", "shared point must be interior to T"));
    }
    let basis1 = orthonormal_complement(nu1);
    let basis2: Vec<Vec<f64>> = basis1.iter().map(|b| rotate(nu1, nu2, b)).collect();
    let br = hole.bounding_radius();
    let reach = 2.0 * br;
    let radial = |basis: &Vec<Vec<f64>>, dir: &[f64]| -> f64 {
        let v: Vec<f64> = (0..d).map(|i| dir.iter().zip(basis).map(|(c, b)| c * b[i]).sum()).collect();
        last_inside(|r| hole.contains(&x.iter().zip(&v).map(|(a, b)| a + r * b).collect::<Vec<f64>>()), reach)
    };
    let gauge = RadialGauge::from_radial_functions(
        d,
        |dir| radial(&basis1, dir),
        |dir| radial(&basis2, dir),
        reach,
        3.5 * br,
    )?;
    let t1 = dot(nu1, x);
    let shift: Vec<f64> = basis1.iter().map(|b| dot(b, x)).collect();
    let set = CondenserSet::Flat { slice: hole.slice_set(nu1, t1), shift };
    let reference = CapacityProblem::new(p, 5.0 * br, set, resolution)?;
    let tilted = reference.clone().with_map(CoordinateMap::RadialGauge(gauge));
    let reference = solve_capacity(&reference)?;
    let compared = solve_capacity(&tilted)?;
    Ok(CapacityGap { gap: fabs(compared.global - reference.global), reference, compared })
}
