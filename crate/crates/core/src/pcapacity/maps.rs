//! Smooth deformations of the computational domain. Solving the condenser
//! problem for a reference set `S` with the metric of a map `Φ` gives the
//! capacity of `Φ(S)` on the same grid, so two sets related by a small
//! deformation are compared without re-marking nodes.

use alloc::vec::Vec;

use crate::math::{atan2, cos, fabs, norm, sin, smooth_cutoff, sqrt, TAU};
use crate::surface_geometry::{ConvexSurface, HoleShape, UnitPatch};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CoordinateMap {
    Identity,
    ChordToArc(ChordToArc),
    RadialGauge(RadialGauge),
}

impl CoordinateMap {
    pub fn is_identity(&self) -> bool {
        matches!(self, CoordinateMap::Identity)
    }

    /// Whether `Φ` may differ from the identity within `margin` of `u`.
    pub fn is_active(&self, u: &[f64], margin: f64) -> bool {
        match self {
            CoordinateMap::Identity => false,
            CoordinateMap::ChordToArc(m) => {
                let r = norm(&[u[0] - m.hole_center[0], u[1] - m.hole_center[1]]);
                r < m.outer + margin
            }
            CoordinateMap::RadialGauge(m) => norm(u) < m.outer + margin,
        }
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        match self {
            CoordinateMap::Identity => out.copy_from_slice(u),
            CoordinateMap::ChordToArc(m) => m.apply(u, out),
            CoordinateMap::RadialGauge(m) => m.apply(u, out),
        }
    }
}

/// Planar map sending the chord `{(u₁, 0) : u₁ ∈ [l₂, r₂]}` of the tangent
/// line onto the arc `Γ ∩ T`, in a frame whose origin is a point `z₀` of
/// `Γ` and whose axes are the tangent and the upward normal there:
///
/// `Φ(u) = (u₁ + η(ψ(u₁) − u₁), u₂ + η q(ψ(u₁)))`
///
/// with `ψ` the affine map of chord endpoints to arc endpoints, `q` the
/// height of `Γ` over the tangent line and `η` a C² cutoff around the hole
/// center.
#[derive(Debug, Clone, PartialEq)]
pub struct ChordToArc {
    surface: ConvexSurface,
    center: Vec<f64>,
    scale: f64,
    origin: [f64; 2],
    tangent: [f64; 2],
    normal: [f64; 2],
    chord: (f64, f64),
    arc: (f64, f64),
    hole_center: [f64; 2],
    inner: f64,
    outer: f64,
}

/// Largest `s ∈ [0, limit]` with `inside(s)`, given `inside(0)`; bisection
/// assuming the inside set is an interval.
pub(crate) fn last_inside(inside: impl Fn(f64) -> bool, limit: f64) -> f64 {
    if inside(limit) {
        return limit;
    }
    let (mut lo, mut hi) = (0.0, limit);
    for _ in 0..80 {
        let m = 0.5 * (lo + hi);
        if inside(m) {
            lo = m;
        } else {
            hi = m;
        }
    }
    lo
}

impl ChordToArc {
    /// Frame at the template point `anchor` of `Γ` (inside the hole), for
    /// the cell with physical center `center` and hole size `scale`.
    pub fn new(surface: &ConvexSurface, center: Vec<f64>, scale: f64, hole: &HoleShape, anchor: &[f64]) -> Result<Self> {
        if surface.dim() != 2 || hole.dim() != 2 {
            return Err(Error::invalid("d", "the chord-to-arc map is planar"));
        }
        let patch = UnitPatch::new(surface, center.clone(), scale);
        let mut slope = [0.0];
        patch.gradient_into(&anchor[..1], &mut slope);
        let l = sqrt(1.0 + slope[0] * slope[0]);
        let tangent = [1.0 / l, slope[0] / l];
        let normal = [-slope[0] / l, 1.0 / l];
        let origin = [anchor[0], patch.height(&anchor[..1])];
        let br = hole.bounding_radius();
        let mut map = Self {
            surface: surface.clone(),
            center,
            scale,
            origin,
            tangent,
            normal,
            chord: (0.0, 0.0),
            arc: (0.0, 0.0),
            hole_center: [-(origin[0] * tangent[0] + origin[1] * tangent[1]), -(origin[0] * normal[0] + origin[1] * normal[1])],
            inner: 1.5 * br,
            outer: 3.0 * br,
        };
        let on_line = |u1: f64| hole.contains(&map.to_template(u1, 0.0));
        let on_arc = |u1: f64| {
            let (a, b) = map.graph_point(u1);
            hole.contains(&map.to_template(a, b))
        };
        if !on_line(0.0) || !on_arc(0.0) {
            return Err(Error::invalid("anchor", "anchor point must lie in the hole"));
        }
        let reach = 2.0 * br;
        let chord = (-last_inside(|s| on_line(-s), reach), last_inside(on_line, reach));
        let arc = (-last_inside(|s| on_arc(-s), reach), last_inside(on_arc, reach));
        map.chord = chord;
        map.arc = arc;
        Ok(map)
    }

    pub fn chord(&self) -> (f64, f64) {
        self.chord
    }

    pub fn arc(&self) -> (f64, f64) {
        self.arc
    }

    /// Hole center in frame coordinates.
    pub fn hole_center(&self) -> [f64; 2] {
        self.hole_center
    }

    fn to_template(&self, u1: f64, u2: f64) -> [f64; 2] {
        [
            self.origin[0] + u1 * self.tangent[0] + u2 * self.normal[0],
            self.origin[1] + u1 * self.tangent[1] + u2 * self.normal[1],
        ]
    }

    /// Point of `Γ` whose tangent coordinate is `u1`, as `(u1, q(u1))`.
    fn graph_point(&self, u1: f64) -> (f64, f64) {
        let patch = UnitPatch::new(&self.surface, self.center.clone(), self.scale);
        let mut s = self.origin[0] + u1 * self.tangent[0];
        let mut g = [0.0];
        for _ in 0..50 {
            let f = (s - self.origin[0]) * self.tangent[0] + (patch.height(&[s]) - self.origin[1]) * self.tangent[1] - u1;
            patch.gradient_into(&[s], &mut g);
            let df = self.tangent[0] + g[0] * self.tangent[1];
            let step = f / df;
            s -= step;
            if fabs(step) < 1e-15 * (1.0 + fabs(s)) {
                break;
            }
        }
        let q = (s - self.origin[0]) * self.normal[0] + (patch.height(&[s]) - self.origin[1]) * self.normal[1];
        (u1, q)
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let r = norm(&[u[0] - self.hole_center[0], u[1] - self.hole_center[1]]);
        let eta = smooth_cutoff(r, self.inner, self.outer);
        if eta == 0.0 {
            out.copy_from_slice(u);
            return;
        }
        let (l2, r2) = self.chord;
        let (l1, r1) = self.arc;
        let psi = l1 + (u[0] - l2) * (r1 - l1) / (r2 - l2);
        let (_, q) = self.graph_point(psi);
        out[0] = u[0] + eta * (psi - u[0]);
        out[1] = u[1] + eta * q;
    }
}

/// Radial stretch in the node plane `x_d = 0` (in-plane coordinates are
/// the first `d − 1` axes): `u' ↦ u' (1 + η(|u|)(s(û') − 1))`, which maps a
/// star-shaped set with radial function `ρ₁` onto one with `ρ₂ = s ρ₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGauge {
    dim: usize,
    /// `s` on a uniform angle table (plane dimension 2) or at `±` (plane
    /// dimension 1).
    ratios: Vec<f64>,
    inner: f64,
    outer: f64,
}

impl RadialGauge {
    /// Ratio table from two radial functions of the in-plane direction.
    pub fn from_radial_functions(
        dim: usize,
        rho_from: impl Fn(&[f64]) -> f64,
        rho_to: impl Fn(&[f64]) -> f64,
        inner: f64,
        outer: f64,
    ) -> Result<Self> {
        let dirs: Vec<Vec<f64>> = match dim {
            2 => alloc::vec![alloc::vec![1.0], alloc::vec![-1.0]],
            3 => (0..Self::TABLE).map(|j| {
                let th = TAU * j as f64 / Self::TABLE as f64;
                alloc::vec![cos(th), sin(th)]
            }).collect(),
            _ => return Err(Error::invalid("d", "radial gauges are implemented for d = 2 and d = 3")),
        };
        let mut ratios = Vec::with_capacity(dirs.len());
        for dir in &dirs {
            let a = rho_from(dir);
            if !(a > 0.0) {
                return Err(Error::invalid("slice", "the shared point must be interior to both slices"));
            }
            ratios.push(rho_to(dir) / a);
        }
        Ok(Self { dim, ratios, inner, outer })
    }

    const TABLE: usize = 4096;

    pub fn max_deviation(&self) -> f64 {
        self.ratios.iter().map(|s| fabs(s - 1.0)).fold(0.0, f64::max)
    }

    fn ratio(&self, u: &[f64]) -> f64 {
        if self.dim == 2 {
            return if u[0] >= 0.0 { self.ratios[0] } else { self.ratios[1] };
        }
        let th = atan2(u[1], u[0]);
        let pos = (if th < 0.0 { th + TAU } else { th }) / TAU * Self::TABLE as f64;
        let j = (pos as usize).min(Self::TABLE - 1);
        let f = pos - j as f64;
        self.ratios[j] * (1.0 - f) + self.ratios[(j + 1) % Self::TABLE] * f
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let eta = smooth_cutoff(norm(u), self.inner, self.outer);
        let inplane = &u[..d - 1];
        if eta == 0.0 || norm(inplane) == 0.0 {
            out.copy_from_slice(u);
            return;
        }
        let f = 1.0 + eta * (self.ratio(inplane) - 1.0);
        for i in 0..d - 1 {
            out[i] = u[i] * f;
        }
        out[d - 1] = u[d - 1];
    }
}
