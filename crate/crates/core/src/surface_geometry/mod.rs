//! The convex surface `Γ: x_d = g(x')`, the periodic sieve `T_ε` and the
//! cells where they meet.

mod hole;
mod sieve;
mod surface;

use alloc::vec;
use alloc::vec::Vec;

pub use hole::{Halfspace, HoleShape, SliceSet};
pub use sieve::{critical_hole_size, CellIndex, SieveConfig};
pub use surface::{surface_point, tangent_plane, AxisBox, ConvexSurface, GraphFunction, Plane, SurfacePoint};

use crate::math::{ceil, dot, floor, norm, solve_dense, sqrt};

/// A cell `k` whose hole `εk + a_ε T` meets `Γ`, with a witness point of
/// `Γ ∩ (εk + a_ε T)` in physical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct HitCell {
    pub index: CellIndex,
    pub witness: Vec<f64>,
}

/// `Γ` seen from the hole of cell `k`, in template coordinates
/// `z = (x - εk) / a_ε`: the graph `z_d = G(z') = (g(εk' + a z') - εk_d)/a`.
#[derive(Debug, Clone)]
pub struct UnitPatch<'a> {
    surface: &'a ConvexSurface,
    center: Vec<f64>,
    scale: f64,
}

impl<'a> UnitPatch<'a> {
    pub fn new(surface: &'a ConvexSurface, center: Vec<f64>, scale: f64) -> Self {
        Self { surface, center, scale }
    }

    pub fn for_cell(surface: &'a ConvexSurface, sieve: &SieveConfig, k: &CellIndex) -> Self {
        Self::new(surface, sieve.hole_center(k), sieve.hole_size())
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    fn chart_point(&self, z: &[f64], out: &mut [f64]) {
        for i in 0..z.len() {
            out[i] = self.center[i] + self.scale * z[i];
        }
    }

    pub fn height(&self, z: &[f64]) -> f64 {
        let mut x = [0.0; 8];
        let n = z.len();
        self.chart_point(z, &mut x[..n]);
        (self.surface.value(&x[..n]) - self.center[n]) / self.scale
    }

    pub fn gradient_into(&self, z: &[f64], out: &mut [f64]) {
        let mut x = [0.0; 8];
        let n = z.len();
        self.chart_point(z, &mut x[..n]);
        self.surface.gradient_into(&x[..n], out);
    }

    pub fn hessian_into(&self, z: &[f64], out: &mut [f64]) {
        let mut x = [0.0; 8];
        let n = z.len();
        self.chart_point(z, &mut x[..n]);
        self.surface.hessian_into(&x[..n], out);
        out.iter_mut().for_each(|v| *v *= self.scale);
    }

    /// Upward unit normal at chart point `z'` (scale invariant).
    pub fn normal(&self, z: &[f64]) -> Vec<f64> {
        let n = z.len();
        let mut g = vec![0.0; n];
        self.gradient_into(z, &mut g);
        let mut nu: Vec<f64> = g.iter().map(|v| -v).collect();
        nu.push(1.0);
        let l = norm(&nu);
        nu.iter_mut().for_each(|v| *v /= l);
        nu
    }

    /// Nearest point of the graph to `y` (Newton on the first-order
    /// condition, started at `y'`). Returns the chart coordinates `z'`.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let d = y.len();
        let n = d - 1;
        let mut z = y[..n].to_vec();
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        let mut jac = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        for _ in 0..30 {
            let gv = self.height(&z);
            self.gradient_into(&z, &mut grad);
            self.hessian_into(&z, &mut hess);
            let r = gv - y[n];
            for i in 0..n {
                rhs[i] = -((z[i] - y[i]) + r * grad[i]);
                for j in 0..n {
                    jac[i * n + j] = if i == j { 1.0 } else { 0.0 } + grad[i] * grad[j] + r * hess[i * n + j];
                }
            }
            let step = match solve_dense(&jac, &rhs) {
                Some(s) => s,
                None => break,
            };
            z.iter_mut().zip(&step).for_each(|(a, b)| *a += b);
            if norm(&step) < 1e-14 * (1.0 + norm(&z)) {
                break;
            }
        }
        z
    }
}

/// Enumerates the cells `k` with `εk' ∈ Q'` (half-open) whose hole meets
/// `Γ`, sorted lexicographically, each with a witness point.
///
/// Candidates come from bracketing `g` over the hole's shadow with the
/// Hessian bounds, widened by one lattice layer; each candidate is then
/// decided on the hole itself by sampling the shadow and bisecting along
/// sample segments where the graph crosses the hole's mid-height.
pub fn enumerate_hit_cells(surface: &ConvexSurface, sieve: &SieveConfig, chart_box: &AxisBox) -> Vec<HitCell> {
    let d = sieve.d();
    assert_eq!(surface.dim(), d, "surface and sieve dimensions differ");
    let eps = sieve.eps();
    let a = sieve.hole_size();
    let hole = sieve.hole();
    let rho = a * hole.bounding_radius();
    let mut up = vec![0.0; d];
    up[d - 1] = 1.0;
    let (zlo, zhi) = hole.support_interval(&up);
    let c0 = surface.c0();
    let cmax = surface.c_max();

    let mut hits = Vec::new();
    for kc in lattice_points(chart_box, eps) {
        let xc: Vec<f64> = kc.iter().map(|&k| eps * k as f64).collect();
        let gc = surface.value(&xc);
        let gn = norm(&surface.gradient(&xc));
        let drop = if c0 > 0.0 { (-gn * rho + 0.5 * c0 * rho * rho).min(-gn * gn / (2.0 * c0)) } else { -gn * rho };
        let g_lo = gc + drop;
        let g_hi = gc + gn * rho + 0.5 * cmax * rho * rho;
        let kd_lo = ceil((g_lo - a * zhi) / eps) as i64 - 1;
        let kd_hi = floor((g_hi - a * zlo) / eps) as i64 + 1;
        for kd in kd_lo..=kd_hi {
            let mut k = kc.clone();
            k.push(kd);
            let index = CellIndex(k);
            let patch = UnitPatch::for_cell(surface, sieve, &index);
            if let Some(z) = find_witness(&patch, hole) {
                let witness: Vec<f64> = z.iter().zip(patch.center()).map(|(zz, c)| c + a * zz).collect();
                hits.push(HitCell { index, witness });
            }
        }
    }
    hits.sort_by(|x, y| x.index.cmp(&y.index));
    hits
}

/// All `k'` with `εk' ∈ Q'` (half-open), lexicographic.
pub fn lattice_points(chart_box: &AxisBox, eps: f64) -> Vec<Vec<i64>> {
    let ranges = chart_box.lattice_ranges(eps);
    let mut out = Vec::new();
    if ranges.iter().any(|(a, b)| b < a) {
        return out;
    }
    let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        out.push(cur.clone());
        let mut axis = cur.len();
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if cur[axis] < ranges[axis].1 {
                cur[axis] += 1;
                for j in axis + 1..cur.len() {
                    cur[j] = ranges[j].0;
                }
                break;
            }
        }
    }
}

/// A template-coordinate point of `graph ∩ T`, if any.
pub fn find_witness(patch: &UnitPatch<'_>, hole: &HoleShape) -> Option<Vec<f64>> {
    let n = patch.dim() - 1;
    let r = hole.bounding_radius();
    let mut center = vec![0.0; n];
    let mut half = r;
    let per_axis = if n == 1 { 65 } else { 25 };
    for _round in 0..4 {
        let samples = sample_shadow(patch, hole, &center, half, per_axis);
        for s in samples.iter().flatten() {
            if s.lo <= s.g && s.g <= s.hi {
                let mut w = s.z.clone();
                w.push(s.g);
                return Some(w);
            }
        }
        // adjacent samples on opposite sides of the mid-height
        let strides: Vec<usize> = (0..n).map(|ax| per_axis.pow(ax as u32)).collect();
        for (idx, s) in samples.iter().enumerate() {
            let Some(s) = s else { continue };
            for (ax, &st) in strides.iter().enumerate() {
                let coord = (idx / st) % per_axis;
                if coord + 1 == per_axis {
                    continue;
                }
                let Some(t) = &samples[idx + st] else { continue };
                if (s.g - s.mid()) * (t.g - t.mid()) < 0.0 {
                    if let Some(w) = bisect_crossing(patch, hole, &s.z, &t.z) {
                        return Some(w);
                    }
                }
                let _ = ax;
            }
        }
        // zoom on the closest miss
        let best = samples.iter().flatten().min_by(|x, y| x.margin().total_cmp(&y.margin()))?;
        let spacing = 2.0 * half / (per_axis - 1) as f64;
        center = best.z.clone();
        half = spacing;
    }
    None
}

struct ShadowSample {
    z: Vec<f64>,
    lo: f64,
    hi: f64,
    g: f64,
}

impl ShadowSample {
    fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn margin(&self) -> f64 {
        if self.g > self.hi {
            self.g - self.hi
        } else if self.g < self.lo {
            self.lo - self.g
        } else {
            0.0
        }
    }
}

fn sample_shadow(
    patch: &UnitPatch<'_>,
    hole: &HoleShape,
    center: &[f64],
    half: f64,
    per_axis: usize,
) -> Vec<Option<ShadowSample>> {
    let n = center.len();
    let total = per_axis.pow(n as u32);
    let step = 2.0 * half / (per_axis - 1) as f64;
    (0..total)
        .map(|idx| {
            let z: Vec<f64> = (0..n)
                .map(|ax| {
                    let i = (idx / per_axis.pow(ax as u32)) % per_axis;
                    center[ax] - half + step * i as f64
                })
                .collect();
            let (lo, hi) = hole.vertical_extent(&z)?;
            let g = patch.height(&z);
            Some(ShadowSample { z, lo, hi, g })
        })
        .collect()
}

fn bisect_crossing(patch: &UnitPatch<'_>, hole: &HoleShape, za: &[f64], zb: &[f64]) -> Option<Vec<f64>> {
    let at = |s: f64| -> Vec<f64> { za.iter().zip(zb).map(|(a, b)| a + s * (b - a)).collect() };
    let phi = |s: f64| -> Option<f64> {
        let z = at(s);
        let (lo, hi) = hole.vertical_extent(&z)?;
        Some(patch.height(&z) - 0.5 * (lo + hi))
    };
    let (mut s0, mut s1) = (0.0, 1.0);
    let f0 = phi(s0)?;
    for _ in 0..80 {
        let m = 0.5 * (s0 + s1);
        let fm = phi(m)?;
        if (fm < 0.0) == (f0 < 0.0) {
            s0 = m;
        } else {
            s1 = m;
        }
    }
    let z = at(0.5 * (s0 + s1));
    let (lo, hi) = hole.vertical_extent(&z)?;
    let g = patch.height(&z);
    if lo - 1e-12 <= g && g <= hi + 1e-12 {
        let mut w = z;
        w.push(g);
        Some(w)
    } else {
        None
    }
}

/// Distance from the hole center `εk` to `Γ` in template units, via the
/// nearest-point projection. Small values mean a central cut.
pub fn central_offset(surface: &ConvexSurface, sieve: &SieveConfig, k: &CellIndex) -> f64 {
    let patch = UnitPatch::for_cell(surface, sieve, k);
    let d = sieve.d();
    let origin = vec![0.0; d];
    let z = patch.project(&origin);
    let g = patch.height(&z);
    sqrt(dot(&z, &z) + g * g)
}
