use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{Grid, GridField};
use crate::math::{fabs, log, norm, pow, solve_dense, sqrt, unit_sphere_area};
use crate::solver::{minimize, CellMetric, GridEnergy, SolverOptions};
use crate::surface_geometry::{ConvexSurface, HoleShape, SliceSet, UnitPatch};
use crate::{Error, Result};

use super::maps::CoordinateMap;

/// A compact set `S` whose capacity is measured, in template coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum CondenserSet {
    Empty { dim: usize },
    /// A full hole template.
    Solid(HoleShape),
    /// `{(u, 0) : u + shift ∈ slice}` inside the node plane `x_d = 0`.
    Flat { slice: SliceSet, shift: Vec<f64> },
    /// `Γ ∩ T` for a graph surface seen from one cell.
    Patch(SurfacePatchSet),
    /// `P ∩ T` for an arbitrary hyperplane `P`.
    PlanePiece(PlanePieceSet),
    /// `factor · S`.
    Scaled { set: Box<CondenserSet>, factor: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePatchSet {
    pub surface: ConvexSurface,
    /// Physical hole center `εk`.
    pub center: Vec<f64>,
    /// Hole size `a_ε`.
    pub scale: f64,
    pub hole: HoleShape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanePieceSet {
    pub point: Vec<f64>,
    /// Unit normal.
    pub normal: Vec<f64>,
    pub hole: HoleShape,
}

fn hole_feature(hole: &HoleShape) -> f64 {
    match hole {
        HoleShape::Ball { radius, .. } => *radius,
        HoleShape::Box { half } => half.iter().copied().fold(f64::INFINITY, f64::min),
        HoleShape::Polytope { .. } => -hole.signed_distance(&vec![0.0; hole.dim()]),
    }
}

impl CondenserSet {
    pub fn dim(&self) -> usize {
        match self {
            CondenserSet::Empty { dim } => *dim,
            CondenserSet::Solid(h) => h.dim(),
            CondenserSet::Flat { slice, .. } => slice.dim() + 1,
            CondenserSet::Patch(p) => p.hole.dim(),
            CondenserSet::PlanePiece(p) => p.hole.dim(),
            CondenserSet::Scaled { set, .. } => set.dim(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            CondenserSet::Empty { .. } => true,
            CondenserSet::Flat { slice, .. } => slice.is_empty(),
            CondenserSet::Scaled { set, .. } => set.is_empty(),
            _ => false,
        }
    }

    /// Radius of an origin-centered ball containing `S`.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            CondenserSet::Empty { .. } => 0.0,
            CondenserSet::Solid(h) => h.bounding_radius(),
            CondenserSet::Flat { slice, shift } => {
                if slice.is_empty() {
                    0.0
                } else {
                    slice.bounding_radius() + norm(shift)
                }
            }
            CondenserSet::Patch(p) => p.hole.bounding_radius(),
            CondenserSet::PlanePiece(p) => p.hole.bounding_radius(),
            CondenserSet::Scaled { set, factor } => factor * set.bounding_radius(),
        }
    }

    /// Thinnest half-width of `S` (codimension-one sets report the in-plane
    /// width of the underlying hole).
    pub fn feature_size(&self) -> f64 {
        match self {
            CondenserSet::Empty { .. } => f64::INFINITY,
            CondenserSet::Solid(h) => hole_feature(h),
            CondenserSet::Flat { slice, .. } => slice.inradius_bound(),
            CondenserSet::Patch(p) => hole_feature(&p.hole),
            CondenserSet::PlanePiece(p) => hole_feature(&p.hole),
            CondenserSet::Scaled { set, factor } => factor * set.feature_size(),
        }
    }

    /// Distance from `x` to `S`. Exact for solid balls, boxes and flat
    /// disks; elsewhere it is exact near `S` and a lower bound away from it.
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            CondenserSet::Empty { .. } => f64::INFINITY,
            CondenserSet::Solid(h) => h.signed_distance(x).max(0.0),
            CondenserSet::Flat { slice, shift } => {
                let d = x.len();
                let u: Vec<f64> = x[..d - 1].iter().zip(shift).map(|(a, b)| a + b).collect();
                let inplane = slice.signed_distance(&u).max(0.0);
                sqrt(inplane * inplane + x[d - 1] * x[d - 1])
            }
            CondenserSet::PlanePiece(piece) => {
                let s: f64 = x.iter().zip(&piece.point).zip(&piece.normal).map(|((a, b), n)| (a - b) * n).sum();
                let z: Vec<f64> = x.iter().zip(&piece.normal).map(|(a, n)| a - s * n).collect();
                let dt = piece.hole.signed_distance(&z).max(0.0);
                sqrt(s * s + dt * dt)
            }
            CondenserSet::Patch(patch) => {
                let to_hole = patch.hole.signed_distance(x);
                if to_hole > 0.5 * patch.hole.bounding_radius() {
                    return to_hole;
                }
                let unit = UnitPatch::new(&patch.surface, patch.center.clone(), patch.scale);
                let d = x.len();
                let mut z = unit.project(x);
                let g = unit.height(&z);
                z.push(g);
                let dg2: f64 = x.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
                let dt = patch.hole.signed_distance(&z[..d]).max(0.0);
                sqrt(dg2 + dt * dt)
            }
            CondenserSet::Scaled { set, factor } => {
                let y: Vec<f64> = x.iter().map(|v| v / factor).collect();
                factor * set.distance(&y)
            }
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        match self {
            CondenserSet::Scaled { set, factor: f } => CondenserSet::Scaled { set, factor: f * factor },
            other => CondenserSet::Scaled { set: Box::new(other), factor },
        }
    }
}

/// Base spacing and number of refinement levels (`h, h/2, h/4, …`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub h: f64,
    pub levels: usize,
}

impl Resolution {
    pub fn new(h: f64, levels: usize) -> Result<Self> {
        if !(h > 0.0) || levels == 0 {
            return Err(Error::invalid("resolution", "need h > 0 and at least one level"));
        }
        Ok(Self { h, levels })
    }

    pub fn finest(&self) -> f64 {
        self.h / (1u64 << (self.levels - 1)) as f64
    }
}

/// Condenser `(S, B_R)`: minimize `∫ |∇w|^p` over `w = 1` on `S`, `w = 0`
/// outside `B_R`.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityProblem {
    d: usize,
    p: f64,
    outer_radius: f64,
    set: CondenserSet,
    map: CoordinateMap,
    resolution: Resolution,
    solver: Option<SolverOptions>,
}

impl CapacityProblem {
    pub fn new(p: f64, outer_radius: f64, set: CondenserSet, resolution: Resolution) -> Result<Self> {
        let d = set.dim();
        if d < 2 {
            return Err(Error::invalid("d", "dimension must be at least 2"));
        }
        if !(p > 1.0 && p < d as f64) {
            return Err(Error::invalid("p", "exponent must satisfy 1 < p < d"));
        }
        if !(outer_radius > 0.0) {
            return Err(Error::invalid("outer_radius", "must be positive"));
        }
        if !set.is_empty() && set.bounding_radius() >= outer_radius {
            return Err(Error::invalid("set", "condenser set must lie inside B_R"));
        }
        Ok(Self { d, p, outer_radius, set, map: CoordinateMap::Identity, resolution, solver: None })
    }

    /// Solves in computational coordinates `u` the energy of `w ∘ Φ⁻¹`
    /// where `Φ` is `map`; the set is marked in `u`.
    pub fn with_map(mut self, map: CoordinateMap) -> Self {
        self.map = map;
        self
    }

    /// Fixed solver options for every level (default: per-level
    /// [`SolverOptions::for_grid`]).
    pub fn with_solver(mut self, options: SolverOptions) -> Self {
        self.solver = Some(options);
        self
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    pub fn set(&self) -> &CondenserSet {
        &self.set
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn map(&self) -> &CoordinateMap {
        &self.map
    }

    /// The same problem with set, radius and spacing multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::invalid("t", "scale factor must be positive"));
        }
        if !self.map.is_identity() {
            return Err(Error::invalid("map", "scaling is defined for unmapped problems only"));
        }
        let mut out = Self::new(
            self.p,
            self.outer_radius * t,
            self.set.clone().scaled(t),
            Resolution { h: self.resolution.h * t, levels: self.resolution.levels },
        )?;
        out.solver = self.solver.clone();
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementLevel {
    pub h: f64,
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub marked_nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CapacityFlags {
    /// No node was marked at the finest level; the value is 0.
    pub empty_marking: bool,
    /// Some refinement step increased the value.
    pub refinement_not_monotone: bool,
    /// `S` is not contained in `B_{R/4}`.
    pub set_near_boundary: bool,
    /// The base spacing exceeds a quarter of the feature size.
    pub coarse_grid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityEstimate {
    pub d: usize,
    pub p: f64,
    pub outer_radius: f64,
    /// Discrete energy (at `μ = 0`) of the finest potential.
    pub value: f64,
    pub potential: GridField,
    pub levels: Vec<RefinementLevel>,
    pub extrapolated: f64,
    pub observed_order: Option<f64>,
    /// `extrapolated` corrected from the condenser `B_R` to all of `R^d`.
    pub global: f64,
    pub flags: CapacityFlags,
}

/// `(σ_{d-1} ((d-p)/(p-1))^{p-1})^{-1/(p-1)}`: the `R`-term of the
/// radial condenser capacity.
pub fn far_field_constant(d: usize, p: f64) -> f64 {
    let k = (d as f64 - p) / (p - 1.0);
    pow(unit_sphere_area(d) * pow(k, p - 1.0), -1.0 / (p - 1.0))
}

/// Global capacity from a `B_R` condenser value, exact when `S` is a
/// centered ball: `C^{-1/(p-1)} = C_R^{-1/(p-1)} + c R^{(p-d)/(p-1)}`.
pub fn global_from_condenser(value: f64, outer_radius: f64, d: usize, p: f64) -> f64 {
    if value <= 0.0 {
        return 0.0;
    }
    let e = -1.0 / (p - 1.0);
    let gamma = (p - d as f64) / (p - 1.0);
    pow(pow(value, e) + far_field_constant(d, p) * pow(outer_radius, gamma), p - 1.0).recip()
}

/// Richardson extrapolation over halving spacings. With three or more
/// levels the order is observed from the last three; otherwise (or when
/// the observed order is not usable) first order is assumed.
pub fn richardson(values: &[f64]) -> (f64, Option<f64>) {
    match values.len() {
        0 => (0.0, None),
        1 => (values[0], None),
        n => {
            let (v1, v2) = (values[n - 2], values[n - 1]);
            let mut order = None;
            if n >= 3 {
                let v0 = values[n - 3];
                let (d0, d1) = (v0 - v1, v1 - v2);
                if d0 != 0.0 && d1 != 0.0 && d0 / d1 > 1.0 {
                    let q = log(d0 / d1) / core::f64::consts::LN_2;
                    if (0.5..=4.0).contains(&q) {
                        order = Some(q);
                    }
                }
            }
            let q = order.unwrap_or(1.0);
            (v2 + (v2 - v1) / (pow(2.0, q) - 1.0), order)
        }
    }
}

struct LevelSolution {
    grid: Grid,
    values: Vec<f64>,
    level: RefinementLevel,
}

/// Per-cell metric `J⁻¹J⁻ᵀ` and weight `|det J|` of a map, with `J` by
/// central differences at cell centers.
pub(crate) fn cell_metric(map: &CoordinateMap, grid: &Grid) -> CellMetric {
    let d = grid.dim();
    let h = grid.h();
    let step = 1e-4 * h;
    let bases = grid.cell_bases();
    let mut tensors = Vec::with_capacity(bases.len() * d * d);
    let mut weights = Vec::with_capacity(bases.len());
    let mut x = vec![0.0; d];
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    let mut jac = vec![0.0; d * d];
    let mut probe = vec![0.0; d];
    for &b in &bases {
        grid.node_point(b, &mut x);
        x.iter_mut().for_each(|v| *v += 0.5 * h);
        if !map.is_active(&x, 0.75 * h * sqrt(d as f64)) {
            for i in 0..d {
                for j in 0..d {
                    tensors.push(if i == j { 1.0 } else { 0.0 });
                }
            }
            weights.push(1.0);
            continue;
        }
        for j in 0..d {
            probe.copy_from_slice(&x);
            probe[j] += step;
            map.apply(&probe, &mut plus);
            probe[j] -= 2.0 * step;
            map.apply(&probe, &mut minus);
            for i in 0..d {
                jac[i * d + j] = (plus[i] - minus[i]) / (2.0 * step);
            }
        }
        // columns of J⁻ᵀ: solve Jᵀ c = e_j
        let mut jt = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                jt[i * d + j] = jac[j * d + i];
            }
        }
        let mut inv_t = vec![0.0; d * d];
        let mut det_ok = true;
        for j in 0..d {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            match solve_dense(&jt, &e) {
                Some(c) => {
                    for i in 0..d {
                        inv_t[i * d + j] = c[i];
                    }
                }
                None => det_ok = false,
            }
        }
        let det = determinant(&jac, d);
        if !det_ok || det == 0.0 {
            for i in 0..d {
                for j in 0..d {
                    tensors.push(if i == j { 1.0 } else { 0.0 });
                }
            }
            weights.push(0.0);
            continue;
        }
        // A = J⁻¹ J⁻ᵀ = (J⁻ᵀ)ᵀ J⁻ᵀ
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += inv_t[k * d + i] * inv_t[k * d + j];
                }
                tensors.push(s);
            }
        }
        weights.push(fabs(det));
    }
    CellMetric { tensors, weights }
}

fn determinant(a: &[f64], d: usize) -> f64 {
    let mut m = a.to_vec();
    let mut det = 1.0;
    for col in 0..d {
        let piv = (col..d).max_by(|&i, &j| fabs(m[i * d + col]).total_cmp(&fabs(m[j * d + col]))).unwrap_or(col);
        if m[piv * d + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for k in 0..d {
                m.swap(col * d + k, piv * d + k);
            }
            det = -det;
        }
        det *= m[col * d + col];
        for row in col + 1..d {
            let f = m[row * d + col] / m[col * d + col];
            for k in col..d {
                m[row * d + k] -= f * m[col * d + k];
            }
        }
    }
    det
}

fn solve_level(problem: &CapacityProblem, h: f64, warm: Option<(&Grid, &[f64])>) -> Result<LevelSolution> {
    let d = problem.d;
    let r_out = problem.outer_radius;
    let grid = Grid::centered(d, r_out, h)?;
    let mut energy = GridEnergy::new(grid.clone(), problem.p)?;
    let mut x = vec![0.0; d];
    let mut marked = 0;
    let mut initial = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        grid.node_point(i, &mut x);
        if norm(&x) >= r_out * (1.0 - 1e-12) {
            energy.fix(i, 0.0);
        } else if problem.set.distance(&x) <= 0.5 * h * (1.0 + 1e-12) {
            energy.fix(i, 1.0);
            initial[i] = 1.0;
            marked += 1;
        } else {
            energy.set_bounds(i, 0.0, 1.0);
        }
    }
    if marked == 0 {
        return Ok(LevelSolution {
            values: vec![0.0; grid.len()],
            grid,
            level: RefinementLevel { h, value: 0.0, residual: 0.0, iterations: 0, inner_iterations: 0, marked_nodes: 0 },
        });
    }
    if !problem.map.is_identity() {
        energy.set_metric(cell_metric(&problem.map, &grid))?;
    }
    if let Some((g, v)) = warm {
        let guess = g.resample(v, &grid, 0.0);
        for i in 0..grid.len() {
            if energy.is_free(i) {
                initial[i] = guess[i];
            }
        }
    }
    let options = problem.solver.clone().unwrap_or_else(|| SolverOptions::for_grid(problem.p, h));
    let report = minimize(&energy, &initial, &options)?;
    let value = energy.parts(&report.values, 0.0).gradient;
    Ok(LevelSolution {
        grid,
        values: report.values,
        level: RefinementLevel {
            h,
            value,
            residual: report.residual,
            iterations: report.iterations,
            inner_iterations: report.stages.iter().map(|s| s.inner_iterations).sum(),
            marked_nodes: marked,
        },
    })
}

/// Discrete capacity of the condenser over the refinement levels, with
/// Richardson extrapolation and far-field correction.
pub fn solve_capacity(problem: &CapacityProblem) -> Result<CapacityEstimate> {
    let mut flags = CapacityFlags {
        set_near_boundary: problem.set.bounding_radius() > problem.outer_radius / 4.0,
        coarse_grid: problem.resolution.h > problem.set.feature_size() / 4.0,
        ..CapacityFlags::default()
    };
    let mut levels = Vec::new();
    let mut last: Option<LevelSolution> = None;
    for k in 0..problem.resolution.levels {
        let h = problem.resolution.h / (1u64 << k) as f64;
        let warm = last.as_ref().map(|s| (&s.grid, s.values.as_slice()));
        let sol = solve_level(problem, h, warm)?;
        levels.push(sol.level);
        last = Some(sol);
    }
    let finest = last.ok_or(Error::invalid("resolution", "no levels"))?;
    flags.empty_marking = finest.level.marked_nodes == 0;
    flags.refinement_not_monotone =
        levels.windows(2).any(|w| w[1].value > w[0].value * (1.0 + 1e-6) + 1e-12);
    let values: Vec<f64> = levels.iter().map(|l| l.value).collect();
    let (extrapolated, observed_order) =
        if flags.empty_marking { (0.0, None) } else { richardson(&values) };
    let extrapolated = extrapolated.max(0.0);
    Ok(CapacityEstimate {
        d: problem.d,
        p: problem.p,
        outer_radius: problem.outer_radius,
        value: finest.level.value,
        potential: GridField::new(finest.grid, finest.values)?,
        levels,
        extrapolated,
        observed_order,
        global: global_from_condenser(extrapolated, problem.outer_radius, problem.d, problem.p),
        flags,
    })
}

/// `cap(tS, B_{tR}) / cap(S, B_R)` on grids scaled with `t`, from the
/// extrapolated values.
pub fn scaling_check(problem: &CapacityProblem, t: f64) -> Result<f64> {
    let base = solve_capacity(problem)?;
    if t == 1.0 {
        return Ok(1.0);
    }
    let scaled = solve_capacity(&problem.scaled(t)?)?;
    if base.extrapolated == 0.0 {
        return Err(Error::invalid("set", "reference capacity is zero"));
    }
    Ok(scaled.extrapolated / base.extrapolated)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarFieldCheck {
    /// `max (v(x) − W(x))` over nodes with `|x| ≥ 2`.
    pub violation: f64,
    /// `2h ‖∇W‖_∞` on `B_3 \ B_2`.
    pub tolerance: f64,
}

/// Comparison of the potential with `W(x) = |x/2|^{(p−d)/(p−1)}` outside
/// `B_2`.
pub fn farfield_bound_check(estimate: &CapacityEstimate) -> FarFieldCheck {
    let gamma = (estimate.p - estimate.d as f64) / (estimate.p - 1.0);
    let grid = &estimate.potential.grid;
    let mut x = vec![0.0; grid.dim()];
    let mut violation = f64::NEG_INFINITY;
    for (i, v) in estimate.potential.values.iter().enumerate() {
        grid.node_point(i, &mut x);
        let r = norm(&x);
        if r >= 2.0 {
            violation = violation.max(v - pow(r / 2.0, gamma));
        }
    }
    FarFieldCheck { violation, tolerance: grid.h() * fabs(gamma) }
}
