use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{Grid, GridField};
use crate::math::{ceil, fabs, floor};
use crate::pcapacity::{CondenserSet, SurfacePatchSet};
use crate::solver::{minimize, EnergyParts, GridEnergy, PenaltyTerm, SolveReport, SolverOptions, StageReport};
use crate::surface_geometry::{enumerate_hit_cells, AxisBox, ConvexSurface, HoleShape, SieveConfig};
use crate::{Error, Result};

use super::measure::LimitMeasureTable;

/// The domain `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Box(AxisBox),
    /// Simple polygon in the plane, vertices in order.
    Polygon(Vec<[f64; 2]>),
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Box(b) => b.dim(),
            Domain::Polygon(_) => 2,
        }
    }

    pub fn bounding_box(&self) -> Result<AxisBox> {
        match self {
            Domain::Box(b) => Ok(b.clone()),
            Domain::Polygon(v) => {
                let lo = [0, 1].map(|i| v.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min));
                let hi = [0, 1].map(|i| v.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max));
                AxisBox::new(lo.to_vec(), hi.to_vec())
            }
        }
    }

    /// Closed membership (even–odd rule for polygons).
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Box(b) => b.contains(x),
            Domain::Polygon(v) => {
                let mut inside = false;
                let n = v.len();
                for i in 0..n {
                    let (a, b) = (v[i], v[(i + 1) % n]);
                    if (a[1] > x[1]) != (b[1] > x[1]) {
                        let cross = a[0] + (x[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                        if x[0] < cross {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }
}

/// Hole size as a function of `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HoleSize {
    /// `a_ε = ε^{d/(d−p+1)}`.
    Critical,
    /// `a_ε = ratio · ε`.
    Ratio(f64),
}

/// Data of the thin-obstacle problem on a uniform grid over `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleProblemSpec {
    domain: Domain,
    p: f64,
    surface: ConvexSurface,
    hole: HoleShape,
    hole_size: HoleSize,
    grid: Grid,
    source: Vec<f64>,
    homogenized_source: Option<Vec<f64>>,
    obstacle: Vec<f64>,
    solver: Option<SolverOptions>,
}

impl ObstacleProblemSpec {
    /// Samples `source` and `obstacle` at the nodes of a grid of spacing
    /// about `h_grid` fitted to the bounding box of `Ω`.
    pub fn new(
        domain: Domain,
        p: f64,
        surface: ConvexSurface,
        hole: HoleShape,
        h_grid: f64,
        source: impl Fn(&[f64]) -> f64,
        obstacle: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let d = domain.dim();
        if surface.dim() != d || hole.dim() != d {
            return Err(Error::invalid("d", "domain, surface and hole dimensions differ"));
        }
        if !(p > 1.0 && p < d as f64) {
            return Err(Error::invalid("p", "exponent must satisfy 1 < p < d"));
        }
        if !(h_grid > 0.0) {
            return Err(Error::invalid("h_grid", "grid spacing must be positive"));
        }
        let bbox = domain.bounding_box()?;
        let grid = Grid::fitted(&bbox.lo, &bbox.hi, h_grid)?;
        let points: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.point(i)).collect();
        let source: Vec<f64> = points.iter().map(|x| source(x)).collect();
        let obstacle: Vec<f64> = points.iter().map(|x| obstacle(x)).collect();
        let spec = Self {
            domain,
            p,
            surface,
            hole,
            hole_size: HoleSize::Critical,
            grid,
            source,
            homogenized_source: None,
            obstacle,
            solver: None,
        };
        spec.check_fields()?;
        Ok(spec)
    }

    fn check_fields(&self) -> Result<()> {
        if self.source.iter().chain(&self.obstacle).any(|v| !v.is_finite()) {
            return Err(Error::invalid("obstacle", "source and obstacle must be finite"));
        }
        if let Some(f) = &self.homogenized_source {
            if f.len() != self.grid.len() || f.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("homogenized_source", "one finite value per node required"));
            }
        }
        // supp φ must stay away from ∂Ω
        let mut x = vec![0.0; self.grid.dim()];
        for i in 0..self.grid.len() {
            self.grid.node_point(i, &mut x);
            if self.is_exterior(i, &x) && self.obstacle[i] > 0.0 {
                return Err(Error::invalid("obstacle", "obstacle must vanish on and outside the boundary"));
            }
        }
        Ok(())
    }

    fn is_exterior(&self, i: usize, x: &[f64]) -> bool {
        self.grid.is_boundary_node(i) || !self.domain.contains(x)
    }

    pub fn with_hole_size(mut self, rule: HoleSize) -> Self {
        self.hole_size = rule;
        self
    }

    /// Separate source for the homogenized problem (ablation).
    pub fn with_homogenized_source(mut self, source: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let f = (0..self.grid.len()).map(|i| source(&self.grid.point(i))).collect();
        self.homogenized_source = Some(f);
        self.check_fields()?;
        Ok(self)
    }

    pub fn with_solver(mut self, options: SolverOptions) -> Self {
        self.solver = Some(options);
        self
    }

    pub fn d(&self) -> usize {
        self.grid.dim()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn surface(&self) -> &ConvexSurface {
        &self.surface
    }

    pub fn hole(&self) -> &HoleShape {
        &self.hole
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn obstacle(&self) -> &[f64] {
        &self.obstacle
    }

    /// Whether `1 < p < (d+4)/4`, the exponent range of the convergence
    /// theory. Solvers accept any `1 < p < d`.
    pub fn exponent_in_theory_range(&self) -> bool {
        self.p < (self.d() as f64 + 4.0) / 4.0
    }

    pub fn sieve(&self, eps: f64) -> Result<SieveConfig> {
        match self.hole_size {
            HoleSize::Critical => SieveConfig::critical(eps, self.d(), self.p, self.hole.clone()),
            HoleSize::Ratio(r) => SieveConfig::with_hole_size(eps, r * eps, self.d(), self.p, self.hole.clone()),
        }
    }

    fn base_energy(&self, source: &[f64]) -> Result<GridEnergy> {
        let mut energy = GridEnergy::new(self.grid.clone(), self.p)?;
        let mut x = vec![0.0; self.d()];
        for i in 0..self.grid.len() {
            self.grid.node_point(i, &mut x);
            if self.is_exterior(i, &x) {
                energy.fix(i, 0.0);
            }
        }
        if source.iter().any(|&v| v != 0.0) {
            energy.set_source(source.to_vec())?;
        }
        Ok(energy)
    }

    fn options(&self) -> SolverOptions {
        self.solver.clone().unwrap_or_else(|| SolverOptions::for_grid(self.p, self.grid.h()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSolution {
    pub field: GridField,
    /// Energy parts of the returned field at `μ = 0`.
    pub energy: EnergyParts,
    pub iterations: usize,
    pub residual: f64,
    pub stages: Vec<StageReport>,
    /// Nodes carrying the constraint `v ≥ φ` (perforated problem).
    pub marked_nodes: usize,
    pub hit_cells: usize,
}

fn finish(energy: &GridEnergy, report: SolveReport, marked_nodes: usize, hit_cells: usize) -> Result<ObstacleSolution> {
    let parts = energy.parts(&report.values, 0.0);
    Ok(ObstacleSolution {
        field: GridField::new(energy.grid().clone(), report.values)?,
        energy: parts,
        iterations: report.iterations,
        residual: report.residual,
        stages: report.stages,
        marked_nodes,
        hit_cells,
    })
}

/// Nodes within `h/2` of `Γ_ε = Γ ∩ T_ε` (the same rule as condenser
/// marking), and the number of hit cells.
pub fn marked_nodes(spec: &ObstacleProblemSpec, sieve: &SieveConfig) -> Result<(Vec<usize>, usize)> {
    let grid = &spec.grid;
    let d = grid.dim();
    let h = grid.h();
    let bbox = spec.domain.bounding_box()?;
    let chart = spec.surface.domain();
    let lo: Vec<f64> = (0..d - 1).map(|i| bbox.lo[i].max(chart.lo[i])).collect();
    let hi: Vec<f64> = (0..d - 1).map(|i| bbox.hi[i].min(chart.hi[i])).collect();
    if (0..d - 1).any(|i| !(hi[i] > lo[i])) {
        return Ok((Vec::new(), 0));
    }
    let a = sieve.hole_size();
    let reach = a * sieve.hole().bounding_radius() + h;
    // widen by one cell so holes centered just outside still count
    let eps = sieve.eps();
    let lo_w: Vec<f64> = lo.iter().zip(&chart.lo).map(|(v, c)| (v - eps).max(*c)).collect();
    let hi_w: Vec<f64> = hi.iter().zip(&chart.hi).map(|(v, c)| (v + eps).min(*c)).collect();
    let hits = enumerate_hit_cells(&spec.surface, sieve, &AxisBox::new(lo_w, hi_w)?);
    let mut flags = vec![false; grid.len()];
    let mut x = vec![0.0; d];
    let mut counted = 0;
    for hit in &hits {
        let center = sieve.hole_center(&hit.index);
        let set = CondenserSet::Patch(SurfacePatchSet {
            surface: spec.surface.clone(),
            center: center.clone(),
            scale: a,
            hole: sieve.hole().clone(),
        });
        let mut any = false;
        // node index ranges of the hole's bounding box
        let mut ranges = Vec::with_capacity(d);
        for i in 0..d {
            let o = grid.origin()[i];
            let top = (grid.dims()[i] - 1) as f64;
            let from = ceil((center[i] - reach - o) / h).max(0.0);
            let to = floor((center[i] + reach - o) / h).min(top);
            if to < from {
                break;
            }
            ranges.push((from as usize, to as usize + 1));
        }
        if ranges.len() < d {
            continue;
        }
        let counts: Vec<usize> = ranges.iter().map(|&(f, t)| t - f).collect();
        let total: usize = counts.iter().product();
        let mut multi = vec![0usize; d];
        for j in 0..total {
            let mut rest = j;
            for i in (0..d).rev() {
                multi[i] = ranges[i].0 + rest % counts[i];
                rest /= counts[i];
            }
            let idx = grid.flat_index(&multi);
            grid.node_point(idx, &mut x);
            if spec.is_exterior(idx, &x) {
                continue;
            }
            let z: Vec<f64> = x.iter().zip(&center).map(|(v, c)| (v - c) / a).collect();
            if a * set.distance(&z) <= 0.5 * h * (1.0 + 1e-12) {
                flags[idx] = true;
                any = true;
            }
        }
        if any && spec.domain.contains(&center) {
            counted += 1;
        }
    }
    let nodes = (0..grid.len()).filter(|&i| flags[i]).collect();
    Ok((nodes, counted))
}

/// Minimizes `Σ |∇_h v|^p h^d + Σ f v h^d` over grid functions vanishing
/// outside `Ω` with `v ≥ φ` on the nodes marked by `Γ_ε`.
pub fn solve_perforated(spec: &ObstacleProblemSpec, eps: f64) -> Result<ObstacleSolution> {
    let sieve = spec.sieve(eps)?;
    let mut energy = spec.base_energy(&spec.source)?;
    let (marked, hits) = marked_nodes(spec, &sieve)?;
    for &i in &marked {
        energy.set_bounds(i, spec.obstacle[i], f64::INFINITY);
    }
    let initial = vec![0.0; spec.grid.len()];
    let report = minimize(&energy, &initial, &spec.options())?;
    finish(&energy, report, marked.len(), hits)
}

/// Minimizes `Σ |∇_h v|^p h^d + Σ f v h^d + Σ_facets cap·area·(φ − v)_+^p`
/// with `v` and `φ` interpolated multilinearly at facet centroids.
pub fn solve_homogenized(spec: &ObstacleProblemSpec, table: &LimitMeasureTable) -> Result<ObstacleSolution> {
    let source = spec.homogenized_source.as_deref().unwrap_or(&spec.source);
    let mut energy = spec.base_energy(source)?;
    for f in &table.facets {
        if f.centroid.len() != spec.d() {
            return Err(Error::invalid("table", "facet dimension differs from the domain"));
        }
        let coefficient = f.capacity * f.area;
        if coefficient == 0.0 || !spec.domain.contains(&f.centroid) {
            continue;
        }
        let stencil = spec.grid.interpolation_stencil(&f.centroid).ok_or(Error::invalid("table", "facet outside the grid"))?;
        let target = stencil.iter().map(|&(i, l)| l * spec.obstacle[i]).sum();
        energy.add_penalty(PenaltyTerm { stencil, target, coefficient })?;
    }
    let initial = vec![0.0; spec.grid.len()];
    let report = minimize(&energy, &initial, &spec.options())?;
    finish(&energy, report, 0, 0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub a_eps: f64,
    /// `‖u_ε − u‖_{L^p(Ω)}`.
    pub lp_distance: f64,
    pub energy_perforated: f64,
    pub energy_homogenized: f64,
    pub hit_cells: usize,
}

impl ConvergenceRow {
    pub fn energy_gap(&self) -> f64 {
        fabs(self.energy_perforated - self.energy_homogenized)
    }
}

/// Checks the sweep preconditions: at least three values of `ε`, and
/// `h ≤ a_ε/4` for each.
pub fn check_sweep(spec: &ObstacleProblemSpec, eps: &[f64]) -> Result<()> {
    if eps.len() < 3 {
        return Err(Error::invalid("epsilon", "at least three values required"));
    }
    for &e in eps {
        let a = spec.sieve(e)?.hole_size();
        if spec.grid.h() > a / 4.0 {
            return Err(Error::invalid("h_grid", "grid does not resolve the holes (need h <= a_eps/4)"));
        }
    }
    Ok(())
}

pub fn convergence_row(
    spec: &ObstacleProblemSpec,
    eps: f64,
    perforated: &ObstacleSolution,
    homogenized: &ObstacleSolution,
) -> Result<ConvergenceRow> {
    let diff: Vec<f64> = perforated.field.values.iter().zip(&homogenized.field.values).map(|(a, b)| a - b).collect();
    Ok(ConvergenceRow {
        eps,
        a_eps: spec.sieve(eps)?.hole_size(),
        lp_distance: spec.grid.lp_norm(&diff, spec.p),
        energy_perforated: perforated.energy.total,
        energy_homogenized: homogenized.energy.total,
        hit_cells: perforated.hit_cells,
    })
}

/// Solves the homogenized problem once and the perforated one for each
/// `ε`, sequentially.
pub fn convergence_experiment(
    spec: &ObstacleProblemSpec,
    eps: &[f64],
    table: &LimitMeasureTable,
) -> Result<Vec<ConvergenceRow>> {
    check_sweep(spec, eps)?;
    let hom = solve_homogenized(spec, table)?;
    eps.iter().map(|&e| convergence_row(spec, e, &solve_perforated(spec, e)?, &hom)).collect()
}
