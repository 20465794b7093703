//! Minimization of discrete p-Dirichlet energies under nodal box
//! constraints.
//!
//! The energy of a grid function `w` is
//!
//! ```text
//! E_μ(w) = Σ_cells ω_c (g_cᵀ A_c g_c + μ²)^{p/2} h^d
//!        + Σ_f κ_f [((φ_f − (Λ_f w))_+² + μ²)^{p/2} − μ^p]
//!        + Σ_i f_i w_i h^d
//! ```
//!
//! with `g_c` the forward-difference gradient on the cell with lower corner
//! `c`, an optional per-cell metric `A_c` and weight `ω_c` (identity and 1
//! by default), optional penalty terms acting on interpolated values
//! `Λ_f w`, and an optional source `f`. Each node carries bounds
//! `lower ≤ w_i ≤ upper`; equal bounds fix the node.
//!
//! The default method is a projected truncated Newton iteration: Jacobi
//! preconditioned CG on the ε-inactive variables, scaled gradient steps on
//! the ε-active ones and Armijo backtracking along the projection arc. A
//! projected Barzilai–Borwein method is kept as an alternative. The
//! regularization `μ` is driven down a schedule with warm starts.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{Grid, MAX_DIM};
use crate::math::{fabs, pow, sqrt, CompensatedSum};
use crate::{Error, Result};

/// Per-cell symmetric tensors (`d × d`, row-major) and weights, indexed by
/// the cell ordinal of [`Grid::cell_bases`].
#[derive(Debug, Clone, PartialEq)]
pub struct CellMetric {
    pub tensors: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `κ [((target − Σ λ_j w_j)_+² + μ²)^{p/2} − μ^p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyTerm {
    pub stencil: Vec<(usize, f64)>,
    pub target: f64,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyParts {
    pub gradient: f64,
    pub penalty: f64,
    pub source: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct GridEnergy {
    grid: Grid,
    p: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    source: Option<Vec<f64>>,
    metric: Option<CellMetric>,
    penalties: Vec<PenaltyTerm>,
    cells: Vec<usize>,
}

impl GridEnergy {
    /// Unconstrained energy on `grid`.
    pub fn new(grid: Grid, p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::invalid("p", "exponent must exceed 1"));
        }
        let n = grid.len();
        let cells = grid.cell_bases();
        Ok(Self {
            grid,
            p,
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            source: None,
            metric: None,
            penalties: Vec::new(),
            cells,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn penalties(&self) -> &[PenaltyTerm] {
        &self.penalties
    }

    pub fn source(&self) -> Option<&[f64]> {
        self.source.as_deref()
    }

    pub fn metric(&self) -> Option<&CellMetric> {
        self.metric.as_ref()
    }

    pub fn fix(&mut self, node: usize, value: f64) {
        self.lower[node] = value;
        self.upper[node] = value;
    }

    pub fn set_bounds(&mut self, node: usize, lower: f64, upper: f64) {
        self.lower[node] = lower;
        self.upper[node] = upper;
    }

    /// Fixes every node on the boundary of the grid box to zero.
    pub fn fix_box_boundary(&mut self) {
        for i in 0..self.grid.len() {
            if self.grid.is_boundary_node(i) {
                self.fix(i, 0.0);
            }
        }
    }

    pub fn is_free(&self, node: usize) -> bool {
        self.lower[node] < self.upper[node]
    }

    pub fn set_source(&mut self, source: Vec<f64>) -> Result<()> {
        if source.len() != self.grid.len() {
            return Err(Error::invalid("source", "length differs from the node count"));
        }
        self.source = Some(source);
        Ok(())
    }

    pub fn set_metric(&mut self, metric: CellMetric) -> Result<()> {
        let d = self.grid.dim();
        if metric.weights.len() != self.cells.len() || metric.tensors.len() != self.cells.len() * d * d {
            return Err(Error::invalid("metric", "one tensor and one weight per cell required"));
        }
        self.metric = Some(metric);
        Ok(())
    }

    pub fn add_penalty(&mut self, term: PenaltyTerm) -> Result<()> {
        if term.stencil.iter().any(|&(i, _)| i >= self.grid.len()) || !(term.coefficient >= 0.0) {
            return Err(Error::invalid("penalty", "stencil outside the grid or negative coefficient"));
        }
        self.penalties.push(term);
        Ok(())
    }

    /// Clamps `w` into the bounds.
    pub fn project(&self, w: &mut [f64]) {
        for ((v, lo), hi) in w.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.max(*lo).min(*hi);
        }
    }

    /// Energy parts over every cell.
    pub fn parts(&self, w: &[f64], mu: f64) -> EnergyParts {
        let all: Vec<usize> = (0..self.cells.len()).collect();
        self.parts_on(&all, w, mu)
    }

    fn parts_on(&self, cells: &[usize], w: &[f64], mu: f64) -> EnergyParts {
        let d = self.grid.dim();
        let h = self.grid.h();
        let hd = self.grid.cell_volume();
        let half = self.p / 2.0;
        let mu2 = mu * mu;
        let mut g = [0.0; MAX_DIM];
        let mut ag = [0.0; MAX_DIM];
        let mut grad = CompensatedSum::new();
        for &k in cells {
            let (s, wgt) = self.cell_state(w, k, h, d, &mut g, &mut ag);
            if wgt != 0.0 {
                grad.add(wgt * self.power(s + mu2, half));
            }
        }
        let gradient = grad.value() * hd;
        let penalty = self.penalty_energy(w, mu);
        let source = match &self.source {
            Some(f) => {
                let mut s = CompensatedSum::new();
                for (fi, wi) in f.iter().zip(w) {
                    s.add(fi * wi);
                }
                s.value() * hd
            }
            None => 0.0,
        };
        EnergyParts { gradient, penalty, source, total: gradient + penalty + source }
    }

    fn penalty_energy(&self, w: &[f64], mu: f64) -> f64 {
        let mu_p = if mu == 0.0 { 0.0 } else { pow(mu, self.p) };
        let mut acc = CompensatedSum::new();
        for t in &self.penalties {
            let s = (t.target - t.stencil.iter().map(|&(i, l)| l * w[i]).sum::<f64>()).max(0.0);
            acc.add(t.coefficient * (self.power(s * s + mu * mu, self.p / 2.0) - mu_p));
        }
        acc.value()
    }

    #[inline]
    fn power(&self, x: f64, e: f64) -> f64 {
        if self.p == 2.0 && e == 1.0 {
            x
        } else if x == 0.0 {
            if e > 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            pow(x, e)
        }
    }

    /// Forward-difference gradient `g`, `A g` and `gᵀ A g` of cell `k`.
    #[inline]
    fn cell_state(
        &self,
        w: &[f64],
        k: usize,
        h: f64,
        d: usize,
        g: &mut [f64; MAX_DIM],
        ag: &mut [f64; MAX_DIM],
    ) -> (f64, f64) {
        let base = self.cells[k];
        let st = self.grid.strides();
        let w0 = w[base];
        for i in 0..d {
            g[i] = (w[base + st[i]] - w0) / h;
        }
        match &self.metric {
            None => {
                let mut s = 0.0;
                for i in 0..d {
                    ag[i] = g[i];
                    s += g[i] * g[i];
                }
                (s, 1.0)
            }
            Some(m) => {
                let a = &m.tensors[k * d * d..(k + 1) * d * d];
                let mut s = 0.0;
                for i in 0..d {
                    let mut v = 0.0;
                    for j in 0..d {
                        v += a[i * d + j] * g[j];
                    }
                    ag[i] = v;
                    s += g[i] * v;
                }
                (s, m.weights[k])
            }
        }
    }

    fn gradient_on(&self, cells: &[usize], w: &[f64], mu: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let d = self.grid.dim();
        let h = self.grid.h();
        let scale = pow(h, d as f64 - 1.0);
        let st = self.grid.strides();
        let mu2 = mu * mu;
        let e = self.p / 2.0 - 1.0;
        let mut g = [0.0; MAX_DIM];
        let mut ag = [0.0; MAX_DIM];
        for &k in cells {
            let (s, wgt) = self.cell_state(w, k, h, d, &mut g, &mut ag);
            if wgt == 0.0 {
                continue;
            }
            let sigma = s + mu2;
            if sigma == 0.0 {
                continue;
            }
            let c = wgt * self.p * self.power(sigma, e) * scale;
            let base = self.cells[k];
            let mut total = 0.0;
            for i in 0..d {
                let q = c * ag[i];
                out[base + st[i]] += q;
                total += q;
            }
            out[base] -= total;
        }
        for t in &self.penalties {
            let s = t.target - t.stencil.iter().map(|&(i, l)| l * w[i]).sum::<f64>();
            if s > 0.0 {
                let c = t.coefficient * self.p * self.power(s * s + mu2, e) * s;
                for &(i, l) in &t.stencil {
                    out[i] -= c * l;
                }
            }
        }
        if let Some(f) = &self.source {
            let hd = self.grid.cell_volume();
            for (o, fi) in out.iter_mut().zip(f) {
                *o += fi * hd;
            }
        }
    }

    /// Gradient of `E_μ` over all cells.
    pub fn gradient(&self, w: &[f64], mu: f64) -> Vec<f64> {
        let all: Vec<usize> = (0..self.cells.len()).collect();
        let mut out = vec![0.0; w.len()];
        self.gradient_on(&all, w, mu, &mut out);
        out
    }

    /// Cells touching at least one free node.
    fn active_cells(&self) -> Vec<usize> {
        let st = self.grid.strides();
        let d = self.grid.dim();
        (0..self.cells.len())
            .filter(|&k| {
                let b = self.cells[k];
                self.is_free(b) || (0..d).any(|i| self.is_free(b + st[i]))
            })
            .collect()
    }
}

/// Second-order data of `E_μ` at a point, for matrix-free products.
struct Linearization {
    cells: Vec<usize>,
    a: Vec<f64>,
    b: Vec<f64>,
    ag: Vec<f64>,
    penalty_curvature: Vec<f64>,
    diag: Vec<f64>,
}

impl Linearization {
    fn new(energy: &GridEnergy, cells: &[usize], w: &[f64], mu: f64) -> Self {
        let d = energy.grid.dim();
        let h = energy.grid.h();
        let st = energy.grid.strides();
        let scale = pow(h, d as f64 - 2.0);
        let p = energy.p;
        let mu2 = mu * mu;
        let n = cells.len();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut agv = vec![0.0; n * d];
        let mut diag = vec![0.0; w.len()];
        let mut g = [0.0; MAX_DIM];
        let mut ag = [0.0; MAX_DIM];
        for (j, &k) in cells.iter().enumerate() {
            let (s, wgt) = energy.cell_state(w, k, h, d, &mut g, &mut ag);
            let sigma = s + mu2;
            let (aj, bj) = if wgt == 0.0 {
                (0.0, 0.0)
            } else if p == 2.0 {
                (2.0 * wgt, 0.0)
            } else if sigma == 0.0 {
                (0.0, 0.0)
            } else {
                let base = pow(sigma, p / 2.0 - 1.0);
                (wgt * p * base, wgt * p * (p - 2.0) * base / sigma)
            };
            a[j] = aj;
            b[j] = bj;
            agv[j * d..(j + 1) * d].copy_from_slice(&ag[..d]);
            let base = energy.cells[k];
            let mut sum_all = 0.0;
            for i in 0..d {
                let aii = match &energy.metric {
                    None => 1.0,
                    Some(m) => m.tensors[k * d * d + i * d + i],
                };
                diag[base + st[i]] += (aj * aii + bj * ag[i] * ag[i]) * scale;
            }
            let one_a_one = match &energy.metric {
                None => d as f64,
                Some(m) => m.tensors[k * d * d..(k + 1) * d * d].iter().sum(),
            };
            for i in 0..d {
                sum_all += ag[i];
            }
            diag[base] += (aj * one_a_one + bj * sum_all * sum_all) * scale;
        }
        let mut penalty_curvature = Vec::with_capacity(energy.penalties.len());
        for t in &energy.penalties {
            let s = t.target - t.stencil.iter().map(|&(i, l)| l * w[i]).sum::<f64>();
            let c = if s > 0.0 {
                let r = s * s + mu2;
                t.coefficient * (p * pow(r, p / 2.0 - 1.0) + p * (p - 2.0) * pow(r, p / 2.0 - 2.0) * s * s)
            } else {
                0.0
            };
            for &(i, l) in &t.stencil {
                diag[i] += c * l * l;
            }
            penalty_curvature.push(c);
        }
        Self { cells: cells.to_vec(), a, b, ag: agv, penalty_curvature, diag }
    }

    /// `out = H v` on masked entries; `v` must vanish off the mask.
    fn apply(&self, energy: &GridEnergy, v: &[f64], mask: &[bool], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let d = energy.grid.dim();
        let h = energy.grid.h();
        let st = energy.grid.strides();
        let scale = pow(h, d as f64 - 1.0);
        let mut gv = [0.0; MAX_DIM];
        let mut agv = [0.0; MAX_DIM];
        for (j, &k) in self.cells.iter().enumerate() {
            let base = energy.cells[k];
            let v0 = v[base];
            for i in 0..d {
                gv[i] = (v[base + st[i]] - v0) / h;
            }
            match &energy.metric {
                None => agv[..d].copy_from_slice(&gv[..d]),
                Some(m) => {
                    let a = &m.tensors[k * d * d..(k + 1) * d * d];
                    for i in 0..d {
                        agv[i] = (0..d).map(|l| a[i * d + l] * gv[l]).sum();
                    }
                }
            }
            let ag = &self.ag[j * d..(j + 1) * d];
            let t: f64 = (0..d).map(|i| ag[i] * gv[i]).sum::<f64>() * self.b[j];
            let mut total = 0.0;
            for i in 0..d {
                let q = (self.a[j] * agv[i] + t * ag[i]) * scale;
                out[base + st[i]] += q;
                total += q;
            }
            out[base] -= total;
        }
        for (term, &c) in energy.penalties.iter().zip(&self.penalty_curvature) {
            if c == 0.0 {
                continue;
            }
            let lv: f64 = term.stencil.iter().map(|&(i, l)| l * v[i]).sum();
            for &(i, l) in &term.stencil {
                out[i] += c * lv * l;
            }
        }
        for (o, &m) in out.iter_mut().zip(mask) {
            if !m {
                *o = 0.0;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ProjectedNewton,
    ProjectedBarzilaiBorwein,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub method: Method,
    /// Regularization values, largest first; the last one is the target.
    pub mu_schedule: Vec<f64>,
    /// Residual tolerance of the last stage.
    pub tolerance: f64,
    /// Residual tolerance of the intermediate stages.
    pub stage_tolerance: f64,
    pub max_iterations: usize,
    pub max_inner_iterations: usize,
}

impl SolverOptions {
    /// Defaults for exponent `p` on a grid of spacing `h`: a single exact
    /// stage for `p = 2`, otherwise `μ ∈ {1e-2, 1e-4, 1e-6}/h`.
    pub fn for_grid(p: f64, h: f64) -> Self {
        if p == 2.0 {
            Self {
                method: Method::ProjectedNewton,
                mu_schedule: vec![0.0],
                tolerance: 1e-8,
                stage_tolerance: 1e-8,
                max_iterations: 50,
                max_inner_iterations: 20_000,
            }
        } else {
            Self {
                method: Method::ProjectedNewton,
                mu_schedule: vec![1e-2 / h, 1e-4 / h, 1e-6 / h],
                tolerance: 1e-6,
                stage_tolerance: 1e-4,
                max_iterations: 400,
                max_inner_iterations: 5_000,
            }
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageReport {
    pub mu: f64,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub values: Vec<f64>,
    /// Scaled projected-gradient residual at the last stage.
    pub residual: f64,
    pub iterations: usize,
    pub stages: Vec<StageReport>,
    /// `μ` of the last stage.
    pub mu: f64,
}

/// `‖w − P(w − G/D)‖_∞` over free nodes.
fn residual(energy: &GridEnergy, w: &[f64], g: &[f64], diag: &[f64], free: &[usize]) -> f64 {
    free.iter()
        .map(|&i| {
            let t = (w[i] - g[i] / diag[i]).max(energy.lower[i]).min(energy.upper[i]);
            fabs(w[i] - t)
        })
        .fold(0.0, f64::max)
}

fn floor_diagonal(diag: &mut [f64], free: &[usize]) {
    let top = free.iter().map(|&i| diag[i]).fold(0.0, f64::max);
    let floor = if top > 0.0 { top * 1e-14 } else { 1.0 };
    for &i in free {
        if !(diag[i] > floor) {
            diag[i] = floor;
        }
    }
}

/// Minimizes `E_μ` from `initial` (projected first) through the schedule.
pub fn minimize(energy: &GridEnergy, initial: &[f64], options: &SolverOptions) -> Result<SolveReport> {
    if initial.len() != energy.grid.len() {
        return Err(Error::invalid("initial", "length differs from the node count"));
    }
    if options.mu_schedule.is_empty() {
        return Err(Error::invalid("mu_schedule", "at least one stage required"));
    }
    let mut w = initial.to_vec();
    energy.project(&mut w);
    let free: Vec<usize> = (0..w.len()).filter(|&i| energy.is_free(i)).collect();
    let mu_last = *options.mu_schedule.last().unwrap_or(&0.0);
    if free.is_empty() {
        return Ok(SolveReport { values: w, residual: 0.0, iterations: 0, stages: Vec::new(), mu: mu_last });
    }
    let cells = energy.active_cells();
    let mut stages = Vec::new();
    let mut total_iterations = 0;
    let last = options.mu_schedule.len() - 1;
    for (s, &mu) in options.mu_schedule.iter().enumerate() {
        let tol = if s == last { options.tolerance } else { options.stage_tolerance };
        let report = match options.method {
            Method::ProjectedNewton => newton_stage(energy, &cells, &free, &mut w, mu, tol, options),
            Method::ProjectedBarzilaiBorwein => bb_stage(energy, &cells, &free, &mut w, mu, tol, options),
        };
        total_iterations += report.iterations;
        stages.push(report);
        if s == last && !(report.residual <= tol) {
            return Err(Error::NotConverged { iterations: total_iterations, residual: report.residual });
        }
    }
    let residual = stages.last().map(|r| r.residual).unwrap_or(0.0);
    Ok(SolveReport { values: w, residual, iterations: total_iterations, stages, mu: mu_last })
}

const ARMIJO: f64 = 1e-4;

fn newton_stage(
    energy: &GridEnergy,
    cells: &[usize],
    free: &[usize],
    w: &mut Vec<f64>,
    mu: f64,
    tol: f64,
    options: &SolverOptions,
) -> StageReport {
    let n = w.len();
    let quadratic = energy.p == 2.0;
    let mut g = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut mask = vec![false; n];
    let mut cg = CgBuffers::new(n);
    let mut inner_total = 0;
    let mut e = energy.parts_on(cells, w, mu).total;
    // Away from p = 2 the Jacobi-scaled residual can be small far from the
    // minimizer (flat regions for p < 2), so a stage also needs a small
    // global Newton step before it stops.
    let step_tol = 100.0 * tol;
    let mut last_step = if quadratic { 0.0 } else { f64::INFINITY };
    for it in 0..options.max_iterations {
        energy.gradient_on(cells, w, mu, &mut g);
        let mut lin = Linearization::new(energy, cells, w, mu);
        floor_diagonal(&mut lin.diag, free);
        let res = residual(energy, w, &g, &lin.diag, free);
        if res <= tol && last_step <= step_tol {
            return StageReport { mu, iterations: it, inner_iterations: inner_total, residual: res };
        }
        let eps_active = res.min(1e-3);
        mask.iter_mut().for_each(|m| *m = false);
        dir.iter_mut().for_each(|x| *x = 0.0);
        for &i in free {
            let at_lower = w[i] - energy.lower[i] <= eps_active && g[i] > 0.0;
            let at_upper = energy.upper[i] - w[i] <= eps_active && g[i] < 0.0;
            if at_lower || at_upper {
                dir[i] = -g[i] / lin.diag[i];
            } else {
                mask[i] = true;
            }
        }
        let forcing = if quadratic { 1e-12 } else { sqrt(res).clamp(1e-10, 0.1) };
        let inner = cg.solve(energy, &lin, &g, &mask, forcing, options.max_inner_iterations);
        inner_total += inner;
        for i in 0..n {
            if mask[i] {
                dir[i] = cg.x[i];
            }
        }
        let mut accepted = line_search(energy, cells, w, &g, &dir, mu, e, &mut trial);
        if accepted.is_none() {
            // fall back to a scaled gradient step
            for &i in free {
                dir[i] = -g[i] / lin.diag[i];
            }
            accepted = line_search(energy, cells, w, &g, &dir, mu, e, &mut trial);
        }
        match accepted {
            Some(e_new) => {
                if !quadratic {
                    last_step = free.iter().map(|&i| fabs(trial[i] - w[i])).fold(0.0, f64::max);
                }
                core::mem::swap(w, &mut trial);
                e = e_new;
            }
            None => return StageReport { mu, iterations: it + 1, inner_iterations: inner_total, residual: res },
        }
    }
    energy.gradient_on(cells, w, mu, &mut g);
    let mut lin = Linearization::new(energy, cells, w, mu);
    floor_diagonal(&mut lin.diag, free);
    let res = residual(energy, w, &g, &lin.diag, free);
    StageReport { mu, iterations: options.max_iterations, inner_iterations: inner_total, residual: res }
}

/// Armijo backtracking along `α ↦ P(w + α d)`; returns the new energy.
#[allow(clippy::too_many_arguments)]
fn line_search(
    energy: &GridEnergy,
    cells: &[usize],
    w: &[f64],
    g: &[f64],
    dir: &[f64],
    mu: f64,
    e: f64,
    trial: &mut [f64],
) -> Option<f64> {
    let roundoff = 1e-13 * (fabs(e) + 1.0);
    let mut alpha = 1.0;
    for _ in 0..50 {
        let mut slope = 0.0;
        for i in 0..w.len() {
            trial[i] = (w[i] + alpha * dir[i]).max(energy.lower[i]).min(energy.upper[i]);
            slope += g[i] * (trial[i] - w[i]);
        }
        if slope >= 0.0 {
            return None;
        }
        let e_new = energy.parts_on(cells, trial, mu).total;
        if e_new <= e + ARMIJO * slope || (alpha == 1.0 && e_new <= e + roundoff && -slope <= roundoff) {
            return Some(e_new);
        }
        alpha *= 0.5;
    }
    None
}

struct CgBuffers {
    x: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
}

impl CgBuffers {
    fn new(n: usize) -> Self {
        Self { x: vec![0.0; n], r: vec![0.0; n], z: vec![0.0; n], p: vec![0.0; n], q: vec![0.0; n] }
    }

    /// Jacobi-preconditioned CG for `H_MM x = −g_M`; stops when the
    /// preconditioned residual norm falls by `forcing`.
    fn solve(
        &mut self,
        energy: &GridEnergy,
        lin: &Linearization,
        g: &[f64],
        mask: &[bool],
        forcing: f64,
        max_it: usize,
    ) -> usize {
        let n = g.len();
        for i in 0..n {
            self.x[i] = 0.0;
            self.r[i] = if mask[i] { -g[i] } else { 0.0 };
            self.z[i] = self.r[i] / lin.diag[i].max(f64::MIN_POSITIVE);
            self.p[i] = self.z[i];
        }
        let mut rz: f64 = (0..n).map(|i| self.r[i] * self.z[i]).sum();
        let target = rz * forcing * forcing;
        if rz == 0.0 {
            return 0;
        }
        for it in 0..max_it {
            lin.apply(energy, &self.p, mask, &mut self.q);
            let pq: f64 = (0..n).map(|i| self.p[i] * self.q[i]).sum();
            if !(pq > 0.0) {
                if it == 0 {
                    self.x.copy_from_slice(&self.p);
                }
                return it;
            }
            let alpha = rz / pq;
            for i in 0..n {
                self.x[i] += alpha * self.p[i];
                self.r[i] -= alpha * self.q[i];
                self.z[i] = if mask[i] { self.r[i] / lin.diag[i] } else { 0.0 };
            }
            let rz_new: f64 = (0..n).map(|i| self.r[i] * self.z[i]).sum();
            if rz_new <= target {
                return it + 1;
            }
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                self.p[i] = self.z[i] + beta * self.p[i];
            }
        }
        max_it
    }
}

fn bb_stage(
    energy: &GridEnergy,
    cells: &[usize],
    free: &[usize],
    w: &mut Vec<f64>,
    mu: f64,
    tol: f64,
    options: &SolverOptions,
) -> StageReport {
    const MEMORY: usize = 10;
    let n = w.len();
    let mut g = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut lin = Linearization::new(energy, cells, w, mu);
    floor_diagonal(&mut lin.diag, free);
    let diag = lin.diag;
    energy.gradient_on(cells, w, mu, &mut g);
    let mut e = energy.parts_on(cells, w, mu).total;
    let mut history = vec![e];
    let mut step = 1.0;
    let iterations = options.max_iterations * 50;
    let mut res = residual(energy, w, &g, &diag, free);
    for it in 0..iterations {
        if res <= tol {
            return StageReport { mu, iterations: it, inner_iterations: 0, residual: res };
        }
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let mut slope = 0.0;
            for i in 0..n {
                let target = (w[i] - step * g[i] / diag[i]).max(energy.lower[i]).min(energy.upper[i]);
                trial[i] = w[i] + lambda * (target - w[i]);
                slope += g[i] * (trial[i] - w[i]);
            }
            let e_new = energy.parts_on(cells, &trial, mu).total;
            if e_new <= reference + ARMIJO * slope {
                accepted = Some(e_new);
                break;
            }
            lambda *= 0.5;
        }
        let Some(e_new) = accepted else {
            return StageReport { mu, iterations: it + 1, inner_iterations: 0, residual: res };
        };
        energy.gradient_on(cells, &trial, mu, &mut g_new);
        let mut sds = 0.0;
        let mut sy = 0.0;
        for &i in free {
            let s = trial[i] - w[i];
            sds += s * diag[i] * s;
            sy += s * (g_new[i] - g[i]);
        }
        step = if sy > 0.0 { (sds / sy).clamp(1e-10, 1e10) } else { 1.0 };
        core::mem::swap(w, &mut trial);
        core::mem::swap(&mut g, &mut g_new);
        e = e_new;
        history.push(e);
        if history.len() > MEMORY {
            history.remove(0);
        }
        res = residual(energy, w, &g, &diag, free);
    }
    StageReport { mu, iterations, inner_iterations: 0, residual: res }
}

/// Euclidean norm of the gradient restricted to free nodes, for tests and
/// diagnostics.
pub fn free_gradient_norm(energy: &GridEnergy, w: &[f64], mu: f64) -> f64 {
    let g = energy.gradient(w, mu);
    sqrt((0..w.len()).filter(|&i| energy.is_free(i)).map(|i| g[i] * g[i]).sum())
}
