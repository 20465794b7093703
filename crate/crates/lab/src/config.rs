//! Experiment configuration: TOML with one table per concern.
//!
//! Loading is two-step. [`ExperimentConfig::parse`] checks the schema
//! (unknown keys, missing keys, types); [`ExperimentConfig::validate`]
//! checks every cross-field constraint and builds the core objects the
//! experiment needs, before any computation starts.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sieve_core::homogenization::{Domain, HoleSize, ObstacleProblemSpec};
use sieve_core::surface_geometry::{AxisBox, ConvexSurface, HoleShape, SieveConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Discrepancy,
    Capacity,
    MeanCap,
    Corrector,
    Homogenize,
    Sweep,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Discrepancy => "discrepancy",
            Kind::Capacity => "capacity",
            Kind::MeanCap => "mean-cap",
            Kind::Corrector => "corrector",
            Kind::Homogenize => "homogenize",
            Kind::Sweep => "sweep",
        }
    }

    /// Kinds that place holes on a sieve and need `surface`, `hole`, `eps`.
    fn uses_sieve(self) -> bool {
        matches!(self, Kind::Corrector | Kind::Homogenize | Kind::Sweep)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub d: usize,
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub eps: Vec<f64>,
    /// Replaces the critical hole size by `a_eps_ratio · ε`.
    pub a_eps_ratio: Option<f64>,
    pub output: Option<PathBuf>,
    pub surface: Option<SurfaceSpec>,
    pub hole: Option<HoleSpec>,
    pub discrepancy: Option<DiscrepancySpec>,
    pub capacity: Option<CapacitySpec>,
    pub mean_cap: Option<MeanCapSpec>,
    pub corrector: Option<CorrectorSpec>,
    pub homogenize: Option<HomogenizeSpec>,
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    /// `quadratic`, `paraboloid`, `plane` or `cosh`.
    pub shape: String,
    pub chart_lo: Vec<f64>,
    pub chart_hi: Vec<f64>,
    /// Row-major Hessian of a quadratic.
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub c: Option<f64>,
    pub slope: Option<Vec<f64>>,
    pub amplitude: Option<f64>,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleSpec {
    /// `ball`, `cube` or `box`.
    pub shape: String,
    pub radius: Option<f64>,
    pub side: Option<f64>,
    pub half_widths: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscrepancySpec {
    pub chart_lo: Vec<f64>,
    pub chart_hi: Vec<f64>,
    /// `(lo, hi]` on `(0, 1]`, with the value 0 read as 1.
    pub interval: [f64; 2],
    /// Erdős–Turán truncation; `⌈N^{1/3}⌉` when absent.
    pub harmonics: Option<u64>,
    /// Seeded random samples checked against the Erdős–Turán bound.
    #[serde(default)]
    pub random_samples: usize,
    #[serde(default = "default_random_len")]
    pub random_max_len: usize,
}

fn default_random_len() -> usize {
    500
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySpec {
    /// `solid` (the hole template) or `slice` (a plane section of it).
    #[serde(default = "default_set")]
    pub set: String,
    pub normal: Option<Vec<f64>>,
    #[serde(default)]
    pub offset: f64,
    pub outer_radius: f64,
    pub h: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_scales")]
    pub scales: Vec<f64>,
}

fn default_set() -> String {
    "solid".into()
}

fn default_levels() -> usize {
    3
}

fn default_scales() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanCapSpec {
    #[serde(default)]
    pub normals: Vec<Vec<f64>>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_depth")]
    pub max_depth: usize,
    #[serde(default = "default_cells")]
    pub cells_per_radius: usize,
    #[serde(default = "default_slice_levels")]
    pub levels: usize,
    #[serde(default = "default_outer")]
    pub outer_factor: f64,
}

impl Default for MeanCapSpec {
    fn default() -> Self {
        Self {
            normals: Vec::new(),
            tolerance: default_tolerance(),
            max_depth: default_depth(),
            cells_per_radius: default_cells(),
            levels: default_slice_levels(),
            outer_factor: default_outer(),
        }
    }
}

fn default_tolerance() -> f64 {
    1e-2
}

fn default_depth() -> usize {
    6
}

fn default_cells() -> usize {
    4
}

fn default_slice_levels() -> usize {
    2
}

fn default_outer() -> f64 {
    4.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectorSpec {
    pub q_lo: Vec<f64>,
    pub q_hi: Vec<f64>,
    /// `tangent-slices` or `exact`.
    #[serde(default = "default_model")]
    pub model: String,
    /// Template-scale spacing of the exact cell solves.
    #[serde(default = "default_cell_h")]
    pub h: f64,
    #[serde(default = "default_cell_levels")]
    pub levels: usize,
    /// Normal tolerance of the limit table and capacity cache.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Chart spacing of the limit table.
    #[serde(default = "default_mesh")]
    pub mesh: f64,
}

fn default_model() -> String {
    "tangent-slices".into()
}

fn default_cell_h() -> f64 {
    0.25
}

fn default_cell_levels() -> usize {
    1
}

fn default_delta() -> f64 {
    0.2
}

fn default_mesh() -> f64 {
    1.0 / 32.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogenizeSpec {
    pub domain_lo: Option<Vec<f64>>,
    pub domain_hi: Option<Vec<f64>>,
    /// Polygon vertices in order (`d = 2`), instead of a box.
    pub polygon: Option<Vec<[f64; 2]>>,
    pub h_grid: f64,
    #[serde(default = "default_mesh")]
    pub mesh: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Obstacle `height · (1 − |x − center|²/radius²)²₊`.
    pub obstacle_center: Vec<f64>,
    pub obstacle_radius: f64,
    pub obstacle_height: f64,
    #[serde(default)]
    pub source: f64,
    /// Source of the homogenized problem when it differs from `source`.
    pub homogenized_source: Option<f64>,
    #[serde(default = "default_true")]
    pub write_fields: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Chart window searched for the most central cut at each `ε`.
    pub window_lo: Vec<f64>,
    pub window_hi: Vec<f64>,
    pub h: f64,
    #[serde(default = "default_cell_levels")]
    pub levels: usize,
    /// Tilt sweep: `|ν₁ − ν₂|` values, normal `ν₁` and shared point.
    #[serde(default)]
    pub deltas: Vec<f64>,
    pub tilt_normal: Option<Vec<f64>>,
    pub tilt_point: Option<Vec<f64>>,
}

/// One finding of validation, tied to a config key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub errors: Vec<Diagnostic>,
    pub warnings: Vec<Diagnostic>,
}

impl Diagnostics {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }

    fn error(&mut self, key: impl Into<String>, message: impl Into<String>) {
        self.errors.push(Diagnostic { key: key.into(), message: message.into() });
    }

    fn warn(&mut self, key: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(Diagnostic { key: key.into(), message: message.into() });
    }

    /// Records a core error under `section`, keeping the parameter name the
    /// core reports.
    fn core(&mut self, section: &str, err: sieve_core::Error) {
        let key = match &err {
            sieve_core::Error::InvalidParameter { name, .. } if name.starts_with(section) => name.to_string(),
            sieve_core::Error::InvalidParameter { name, .. } if section.is_empty() => name.to_string(),
            sieve_core::Error::InvalidParameter { name, .. } => format!("{section}.{name}"),
            _ => section.to_string(),
        };
        self.error(key, err.to_string());
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

/// A configuration that passed validation, with its core objects built.
#[derive(Debug, Clone)]
pub struct Validated {
    pub config: ExperimentConfig,
    pub surface: Option<ConvexSurface>,
    pub hole: Option<HoleShape>,
    /// One sieve per `ε`, in config order.
    pub sieves: Vec<SieveConfig>,
    pub obstacle: Option<ObstacleProblemSpec>,
    pub warnings: Vec<Diagnostic>,
}

impl ExperimentConfig {
    /// Schema check only. Errors name the offending key.
    pub fn parse(text: &str) -> Result<Self, Diagnostics> {
        toml::from_str(text).map_err(|e| {
            let mut d = Diagnostics::default();
            let message = e.message().to_string();
            d.error(schema_key(&message, e.span().map(|s| &text[s])), message);
            d
        })
    }

    pub fn load(path: &Path) -> std::io::Result<Result<Self, Diagnostics>> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    /// Every cross-field constraint, without running anything.
    pub fn validate(&self) -> Result<Validated, Diagnostics> {
        let mut diag = Diagnostics::default();
        let d = self.d;
        if d < 2 {
            diag.error("d", "dimension must be at least 2");
            return Err(diag);
        }
        if !(self.p > 1.0 && self.p < d as f64) {
            diag.error("p", format!("exponent must satisfy 1 < p < d = {d}"));
        }
        let theory_range = (d as f64 + 4.0) / 4.0;
        if matches!(self.kind, Kind::Corrector | Kind::Homogenize) && self.p >= theory_range {
            diag.warn(
                "p",
                format!(
                    "p = {} lies outside 1 < p < (d+4)/4 = {theory_range}, the range assumed by the \
                     convergence theory; results are computed but not covered by it",
                    self.p
                ),
            );
        }

        let needs_surface = self.kind.uses_sieve() || self.kind == Kind::Discrepancy;
        let needs_hole = self.kind != Kind::Discrepancy;
        let surface = match (&self.surface, needs_surface) {
            (Some(s), _) => build_surface(s, d, &mut diag),
            (None, true) => {
                diag.error("surface", "missing table [surface]");
                None
            }
            (None, false) => None,
        };
        let hole = match (&self.hole, needs_hole) {
            (Some(h), _) => build_hole(h, d, &mut diag),
            (None, true) => {
                diag.error("hole", "missing table [hole]");
                None
            }
            (None, false) => None,
        };

        if self.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            diag.error("eps", "every epsilon must be positive and finite");
        }
        if (self.kind.uses_sieve() || self.kind == Kind::Discrepancy) && self.eps.is_empty() {
            diag.error("eps", "at least one epsilon is required");
        }
        if let Some(r) = self.a_eps_ratio {
            if !(r > 0.0) {
                diag.error("a_eps_ratio", "must be positive");
            }
        }

        let mut sieves = Vec::new();
        if self.kind.uses_sieve() && diag.is_ok() {
            if let Some(hole) = &hole {
                for &e in &self.eps {
                    let built = match self.a_eps_ratio {
                        Some(r) => SieveConfig::with_hole_size(e, r * e, d, self.p, hole.clone()),
                        None => SieveConfig::critical(e, d, self.p, hole.clone()),
                    };
                    match built {
                        Ok(s) => sieves.push(s),
                        Err(err) => {
                            let key = if self.a_eps_ratio.is_some() { "a_eps_ratio" } else { "eps" };
                            diag.error(key, format!("epsilon = {e}: {err}"));
                        }
                    }
                }
            }
        }

        let mut obstacle = None;
        match self.kind {
            Kind::Discrepancy => self.check_discrepancy(surface.as_ref(), &mut diag),
            Kind::Capacity => self.check_capacity(hole.as_ref(), &mut diag),
            Kind::MeanCap => self.check_mean_cap(true, &mut diag),
            Kind::Corrector => self.check_corrector(surface.as_ref(), &mut diag),
            Kind::Homogenize => {
                obstacle = self.build_obstacle(surface.as_ref(), hole.as_ref(), &sieves, &mut diag);
            }
            Kind::Sweep => self.check_sweep(surface.as_ref(), hole.as_ref(), &mut diag),
        }
        if self.kind != Kind::MeanCap && self.mean_cap.is_some() {
            self.check_mean_cap(false, &mut diag);
        }

        if diag.is_ok() {
            Ok(Validated { config: self.clone(), surface, hole, sieves, obstacle, warnings: diag.warnings })
        } else {
            Err(diag)
        }
    }

    fn check_discrepancy(&self, surface: Option<&ConvexSurface>, diag: &mut Diagnostics) {
        let Some(s) = &self.discrepancy else {
            diag.error("discrepancy", "missing table [discrepancy]");
            return;
        };
        if let (Some(b), Some(surface)) =
            (chart_box(&s.chart_lo, &s.chart_hi, self.d - 1, "discrepancy.chart", diag), surface)
        {
            if !b.is_subset_of(surface.domain()) {
                diag.error("discrepancy.chart_lo", "chart box must lie inside the surface chart");
            }
        }
        let [lo, hi] = s.interval;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            diag.error("discrepancy.interval", "need 0 <= lo <= hi <= 1");
        }
        if s.harmonics == Some(0) {
            diag.error("discrepancy.harmonics", "must be at least 1");
        }
        if s.random_samples > 0 && s.random_max_len == 0 {
            diag.error("discrepancy.random_max_len", "must be at least 1");
        }
    }

    fn check_capacity(&self, hole: Option<&HoleShape>, diag: &mut Diagnostics) {
        let Some(c) = &self.capacity else {
            diag.error("capacity", "missing table [capacity]");
            return;
        };
        match c.set.as_str() {
            "solid" => {}
            "slice" => match &c.normal {
                Some(n) if n.len() == self.d && unit_length(n) => {}
                _ => diag.error("capacity.normal", format!("slice needs a unit normal of length d = {}", self.d)),
            },
            other => diag.error("capacity.set", format!("unknown set `{other}` (expected solid or slice)")),
        }
        if !(c.h > 0.0) {
            diag.error("capacity.h", "must be positive");
        }
        if c.levels == 0 {
            diag.error("capacity.levels", "must be at least 1");
        }
        if c.scales.is_empty() || c.scales.iter().any(|t| !(*t > 0.0)) {
            diag.error("capacity.scales", "need at least one positive scale");
        }
        if let Some(hole) = hole {
            if !(c.outer_radius > 4.0 * hole.bounding_radius()) {
                diag.error("capacity.outer_radius", "must exceed 4 times the radius of the set");
            }
        }
    }

    fn check_mean_cap(&self, own_kind: bool, diag: &mut Diagnostics) {
        let spec = self.mean_cap.clone().unwrap_or_default();
        if own_kind {
            if self.mean_cap.is_none() {
                diag.error("mean_cap", "missing table [mean_cap]");
                return;
            }
            if spec.normals.is_empty() {
                diag.error("mean_cap.normals", "at least one normal is required");
            }
        }
        if spec.normals.iter().any(|n| n.len() != self.d || !unit_length(n)) {
            diag.error("mean_cap.normals", format!("every normal must be a unit vector of length d = {}", self.d));
        }
        if !(spec.tolerance > 0.0) {
            diag.error("mean_cap.tolerance", "must be positive");
        }
        if spec.cells_per_radius == 0 || spec.levels == 0 {
            diag.error("mean_cap.levels", "cells_per_radius and levels must be at least 1");
        }
        if !(spec.outer_factor >= 4.0) {
            diag.error("mean_cap.outer_factor", "must be at least 4");
        }
    }

    fn check_corrector(&self, surface: Option<&ConvexSurface>, diag: &mut Diagnostics) {
        let Some(c) = &self.corrector else {
            diag.error("corrector", "missing table [corrector]");
            return;
        };
        if let Some(q) = chart_box(&c.q_lo, &c.q_hi, self.d, "corrector.q", diag) {
            if let Some(s) = surface {
                let chart = AxisBox::new(q.lo[..self.d - 1].to_vec(), q.hi[..self.d - 1].to_vec());
                if !chart.map(|b| b.is_subset_of(s.domain())).unwrap_or(false) {
                    diag.error("corrector.q_lo", "Q must lie over the surface chart");
                }
            }
        }
        if !matches!(c.model.as_str(), "exact" | "tangent-slices") {
            diag.error("corrector.model", "expected exact or tangent-slices");
        }
        if !(c.h > 0.0) || c.levels == 0 {
            diag.error("corrector.h", "spacing must be positive and levels at least 1");
        }
        if !(c.delta > 0.0) || !(c.mesh > 0.0) {
            diag.error("corrector.delta", "delta and mesh must be positive");
        }
    }

    fn check_sweep(&self, surface: Option<&ConvexSurface>, hole: Option<&HoleShape>, diag: &mut Diagnostics) {
        let Some(s) = &self.sweep else {
            diag.error("sweep", "missing table [sweep]");
            return;
        };
        if let (Some(w), Some(surface)) = (chart_box(&s.window_lo, &s.window_hi, self.d - 1, "sweep.window", diag), surface)
        {
            if !w.is_subset_of(surface.domain()) {
                diag.error("sweep.window_lo", "window must lie inside the surface chart");
            }
        }
        if !(s.h > 0.0) || s.levels == 0 {
            diag.error("sweep.h", "spacing must be positive and levels at least 1");
        }
        if s.deltas.iter().any(|x| !(*x > 0.0 && *x < 2.0)) {
            diag.error("sweep.deltas", "each |nu1 - nu2| must lie in (0, 2)");
        }
        if let Some(n) = &s.tilt_normal {
            if n.len() != self.d || !unit_length(n) {
                diag.error("sweep.tilt_normal", "must be a unit vector of length d");
            }
        }
        if let (Some(x), Some(hole)) = (&s.tilt_point, hole) {
            if x.len() != self.d || !(hole.signed_distance(x) < 0.0) {
                diag.error("sweep.tilt_point", "must be an interior point of the hole template");
            }
        }
    }

    fn build_obstacle(
        &self,
        surface: Option<&ConvexSurface>,
        hole: Option<&HoleShape>,
        sieves: &[SieveConfig],
        diag: &mut Diagnostics,
    ) -> Option<ObstacleProblemSpec> {
        let Some(c) = &self.homogenize else {
            diag.error("homogenize", "missing table [homogenize]");
            return None;
        };
        if self.eps.len() < 3 {
            diag.error("eps", "a convergence sweep needs at least 3 values of epsilon");
        }
        let domain = match (&c.polygon, &c.domain_lo, &c.domain_hi) {
            (Some(v), None, None) => {
                if self.d != 2 || v.len() < 3 {
                    diag.error("homogenize.polygon", "polygons need d = 2 and at least 3 vertices");
                    return None;
                }
                Domain::Polygon(v.clone())
            }
            (None, Some(lo), Some(hi)) => Domain::Box(chart_box(lo, hi, self.d, "homogenize.domain", diag)?),
            _ => {
                diag.error("homogenize.domain_lo", "give either domain_lo and domain_hi or polygon");
                return None;
            }
        };
        if c.obstacle_center.len() != self.d {
            diag.error("homogenize.obstacle_center", "length must equal d");
        }
        if !(c.obstacle_radius > 0.0) {
            diag.error("homogenize.obstacle_radius", "must be positive");
        }
        if !(c.mesh > 0.0) || !(c.delta > 0.0) {
            diag.error("homogenize.mesh", "mesh and delta must be positive");
        }
        if let Some(b) = surface.and_then(|s| domain.bounding_box().ok().map(|bb| (s, bb))) {
            let (s, bb) = b;
            let chart = AxisBox::new(bb.lo[..self.d - 1].to_vec(), bb.hi[..self.d - 1].to_vec()).ok()?;
            if !chart.is_subset_of(s.domain()) {
                diag.error("surface.chart_lo", "surface chart must cover the domain");
            }
        }
        for s in sieves {
            if c.h_grid > s.hole_size() / 4.0 {
                diag.error(
                    "homogenize.h_grid",
                    format!("h_grid = {} does not resolve a_eps = {:.4e} at epsilon = {} (need h_grid <= a_eps/4)", c.h_grid, s.hole_size(), s.eps()),
                );
                break;
            }
        }
        let (surface, hole) = (surface?.clone(), hole?.clone());
        if !diag.is_ok() {
            return None;
        }
        let bump = bump(c.obstacle_center.clone(), c.obstacle_radius, c.obstacle_height);
        let source = c.source;
        let built = ObstacleProblemSpec::new(domain, self.p, surface, hole, c.h_grid, move |_| source, bump)
            .and_then(|spec| match c.homogenized_source {
                Some(f) => spec.with_homogenized_source(move |_| f),
                None => Ok(spec),
            })
            .map(|spec| match self.a_eps_ratio {
                Some(r) => spec.with_hole_size(HoleSize::Ratio(r)),
                None => spec,
            });
        match built {
            Ok(spec) => Some(spec),
            Err(e) => {
                diag.core("homogenize", e);
                None
            }
        }
    }
}

/// `height · (1 − |x − center|²/radius²)²₊`.
pub fn bump(center: Vec<f64>, radius: f64, height: f64) -> impl Fn(&[f64]) -> f64 {
    move |x: &[f64]| {
        let r2: f64 = x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
        let q = 1.0 - r2 / (radius * radius);
        if q > 0.0 {
            height * q * q
        } else {
            0.0
        }
    }
}

fn unit_length(v: &[f64]) -> bool {
    (v.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-9
}

fn chart_box(lo: &[f64], hi: &[f64], dim: usize, key: &str, diag: &mut Diagnostics) -> Option<AxisBox> {
    if lo.len() != dim || hi.len() != dim {
        diag.error(format!("{key}_lo"), format!("corners must have length {dim}"));
        return None;
    }
    match AxisBox::new(lo.to_vec(), hi.to_vec()) {
        Ok(b) => Some(b),
        Err(e) => {
            diag.error(format!("{key}_lo"), e.to_string());
            None
        }
    }
}

fn build_surface(s: &SurfaceSpec, d: usize, diag: &mut Diagnostics) -> Option<ConvexSurface> {
    let chart = chart_box(&s.chart_lo, &s.chart_hi, d - 1, "surface.chart", diag)?;
    let n = d - 1;
    let need = |v: &Option<f64>, key: &str, diag: &mut Diagnostics| {
        if v.is_none() {
            diag.error(format!("surface.{key}"), format!("required for shape `{}`", s.shape));
        }
        *v
    };
    let built = match s.shape.as_str() {
        "quadratic" => {
            let (Some(a), Some(b)) = (&s.a, &s.b) else {
                diag.error("surface.a", "quadratic surfaces need `a` and `b`");
                return None;
            };
            ConvexSurface::quadratic(a.clone(), b.clone(), s.c.unwrap_or(0.0), chart)
        }
        "paraboloid" => ConvexSurface::paraboloid(d, chart),
        "plane" => {
            let slope = s.slope.clone().unwrap_or_else(|| vec![0.0; n]);
            ConvexSurface::plane(slope, s.c.unwrap_or(0.0), chart)
        }
        "cosh" => {
            let amplitude = need(&s.amplitude, "amplitude", diag);
            let rate = need(&s.rate, "rate", diag);
            ConvexSurface::cosh(amplitude?, rate?, chart)
        }
        other => {
            diag.error("surface.shape", format!("unknown shape `{other}` (expected quadratic, paraboloid, plane or cosh)"));
            return None;
        }
    };
    built.map_err(|e| diag.core("surface", e)).ok()
}

fn build_hole(h: &HoleSpec, d: usize, diag: &mut Diagnostics) -> Option<HoleShape> {
    let built = match h.shape.as_str() {
        "ball" => HoleShape::ball(d, h.radius.unwrap_or(1.0)),
        "cube" => match h.side {
            Some(side) => HoleShape::cube(d, side),
            None => {
                diag.error("hole.side", "required for shape `cube`");
                return None;
            }
        },
        "box" => match &h.half_widths {
            Some(w) if w.len() == d => HoleShape::axis_box(w.clone()),
            _ => {
                diag.error("hole.half_widths", format!("need {d} half-widths"));
                return None;
            }
        },
        other => {
            diag.error("hole.shape", format!("unknown shape `{other}` (expected ball, cube or box)"));
            return None;
        }
    };
    built.map_err(|e| diag.core("hole", e)).ok()
}

/// Key named by a TOML schema error: the backticked field of a "missing
/// field" or "unknown field" message, else the source text at the error.
fn schema_key(message: &str, at: Option<&str>) -> String {
    for marker in ["missing field `", "unknown field `", "unknown variant `"] {
        if let Some(rest) = message.split(marker).nth(1) {
            if let Some(key) = rest.split('`').next() {
                return key.to_string();
            }
        }
    }
    at.and_then(|s| s.split(['=', '\n']).next())
        .map(|s| s.trim().trim_matches(['[', ']']).to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "config".to_string())
}
