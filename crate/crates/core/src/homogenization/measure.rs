use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{acos, ceil, normalized, round, sqrt};
use crate::pcapacity::{mean_capacity, MeanCapacity, MeanCapacityOptions};
use crate::surface_geometry::{AxisBox, ConvexSurface, HoleShape};
use crate::{Error, Result};

/// Slice capacities `t ↦ cap_p(T ∩ {P_ν + tν})` for one normal, from the
/// nodes of the mean-capacity quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceProfile {
    pub normal: Vec<f64>,
    pub mean: MeanCapacity,
    /// `(θ, cap)` with `t = m − w cos θ`, sorted by `θ`.
    nodes: Vec<(f64, f64)>,
}

impl SliceProfile {
    pub fn new(normal: Vec<f64>, mean: MeanCapacity) -> Self {
        let (lo, hi) = mean.support;
        let (m, w) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let nodes = if w > 0.0 {
            mean.table.iter().map(|&(t, c)| (acos(((m - t) / w).clamp(-1.0, 1.0)), c)).collect()
        } else {
            Vec::new()
        };
        Self { normal, mean, nodes }
    }

    /// `cap_{p,ν}(T)`.
    pub fn mean_value(&self) -> f64 {
        self.mean.value
    }

    /// Slice capacity at offset `t`: piecewise linear in `θ`, linearly
    /// extrapolated to the support ends and clamped at 0; 0 outside the
    /// support.
    pub fn capacity_at(&self, t: f64) -> f64 {
        let (lo, hi) = self.mean.support;
        if !(t > lo && t < hi) || self.nodes.is_empty() {
            return 0.0;
        }
        let (m, w) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let th = acos(((m - t) / w).clamp(-1.0, 1.0));
        let n = self.nodes.len();
        if n == 1 {
            return self.nodes[0].1;
        }
        let j = self.nodes.partition_point(|&(x, _)| x < th).clamp(1, n - 1);
        let (a, b) = (self.nodes[j - 1], self.nodes[j]);
        let f = (th - a.0) / (b.0 - a.0);
        (a.1 + f * (b.1 - a.1)).max(0.0)
    }
}

/// Mean capacities of a template keyed by quantized normal direction.
#[derive(Debug, Clone)]
pub struct CapacityCache {
    hole: HoleShape,
    p: f64,
    step: f64,
    options: MeanCapacityOptions,
    entries: BTreeMap<Vec<i64>, SliceProfile>,
}

impl CapacityCache {
    /// Normals are quantized componentwise with step `δ/4`.
    pub fn new(hole: HoleShape, p: f64, delta: f64, options: MeanCapacityOptions) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::invalid("delta", "normal tolerance must be positive"));
        }
        Ok(Self { hole, p, step: delta / 4.0, options, entries: BTreeMap::new() })
    }

    pub fn hole(&self) -> &HoleShape {
        &self.hole
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn options(&self) -> &MeanCapacityOptions {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Quantization key and the unit normal it stands for.
    pub fn quantize(&self, nu: &[f64]) -> (Vec<i64>, Vec<f64>) {
        let key: Vec<i64> = nu.iter().map(|v| round(v / self.step) as i64).collect();
        let raw: Vec<f64> = key.iter().map(|&k| k as f64 * self.step).collect();
        let rep = normalized(&raw).unwrap_or_else(|| nu.to_vec());
        (key, rep)
    }

    fn missing_keys(&self, normals: &[Vec<f64>]) -> BTreeMap<Vec<i64>, Vec<f64>> {
        let mut seen = BTreeMap::new();
        for nu in normals {
            let (key, rep) = self.quantize(nu);
            if !self.entries.contains_key(&key) {
                seen.entry(key).or_insert(rep);
            }
        }
        seen
    }

    /// Representative normals of `normals` not yet in the cache, deduplicated.
    pub fn missing(&self, normals: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.missing_keys(normals).into_values().collect()
    }

    /// Fills missing entries with a batch evaluator of mean capacities at
    /// representative normals.
    pub fn fill_with<F>(&mut self, normals: &[Vec<f64>], eval: F) -> Result<()>
    where
        F: Fn(&[Vec<f64>]) -> Result<Vec<MeanCapacity>>,
    {
        let (keys, reps): (Vec<Vec<i64>>, Vec<Vec<f64>>) = self.missing_keys(normals).into_iter().unzip();
        if keys.is_empty() {
            return Ok(());
        }
        let values = eval(&reps)?;
        if values.len() != keys.len() {
            return Err(Error::invalid("evaluator", "returned the wrong number of values"));
        }
        for ((key, rep), mean) in keys.into_iter().zip(reps).zip(values) {
            self.entries.insert(key, SliceProfile::new(rep, mean));
        }
        Ok(())
    }

    /// Fills missing entries one normal at a time.
    pub fn fill(&mut self, normals: &[Vec<f64>]) -> Result<()> {
        let (hole, p, options) = (self.hole.clone(), self.p, self.options);
        self.fill_with(normals, |reps| reps.iter().map(|nu| mean_capacity(&hole, nu, p, &options)).collect())
    }

    pub fn get(&self, nu: &[f64]) -> Option<&SliceProfile> {
        self.entries.get(&self.quantize(nu).0)
    }

    pub fn profiles(&self) -> impl Iterator<Item = &SliceProfile> {
        self.entries.values()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Point of `Γ`.
    pub centroid: Vec<f64>,
    pub normal: Vec<f64>,
    /// Surface measure carried by the facet.
    pub area: f64,
    /// `cap_{p,ν}(T)` at the quantized normal.
    pub capacity: f64,
}

/// Quadrature of `μ = cap_{p,ν} H^{d−1}⌊Γ` over `Γ ∩ Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitMeasureTable {
    pub facets: Vec<Facet>,
    /// Chart spacing of the facet cells.
    pub mesh: f64,
    pub delta: f64,
}

impl LimitMeasureTable {
    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.facets.iter().map(|f| f.area).sum()
    }

    /// `μ(Ω)`.
    pub fn total(&self) -> f64 {
        self.facets.iter().map(|f| f.area * f.capacity).sum()
    }

    /// `μ(Q)` over facets whose centroid lies in `q` (half-open).
    pub fn total_in(&self, q: &AxisBox) -> f64 {
        self.facets.iter().filter(|f| q.contains_half_open(&f.centroid)).map(|f| f.area * f.capacity).sum()
    }

    /// The same table with every capacity multiplied by `factor`.
    pub fn with_capacity_factor(mut self, factor: f64) -> Self {
        self.facets.iter_mut().for_each(|f| f.capacity *= factor);
        self
    }

    /// The same table with every area multiplied by `factor`.
    pub fn with_area_factor(mut self, factor: f64) -> Self {
        self.facets.iter_mut().for_each(|f| f.area *= factor);
        self
    }
}

/// Chart cells of side at most `mesh` and small enough that the normal
/// turns by at most `δ` across a cell; two Gauss points per axis each give
/// a facet. Points whose surface point falls outside `Ω` are dropped.
pub fn facet_geometry(surface: &ConvexSurface, omega: &AxisBox, mesh: f64, delta: f64) -> Result<(Vec<Facet>, f64)> {
    let d = surface.dim();
    if omega.dim() != d {
        return Err(Error::invalid("domain", "dimension differs from the surface"));
    }
    if !(mesh > 0.0) || !(delta > 0.0) {
        return Err(Error::invalid("mesh", "facet size and normal tolerance must be positive"));
    }
    let n = d - 1;
    let chart = surface.domain();
    let lo: Vec<f64> = (0..n).map(|i| chart.lo[i].max(omega.lo[i])).collect();
    let hi: Vec<f64> = (0..n).map(|i| chart.hi[i].min(omega.hi[i])).collect();
    if (0..n).any(|i| !(hi[i] > lo[i])) {
        return Err(Error::invalid("domain", "surface chart does not meet the domain"));
    }
    // |ν(x) − ν(y)| ≤ C0 |x − y|
    let c = surface.c_max();
    let size = if c > 0.0 { mesh.min(delta / (c * sqrt(n as f64))) } else { mesh };
    let counts: Vec<usize> = (0..n).map(|i| (ceil((hi[i] - lo[i]) / size) as usize).max(1)).collect();
    let widths: Vec<f64> = (0..n).map(|i| (hi[i] - lo[i]) / counts[i] as f64).collect();
    let gauss = [0.5 - 0.5 / sqrt(3.0), 0.5 + 0.5 / sqrt(3.0)];
    let per_cell = 1usize << n;
    let total: usize = counts.iter().product();
    let weight: f64 = widths.iter().product::<f64>() / per_cell as f64;
    let mut facets = Vec::new();
    let mut x = vec![0.0; n];
    for cell in 0..total {
        let mut rest = cell;
        let mut corner = vec![0usize; n];
        for i in (0..n).rev() {
            corner[i] = rest % counts[i];
            rest /= counts[i];
        }
        for q in 0..per_cell {
            for i in 0..n {
                x[i] = lo[i] + widths[i] * (corner[i] as f64 + gauss[(q >> i) & 1]);
            }
            let mut point = x.clone();
            point.push(surface.value(&x));
            if !omega.contains(&point) {
                continue;
            }
            facets.push(Facet {
                centroid: point,
                normal: surface.normal_unchecked(&x),
                area: weight * surface.area_element(&x),
                capacity: 0.0,
            });
        }
    }
    let spacing = widths.iter().copied().fold(0.0, f64::max);
    Ok((facets, spacing))
}

/// Facet table of `μ` on `Γ ∩ Ω` with capacities from `cache` (filled
/// serially where missing).
pub fn build_limit_measure(
    surface: &ConvexSurface,
    omega: &AxisBox,
    mesh: f64,
    cache: &mut CapacityCache,
) -> Result<LimitMeasureTable> {
    let delta = 4.0 * cache.step;
    let (facets, _) = facet_geometry(surface, omega, mesh, delta)?;
    let normals: Vec<Vec<f64>> = facets.iter().map(|f| f.normal.clone()).collect();
    cache.fill(&normals)?;
    assemble(surface, omega, mesh, cache)
}

/// Facet table from a cache that already holds every facet normal
/// (see [`CapacityCache::fill_with`] and [`facet_geometry`]).
pub fn assemble(surface: &ConvexSurface, omega: &AxisBox, mesh: f64, cache: &CapacityCache) -> Result<LimitMeasureTable> {
    let delta = 4.0 * cache.step;
    if surface.dim() != cache.hole.dim() {
        return Err(Error::invalid("hole", "template dimension differs from the surface"));
    }
    let (mut facets, spacing) = facet_geometry(surface, omega, mesh, delta)?;
    for f in &mut facets {
        let profile = cache.get(&f.normal).ok_or(Error::invalid("cache", "a facet normal has no capacity"))?;
        f.capacity = profile.mean_value();
    }
    Ok(LimitMeasureTable { facets, mesh: spacing, delta })
}

/// Normal of `Γ` at every facet, for prefilling a cache.
pub fn facet_normals(surface: &ConvexSurface, omega: &AxisBox, mesh: f64, delta: f64) -> Result<Vec<Vec<f64>>> {
    Ok(facet_geometry(surface, omega, mesh, delta)?.0.into_iter().map(|f| f.normal).collect())
}
