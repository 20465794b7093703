//! One runner per experiment kind. Independent solves run on the current
//! rayon pool; results are collected in config order, so outputs do not
//! depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sieve_core::equidistribution::{
    count_deviation, decay_fit, default_harmonics, discrepancy_exact, erdos_turan_bound, surface_sequence,
    ModInterval, ModOneSample,
};
use sieve_core::homogenization::{
    assemble, convergence_row, corrector_energy, facet_normals, hit_cells_in, solve_homogenized, solve_perforated,
    CapacityCache, CellModel, LimitMeasureTable,
};
use sieve_core::pcapacity::{
    farfield_bound_check, mean_capacity_with, plane_tilt_gap, slice, slice_capacity, solve_capacity,
    tangent_approx_gap, CapacityProblem, CondenserSet, MeanCapacity, MeanCapacityOptions, Resolution,
    SliceResolution,
};
use sieve_core::solver::SolverOptions;
use sieve_core::surface_geometry::{central_offset, enumerate_hit_cells, AxisBox, CellIndex, ConvexSurface, HoleShape, SieveConfig};

use crate::config::{Kind, MeanCapSpec, Validated};
use crate::output::Artifacts;
use crate::svg::{Plot, Series};
use crate::table::{format_vector, Cell, Table};
use crate::LabError;

type Result<T> = std::result::Result<T, LabError>;

fn core<T>(r: sieve_core::Result<T>, context: impl Into<String>) -> Result<T> {
    r.map_err(|source| LabError::Compute { context: context.into(), source })
}

pub fn run(v: &Validated) -> Result<Artifacts> {
    match v.config.kind {
        Kind::Discrepancy => discrepancy(v),
        Kind::Capacity => capacity(v),
        Kind::MeanCap => mean_cap(v),
        Kind::Corrector => corrector(v),
        Kind::Homogenize => homogenize(v),
        Kind::Sweep => sweep(v),
    }
}

fn surface(v: &Validated) -> &ConvexSurface {
    v.surface.as_ref().expect("validated configs carry their surface")
}

fn hole(v: &Validated) -> &HoleShape {
    v.hole.as_ref().expect("validated configs carry their hole")
}

fn mean_options(spec: &MeanCapSpec) -> MeanCapacityOptions {
    MeanCapacityOptions {
        tolerance: spec.tolerance,
        max_depth: spec.max_depth,
        slices: SliceResolution {
            cells_per_radius: spec.cells_per_radius,
            levels: spec.levels,
            outer_factor: spec.outer_factor,
        },
    }
}

/// Mean capacity with the slice solves spread over the pool.
pub fn mean_capacity_parallel(
    hole: &HoleShape,
    nu: &[f64],
    p: f64,
    options: &MeanCapacityOptions,
) -> sieve_core::Result<MeanCapacity> {
    mean_capacity_with(hole, nu, options, |ts| {
        ts.par_iter().map(|&t| slice_capacity(p, &slice(hole, nu, t)?, &options.slices)).collect()
    })
}

/// Fills every missing normal of `cache`, one parallel task per normal.
pub fn fill_cache(cache: &mut CapacityCache, normals: &[Vec<f64>]) -> sieve_core::Result<()> {
    let (hole, p, options) = (cache.hole().clone(), cache.p(), *cache.options());
    cache.fill_with(normals, |reps| {
        reps.par_iter().map(|nu| mean_capacity_parallel(&hole, nu, p, &options)).collect()
    })
}

fn discrepancy(v: &Validated) -> Result<Artifacts> {
    let cfg = &v.config;
    let spec = cfg.discrepancy.as_ref().expect("validated");
    let surface = surface(v);
    let chart = core(AxisBox::new(spec.chart_lo.clone(), spec.chart_hi.clone()), "discrepancy.chart_lo")?;
    let interval = core(ModInterval::new(spec.interval[0], spec.interval[1]), "discrepancy.interval")?;

    let rows = cfg
        .eps
        .par_iter()
        .map(|&e| -> Result<Vec<Cell>> {
            let sample = core(surface_sequence(surface, e, &chart), format!("eps = {e}"))?;
            if sample.is_empty() {
                return Ok(vec![e.into(), 0usize.into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]);
            }
            let dev = core(count_deviation(&sample, &interval), "discrepancy.interval")?;
            let exact = core(discrepancy_exact(&sample), "eps")?;
            let n = spec.harmonics.unwrap_or_else(|| default_harmonics(sample.len()));
            let bound = core(erdos_turan_bound(&sample, n), "discrepancy.harmonics")?;
            Ok(vec![
                e.into(),
                sample.len().into(),
                dev.count.into(),
                dev.deviation.into(),
                bound.into(),
                exact.value.into(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(["epsilon", "N", "A", "deviation", "bound_ET", "D_exact"]);
    let mut pairs = Vec::new();
    for row in rows {
        if let (Cell::Num(e), Cell::Num(dev)) = (&row[0], &row[3]) {
            pairs.push((*e, *dev));
        }
        table.push(row);
    }
    let fit = decay_fit(&pairs).ok();
    if let Some(fit) = &fit {
        // footer: exponent, constant and worst log residual of the fit
        table.push(vec![
            "fit".into(),
            Cell::Empty,
            Cell::Empty,
            fit.exponent.into(),
            fit.constant.into(),
            fit.max_residual.into(),
        ]);
    }
    let mut art = Artifacts::default();
    let mut plot = Plot::new("deviation from |I|", "epsilon", "|A/N - |I||")
        .log_log()
        .with(Series::new("deviation", pairs.clone()));
    if let Some(fit) = &fit {
        let line = pairs.iter().map(|&(e, _)| (e, fit.constant * e.powf(fit.exponent))).collect();
        plot = plot.with(Series::new(format!("fit, exponent {:.3}", fit.exponent), line).dashed());
    }
    art.table("discrepancy", table);
    art.plot("decay", plot);

    if spec.random_samples > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let samples: Vec<Vec<f64>> = (0..spec.random_samples)
            .map(|_| {
                let n = rng.gen_range(1..=spec.random_max_len);
                (0..n).map(|_| rng.gen::<f64>()).collect()
            })
            .collect();
        let rows = samples
            .par_iter()
            .map(|values| -> Result<Vec<Cell>> {
                let sample = core(ModOneSample::from_values(values.clone()), "discrepancy.random_samples")?;
                let exact = core(discrepancy_exact(&sample), "discrepancy.random_samples")?.value;
                let mut min_bound = f64::INFINITY;
                let mut violations = 0usize;
                for n in 1..=100 {
                    let b = core(erdos_turan_bound(&sample, n), "discrepancy.random_samples")?;
                    min_bound = min_bound.min(b);
                    violations += usize::from(exact > b);
                }
                Ok(vec![sample.len().into(), exact.into(), min_bound.into(), violations.into()])
            })
            .collect::<Result<Vec<_>>>()?;
        let mut t = Table::new(["sample", "N", "D_exact", "min_bound_ET", "violations"]);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.insert(0, i.into());
            t.push(row);
        }
        art.table("erdos_turan", t);
    }
    Ok(art)
}

fn capacity(v: &Validated) -> Result<Artifacts> {
    let cfg = &v.config;
    let spec = cfg.capacity.as_ref().expect("validated");
    let hole = hole(v);
    let set = match spec.set.as_str() {
        "slice" => {
            let nu = spec.normal.clone().expect("validated");
            let s = core(slice(hole, &nu, spec.offset), "capacity.normal")?;
            CondenserSet::Flat { slice: s.set, shift: vec![0.0; cfg.d - 1] }
        }
        _ => CondenserSet::Solid(hole.clone()),
    };
    let base = core(
        Resolution::new(spec.h, spec.levels).and_then(|r| CapacityProblem::new(cfg.p, spec.outer_radius, set, r)),
        "capacity",
    )?;
    let estimates = spec
        .scales
        .par_iter()
        .map(|&t| core(base.scaled(t).and_then(|pr| solve_capacity(&pr)), format!("capacity.scales = {t}")))
        .collect::<Result<Vec<_>>>()?;

    let reference = spec.scales.iter().position(|&t| t == 1.0);
    let mut levels = Table::new(["scale", "h", "mu_reg", "value", "residual", "extrapolated"]);
    let mut summary = Table::new([
        "scale",
        "extrapolated",
        "global",
        "observed_order",
        "ratio",
        "expected_ratio",
        "farfield_violation",
        "farfield_tolerance",
        "flags",
    ]);
    let mut art = Artifacts::default();
    let mut plot = Plot::new("capacity under refinement", "h", "condenser value").log_log();
    for (&t, e) in spec.scales.iter().zip(&estimates) {
        for l in &e.levels {
            let mu = SolverOptions::for_grid(cfg.p, l.h).mu_schedule.last().copied().unwrap_or(0.0);
            levels.push(vec![t.into(), l.h.into(), mu.into(), l.value.into(), l.residual.into(), e.extrapolated.into()]);
        }
        plot = plot.with(Series::new(format!("scale {t}"), e.levels.iter().map(|l| (l.h, l.value)).collect()));
        let ratio = reference.map(|r| e.extrapolated / estimates[r].extrapolated);
        let check = farfield_bound_check(e);
        let mut flags = Vec::new();
        if e.flags.empty_marking {
            flags.push("empty-marking");
        }
        if e.flags.refinement_not_monotone {
            flags.push("not-monotone");
        }
        if e.flags.set_near_boundary {
            flags.push("near-boundary");
        }
        if e.flags.coarse_grid {
            flags.push("coarse-grid");
        }
        summary.push(vec![
            t.into(),
            e.extrapolated.into(),
            e.global.into(),
            e.observed_order.into(),
            ratio.into(),
            t.powf(cfg.d as f64 - cfg.p).into(),
            check.violation.into(),
            check.tolerance.into(),
            flags.join(" ").into(),
        ]);
    }
    art.table("capacity", levels);
    art.table("scaling", summary);
    art.plot("refinement", plot);
    let first = reference.unwrap_or(0);
    art.field("potential", estimates[first].potential.clone());
    Ok(art)
}

fn mean_cap(v: &Validated) -> Result<Artifacts> {
    let cfg = &v.config;
    let spec = cfg.mean_cap.as_ref().expect("validated");
    let options = mean_options(spec);
    let hole = hole(v);
    let means = spec
        .normals
        .iter()
        .map(|nu| core(mean_capacity_parallel(hole, nu, cfg.p, &options), format!("mean_cap.normals = {nu:?}")))
        .collect::<Result<Vec<_>>>()?;
    let mut values = Table::new(["normal", "value", "support_lo", "support_hi", "nodes"]);
    let mut nodes = Table::new(["normal", "t", "capacity"]);
    let mut plot = Plot::new("slice capacities", "t", "cap_p(slice)");
    for (nu, m) in spec.normals.iter().zip(&means) {
        let label = format_vector(nu);
        values.push(vec![
            label.clone().into(),
            m.value.into(),
            m.support.0.into(),
            m.support.1.into(),
            m.table.len().into(),
        ]);
        for &(t, c) in &m.table {
            nodes.push(vec![label.clone().into(), t.into(), c.into()]);
        }
        plot = plot.with(Series::new(label, m.table.clone()));
    }
    let mut art = Artifacts::default();
    art.table("mean_capacity", values);
    art.table("slices", nodes);
    art.plot("slices", plot);
    Ok(art)
}

fn corrector(v: &Validated) -> Result<Artifacts> {
    let cfg = &v.config;
    let spec = cfg.corrector.as_ref().expect("validated");
    let surface = surface(v);
    let q = core(AxisBox::new(spec.q_lo.clone(), spec.q_hi.clone()), "corrector.q_lo")?;
    let options = mean_options(&cfg.mean_cap.clone().unwrap_or_default());
    let mut cache = core(CapacityCache::new(hole(v).clone(), cfg.p, spec.delta, options), "corrector.delta")?;

    // limit table over Q: facets of Γ with centroid in Q
    let chart_hi: Vec<f64> = q.hi.clone();
    let omega = core(AxisBox::new(q.lo.clone(), chart_hi), "corrector.q_lo")?;
    let mut normals = core(facet_normals(surface, &omega, spec.mesh, spec.delta), "corrector.mesh")?;
    let exact = spec.model == "exact";
    let mut cells_by_eps = Vec::new();
    for s in &v.sieves {
        let cells = core(hit_cells_in(surface, s, &q), format!("eps = {}", s.eps()))?;
        if !exact {
            normals.extend(cells.iter().map(|c| c.normal.clone()));
        }
        cells_by_eps.push(cells.len());
    }
    core(fill_cache(&mut cache, &normals), "mean_cap")?;
    let table = core(assemble(surface, &omega, spec.mesh, &cache), "corrector.mesh")?;
    let limit = table.total_in(&q);

    let energies = if exact {
        let resolution = core(Resolution::new(spec.h, spec.levels), "corrector.h")?;
        v.sieves
            .par_iter()
            .map(|s| core(corrector_energy(surface, s, &q, CellModel::Exact(resolution)), format!("eps = {}", s.eps())))
            .collect::<Result<Vec<_>>>()?
    } else {
        v.sieves
            .iter()
            .map(|s| {
                core(corrector_energy(surface, s, &q, CellModel::TangentSlices(&mut cache)), format!("eps = {}", s.eps()))
            })
            .collect::<Result<Vec<_>>>()?
    };

    let mut totals = Table::new([
        "epsilon",
        "a_eps",
        "n_hit_cells",
        "total",
        "volume",
        "density",
        "limit",
        "relative_distance",
    ]);
    let mut cells = Table::new(["epsilon", "cell", "normal", "offset", "unit", "physical"]);
    let mut dist = Vec::new();
    for (s, e) in v.sieves.iter().zip(&energies) {
        let rel = (e.total - limit).abs() / limit;
        dist.push((s.eps(), rel));
        totals.push(vec![
            s.eps().into(),
            s.hole_size().into(),
            e.cells.len().into(),
            e.total.into(),
            e.volume.into(),
            e.density().into(),
            limit.into(),
            rel.into(),
        ]);
        for c in &e.cells {
            cells.push(vec![
                s.eps().into(),
                format_index(&c.geometry.index).into(),
                format_vector(&c.geometry.normal).into(),
                c.geometry.offset.into(),
                c.unit.into(),
                c.physical.into(),
            ]);
        }
    }
    let mut art = Artifacts::default();
    art.table("corrector", totals);
    art.table("cells", cells);
    art.table("limit_measure", facet_table(&table));
    art.plot(
        "corrector",
        Plot::new("corrector energy vs limit measure", "epsilon", "relative distance")
            .log_log()
            .with(Series::new("|total - mu(Q)| / mu(Q)", dist)),
    );
    Ok(art)
}

fn format_index(k: &CellIndex) -> String {
    k.0.iter().map(i64::to_string).collect::<Vec<_>>().join(" ")
}

fn facet_table(table: &LimitMeasureTable) -> Table {
    let mut t = Table::new(["centroid", "normal", "area", "capacity"]);
    for f in &table.facets {
        t.push(vec![
            format_vector(&f.centroid).into(),
            format_vector(&f.normal).into(),
            f.area.into(),
            f.capacity.into(),
        ]);
    }
    t
}

fn homogenize(v: &Validated) -> Result<Artifacts> {
    let cfg = &v.config;
    let spec = cfg.homogenize.as_ref().expect("validated");
    let problem = v.obstacle.as_ref().expect("validated");
    let surface = surface(v);
    let options = mean_options(&cfg.mean_cap.clone().unwrap_or_default());
    let bbox = core(problem.domain().bounding_box(), "homogenize.domain_lo")?;
    let mut cache = core(CapacityCache::new(hole(v).clone(), cfg.p, spec.delta, options), "homogenize.delta")?;
    let normals = core(facet_normals(surface, &bbox, spec.mesh, spec.delta), "homogenize.mesh")?;
    core(fill_cache(&mut cache, &normals), "mean_cap")?;
    let mut table = core(assemble(surface, &bbox, spec.mesh, &cache), "homogenize.mesh")?;
    table.facets.retain(|f| problem.domain().contains(&f.centroid));

    let hom = core(solve_homogenized(problem, &table), "homogenized problem")?;
    let perforated = v
        .sieves
        .par_iter()
        .map(|s| core(solve_perforated(problem, s.eps()), format!("eps = {}", s.eps())))
        .collect::<Result<Vec<_>>>()?;
    let mut report =
        Table::new(["epsilon", "a_eps", "lp_distance", "energy_perforated", "energy_hom", "n_hit_cells"]);
    let mut dist = Vec::new();
    let mut gap = Vec::new();
    for (s, sol) in v.sieves.iter().zip(&perforated) {
        let row = core(convergence_row(problem, s.eps(), sol, &hom), format!("eps = {}", s.eps()))?;
        dist.push((row.eps, row.lp_distance));
        gap.push((row.eps, row.energy_gap()));
        report.push(vec![
            row.eps.into(),
            row.a_eps.into(),
            row.lp_distance.into(),
            row.energy_perforated.into(),
            row.energy_homogenized.into(),
            row.hit_cells.into(),
        ]);
    }
    let mut art = Artifacts::default();
    art.table("convergence", report);
    art.table("limit_measure", facet_table(&table));
    art.plot(
        "convergence",
        Plot::new("perforated vs homogenized", "epsilon", "distance")
            .log_log()
            .with(Series::new("L^p distance", dist))
            .with(Series::new("energy gap", gap)),
    );
    if spec.write_fields {
        art.field("u_hom", hom.field.clone());
        for (i, sol) in perforated.into_iter().enumerate() {
            art.field(&format!("u_eps_{i}"), sol.field);
        }
    }
    Ok(art)
}

/// Hit cell with the most central cut among those over `window`.
pub fn most_central_cell(surface: &ConvexSurface, sieve: &SieveConfig, window: &AxisBox) -> Option<(CellIndex, f64)> {
    enumerate_hit_cells(surface, sieve, window)
        .into_iter()
        .map(|c| {
            let off = central_offset(surface, sieve, &c.index);
            (c.index, off)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)))
}

fn sweep(v: &Validated) -> Result<Artifacts> {
    let cfg = &v.config;
    let spec = cfg.sweep.as_ref().expect("validated");
    let surface = surface(v);
    let hole = hole(v);
    let window = core(AxisBox::new(spec.window_lo.clone(), spec.window_hi.clone()), "sweep.window_lo")?;
    let resolution = core(Resolution::new(spec.h, spec.levels), "sweep.h")?;
    let rows = v
        .sieves
        .par_iter()
        .map(|s| -> Result<Vec<Cell>> {
            let Some((k, off)) = most_central_cell(surface, s, &window) else {
                return Err(LabError::Compute {
                    context: format!("sweep.window_lo at eps = {}", s.eps()),
                    source: sieve_core::Error::CellNotHit,
                });
            };
            let g = core(tangent_approx_gap(surface, s, &k, resolution), format!("eps = {}", s.eps()))?;
            Ok(vec![
                s.eps().into(),
                s.hole_size().into(),
                format_index(&k).into(),
                off.into(),
                g.gap.into(),
                g.reference.global.into(),
                g.compared.global.into(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tangent = Table::new(["epsilon", "a_eps", "cell", "central_offset", "gap", "tangent_plane", "surface"]);
    let mut pts = Vec::new();
    for row in rows {
        if let (Cell::Num(e), Cell::Num(g)) = (&row[0], &row[4]) {
            pts.push((*e, *g));
        }
        tangent.push(row);
    }
    let mut art = Artifacts::default();
    art.table("tangent_gap", tangent);
    art.plot(
        "tangent_gap",
        Plot::new("tangent-plane approximation", "epsilon", "gap / a^(d-p)").log_log().with(Series::new("gap", pts)),
    );

    if !spec.deltas.is_empty() {
        let d = cfg.d;
        let nu1 = spec.tilt_normal.clone().unwrap_or_else(|| {
            let mut e = vec![0.0; d];
            e[d - 1] = 1.0;
            e
        });
        let x = spec.tilt_point.clone().unwrap_or_else(|| vec![0.0; d]);
        let rows = spec
            .deltas
            .par_iter()
            .map(|&delta| -> Result<Vec<Cell>> {
                let nu2 = tilted(&nu1, delta);
                let g = core(plane_tilt_gap(hole, &nu1, &nu2, cfg.p, &x, resolution), format!("sweep.deltas = {delta}"))?;
                Ok(vec![delta.into(), format_vector(&nu2).into(), g.gap.into(), g.reference.global.into(), g.compared.global.into()])
            })
            .collect::<Result<Vec<_>>>()?;
        let mut t = Table::new(["delta", "tilted_normal", "gap", "first", "second"]);
        let mut pts = Vec::new();
        for row in rows {
            if let (Cell::Num(dl), Cell::Num(g)) = (&row[0], &row[2]) {
                pts.push((*dl, *g));
            }
            t.push(row);
        }
        art.table("tilt_gap", t);
        art.plot("tilt_gap", Plot::new("plane tilt", "|nu1 - nu2|", "gap").with(Series::new("gap", pts)));
    }
    Ok(art)
}

/// Unit vector at distance `delta` from the unit vector `nu`, rotated
/// towards the first coordinate axis not parallel to it.
pub fn tilted(nu: &[f64], delta: f64) -> Vec<f64> {
    let angle = 2.0 * (delta / 2.0).asin();
    let d = nu.len();
    let axis = (0..d).min_by(|&i, &j| nu[i].abs().total_cmp(&nu[j].abs())).unwrap_or(0);
    let mut u: Vec<f64> = (0..d).map(|i| if i == axis { 1.0 } else { 0.0 }).collect();
    let c: f64 = u.iter().zip(nu).map(|(a, b)| a * b).sum();
    u.iter_mut().zip(nu).for_each(|(a, b)| *a -= c * b);
    let n = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    nu.iter().zip(&u).map(|(a, b)| angle.cos() * a + angle.sin() * b / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tilted_normals_sit_at_the_requested_distance() {
        for nu in [vec![0.0, 0.0, 1.0], vec![0.6, 0.8], vec![1.0, 0.0]] {
            for delta in [0.05, 0.2, 1.0] {
                let t = tilted(&nu, delta);
                let dist: f64 = t.iter().zip(&nu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let len: f64 = t.iter().map(|a| a * a).sum::<f64>().sqrt();
                assert!((dist - delta).abs() < 1e-12 && (len - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn central_cells_of_a_parabola_are_exact_cuts() {
        let s = ConvexSurface::paraboloid(2, AxisBox::new(vec![0.0], vec![1.0]).unwrap()).unwrap();
        let sieve = SieveConfig::critical(1.0 / 16.0, 2, 1.3, HoleShape::ball(2, 0.5).unwrap()).unwrap();
        let (k, off) = most_central_cell(&s, &sieve, &AxisBox::new(vec![0.4], vec![0.6]).unwrap()).unwrap();
        // g(1/2) = 1/8 = 2ε
        assert_eq!(k, CellIndex(vec![8, 2]));
        assert!(off < 1e-12);
    }
}
