//! Acceptance gate: one pass/fail line per criterion, each checked against
//! an oracle written here rather than against the library itself.
//!
//! Runs in a few minutes on one core. Lines go straight to stderr so they
//! show up without `--nocapture`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sieve_core::equidistribution::*;
use sieve_core::homogenization::{corrector_energy, CapacityCache, CellModel};
use sieve_core::pcapacity::*;
use sieve_core::surface_geometry::*;
use sieve_lab::experiments::{mean_capacity_parallel, most_central_cell, tilted};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

// ---------------------------------------------------------------------------
// oracles

/// Extreme discrepancy by scanning every candidate interval. Over-capture
/// is maximal on closed intervals `[x_i, x_j]`, under-capture on open
/// intervals `(a, b)` with endpoints among `0`, the points and `1`.
fn brute_force_discrepancy(values: &[f64]) -> f64 {
    let mut xs: Vec<f64> = values.iter().map(|&v| if v == 0.0 { 1.0 } else { v }).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let nf = n as f64;
    // for each sorted position, the first index holding the same value
    // and one past the last
    let first = |x: f64| xs.partition_point(|&y| y < x);
    let past = |x: f64| xs.partition_point(|&y| y <= x);
    let first_of: Vec<usize> = xs.iter().map(|&x| first(x)).collect();
    let past_of: Vec<usize> = xs.iter().map(|&x| past(x)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            let count = past_of[j] - first_of[i];
            worst = worst.max(count as f64 / nf - (xs[j] - xs[i]));
        }
    }
    let mut ends = vec![0.0];
    ends.extend(xs.iter().copied());
    ends.push(1.0);
    let first_end: Vec<usize> = ends.iter().map(|&x| first(x)).collect();
    let past_end: Vec<usize> = ends.iter().map(|&x| past(x)).collect();
    for i in 0..ends.len() {
        for j in i + 1..ends.len() {
            let inside = first_end[j].saturating_sub(past_end[i]);
            worst = worst.max((ends[j] - ends[i]) - inside as f64 / nf);
        }
    }
    worst
}

/// `|Σ e^{2πi k s}|` by plain summation.
fn naive_sum(values: &[f64], k: u64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for &s in values {
        let a = 2.0 * PI * (k as f64 * s).fract();
        re += a.cos();
        im += a.sin();
    }
    (re * re + im * im).sqrt()
}

/// `Σ_cells |∇w|^p h^d` over every cell of the potential's grid, with
/// forward differences from the lower corner.
fn dirichlet_energy(field: &sieve_core::grid::GridField, p: f64) -> f64 {
    let grid = &field.grid;
    let (d, h, dims) = (grid.dim(), grid.h(), grid.dims().to_vec());
    let st = grid.strides().to_vec();
    let mut total = 0.0;
    let mut idx = vec![0usize; d];
    for node in 0..grid.len() {
        grid.multi_index(node, &mut idx);
        if idx.iter().zip(&dims).any(|(&i, &n)| i + 1 >= n) {
            continue;
        }
        let s: f64 = (0..d).map(|a| ((field.values[node + st[a]] - field.values[node]) / h).powi(2)).sum();
        total += s.powf(p / 2.0);
    }
    total * h.powi(d as i32)
}

fn ball(d: usize, r: f64) -> HoleShape {
    HoleShape::ball(d, r).unwrap()
}

fn cube(d: usize, side: f64) -> HoleShape {
    HoleShape::cube(d, side).unwrap()
}

fn solid(p: f64, outer: f64, set: HoleShape, h: f64, levels: usize) -> CapacityProblem {
    CapacityProblem::new(p, outer, CondenserSet::Solid(set), Resolution::new(h, levels).unwrap()).unwrap()
}

fn e3() -> Vec<f64> {
    vec![0.0, 0.0, 1.0]
}

// ---------------------------------------------------------------------------
// criteria

fn discrepancy_matches_brute_force() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for s in 0..500 {
        let n = rng.gen_range(1..=2000);
        let values: Vec<f64> = match s % 4 {
            // coarse lattice: many ties and exact zeros
            0 => (0..n).map(|_| rng.gen_range(0..64) as f64 / 64.0).collect(),
            1 => (0..n).map(|_| rng.gen::<f64>().powi(3)).collect(),
            _ => (0..n).map(|_| rng.gen::<f64>()).collect(),
        };
        let sample = ModOneSample::from_values(values.clone()).unwrap();
        let closed = discrepancy_exact(&sample).unwrap().value;
        worst = worst.max((closed - brute_force_discrepancy(&values)).abs());
    }
    verdict(worst <= 1e-12, format!("500 samples, max |closed - brute| = {worst:.2e} (tol 1e-12)"))
}

fn erdos_turan_holds() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut samples: Vec<Vec<f64>> = Vec::new();
    let para = ConvexSurface::paraboloid(2, AxisBox::new(vec![0.0], vec![2.0]).unwrap()).unwrap();
    let chart = AxisBox::new(vec![1.0], vec![2.0]).unwrap();
    for m in 3..=10 {
        samples.push(surface_sequence(&para, 0.5f64.powi(m), &chart).unwrap().values().to_vec());
    }
    for s in 0..92 {
        let n = rng.gen_range(1..=1000);
        samples.push(match s % 3 {
            0 => (0..n).map(|_| rng.gen_range(0..16) as f64 / 16.0).collect(),
            1 => (0..n).map(|j| (j as f64 * 0.5f64.sqrt()).fract()).collect(),
            _ => (0..n).map(|_| rng.gen::<f64>()).collect(),
        });
    }
    let (mut violations, mut mismatch) = (0, 0.0f64);
    for values in &samples {
        let sample = ModOneSample::from_values(values.clone()).unwrap();
        let d = discrepancy_exact(&sample).unwrap().value;
        let nf = values.len() as f64;
        let mut acc = 0.0;
        for n in 1..=100u64 {
            acc += naive_sum(values, n) / n as f64;
            let bound = 1.0 / n as f64 + acc / nf;
            if d > bound {
                violations += 1;
            }
            if matches!(n, 1 | 10 | 100) {
                let lib = erdos_turan_bound(&sample, n).unwrap();
                mismatch = mismatch.max((lib - bound).abs() / bound);
            }
        }
    }
    verdict(
        violations == 0 && mismatch <= 1e-9,
        format!("{} samples x n in 1..=100: {violations} violations, library bound off by {mismatch:.1e}", samples.len()),
    )
}

fn erdos_koksma_holds() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut violations, mut tightest) = (0, 0.0f64);
    for _ in 0..100 {
        // dyadic c keeps k c j² exact, so the phases are exact
        let c = rng.gen_range(1..=1 << 19) as f64 / (1u64 << 20) as f64;
        let k = rng.gen_range(1..=8u64);
        let n = rng.gen_range(10..=2000u64);
        let (a, b) = (1u64, n);
        let (mut re, mut im) = (0.0, 0.0);
        for j in a..=b {
            let phase = (k as f64 * c * (j * j) as f64).fract();
            re += (2.0 * PI * phase).cos();
            im += (2.0 * PI * phase).sin();
        }
        let modulus = (re * re + im * im).sqrt();
        let input = ExpSumBoundInput {
            k,
            derivative_at_a: 2.0 * c * k as f64 * a as f64,
            derivative_at_b: 2.0 * c * k as f64 * b as f64,
            rho: 2.0 * c * k as f64,
        };
        let bound = erdos_koksma_sum_bound(&input).unwrap();
        if modulus > bound {
            violations += 1;
        }
        tightest = tightest.max(modulus / bound);
    }
    verdict(violations == 0, format!("100 (c, k, N): {violations} violations, max sum/bound = {tightest:.3}"))
}

fn deviation_decays() -> Verdict {
    let g = ConvexSurface::paraboloid(2, AxisBox::new(vec![0.0], vec![2.0]).unwrap()).unwrap();
    let chart = AxisBox::new(vec![1.0], vec![2.0]).unwrap();
    let interval = ModInterval::new(0.0, 0.3).unwrap();
    let mut pairs = Vec::new();
    let mut oracle_pairs = Vec::new();
    let mut disagreement = 0.0f64;
    for m in 4..=12u32 {
        let eps = 0.5f64.powi(m as i32);
        let dev = theorem1_deviation(&g, eps, &chart, &interval).unwrap();
        // frac(g(εk)/ε) = (k² mod 2^{m+1}) / 2^{m+1} for k in [2^m, 2^{m+1})
        let modulus = 1u64 << (m + 1);
        let ks = (1u64 << m)..(1u64 << (m + 1));
        let total = ks.clone().count();
        let frac = |k: u64| (k * k % modulus) as f64 / modulus as f64;
        // the library reads I as (0, 0.3] on (0, 1]; the oracle counts
        // the half-open [0, 0.3) and the library's convention separately
        let closed_left = ks.clone().filter(|&k| frac(k) < 0.3).count();
        let open_left = ks.clone().filter(|&k| frac(k) > 0.0 && frac(k) <= 0.3).count();
        let dev_lib = (open_left as f64 / total as f64 - 0.3).abs();
        let dev_spec = (closed_left as f64 / total as f64 - 0.3).abs();
        disagreement = disagreement.max((dev.deviation - dev_lib).abs());
        pairs.push((eps, dev.deviation));
        oracle_pairs.push((eps, dev_spec));
    }
    let fit = decay_fit(&pairs).unwrap();
    let oracle_fit = decay_fit(&oracle_pairs).unwrap();
    let target = 1.0 / 3.0 - 0.05;
    verdict(
        fit.exponent >= target && oracle_fit.exponent >= target && disagreement <= 1e-15,
        format!(
            "alpha = {:.3} (oracle with [0, 0.3): {:.3}), need >= {target:.3}; recount differs by {disagreement:.1e}",
            fit.exponent, oracle_fit.exponent
        ),
    )
}

fn scaling_law_holds() -> Verdict {
    let cases = [
        (2usize, 1.3, 4.5, 0.25, ball(2, 1.0), "disk"),
        (2, 1.3, 4.5, 0.25, cube(2, 1.0), "square"),
        (3, 2.0, 4.0, 0.5, ball(3, 1.0), "ball"),
        (3, 2.0, 4.0, 0.5, cube(3, 1.0), "cube"),
    ];
    let mut worst = 0.0f64;
    for (d, p, outer, h, set, _) in cases {
        let problem = solid(p, outer, set, h, 2);
        for t in [0.5f64, 2.0] {
            let ratio = scaling_check(&problem, t).unwrap();
            worst = worst.max((ratio / t.powf(d as f64 - p) - 1.0).abs());
        }
    }
    verdict(worst <= 0.05, format!("ball and cube, (d,p) in {{(2,1.3),(3,2)}}, t in {{0.5,2}}: max rel err {worst:.2e} (tol 5%)"))
}

fn analytic_capacities(store: &mut Vec<(String, CapacityEstimate)>) -> Verdict {
    let (r, big) = (1.0, 8.0);
    let ball3 = solve_capacity(&solid(2.0, big, ball(3, r), 0.5, 3)).unwrap();
    let exact = 4.0 * PI / (1.0 / r - 1.0 / big);
    let ball_err = ball3.extrapolated / exact - 1.0;

    let a = 1.0;
    let disk = CondenserSet::Flat { slice: SliceSet::Disk { dim: 2, radius: a }, shift: vec![0.0, 0.0] };
    let disk = solve_capacity(&CapacityProblem::new(2.0, 4.0, disk, Resolution::new(0.25, 3).unwrap()).unwrap()).unwrap();
    let disk_err = disk.global / (8.0 * a) - 1.0;

    let detail = format!(
        "ball {:.4} vs {exact:.4} ({:+.2}%, tol 5%); disk {:.4} vs 8 ({:+.2}%, tol 10%)",
        ball3.extrapolated,
        100.0 * ball_err,
        disk.global,
        100.0 * disk_err
    );
    store.push(("ball r=1 in B_8".into(), ball3));
    store.push(("flat disk in B_4".into(), disk));
    verdict(ball_err.abs() <= 0.05 && disk_err.abs() <= 0.10, detail)
}

fn mean_capacity_of_ball() -> Verdict {
    let t = ball(3, 1.0);
    let options = MeanCapacityOptions::default();
    let s = 3f64.sqrt().recip();
    let values: Vec<f64> = [e3(), vec![s, s, s]]
        .iter()
        .map(|nu| mean_capacity_parallel(&t, nu, 2.0, &options).unwrap().value)
        .collect();
    let err = values.iter().map(|v| (v / (4.0 * PI) - 1.0).abs()).fold(0.0, f64::max);
    let spread = (values[0] - values[1]).abs() / values[0];
    verdict(
        err <= 0.10 && spread <= options.tolerance,
        format!(
            "nu=e3: {:.4}, nu=(1,1,1)/sqrt3: {:.4}, 4pi = {:.4}; max rel err {:.2}% (tol 10%), spread {spread:.1e} (tol {:.0e})",
            values[0],
            values[1],
            4.0 * PI,
            100.0 * err,
            options.tolerance
        ),
    )
}

fn tangent_gap_decreases() -> Verdict {
    let surface = ConvexSurface::paraboloid(2, AxisBox::new(vec![0.0], vec![1.0]).unwrap()).unwrap();
    let window = AxisBox::new(vec![0.4], vec![0.6]).unwrap();
    let mut gaps = Vec::new();
    for m in [4, 6, 8] {
        let sieve = SieveConfig::critical(0.5f64.powi(m), 2, 1.3, ball(2, 0.5)).unwrap();
        let (k, _) = most_central_cell(&surface, &sieve, &window).unwrap();
        gaps.push(tangent_approx_gap(&surface, &sieve, &k, Resolution::new(0.125, 2).unwrap()).unwrap().gap);
    }
    let pass = gaps.windows(2).all(|w| w[1] < w[0]);
    verdict(pass, format!("eps = 2^-4, 2^-6, 2^-8: gaps {}", gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>().join(", ")))
}

fn tilt_gap_shrinks() -> Verdict {
    let res = Resolution::new(0.125, 1).unwrap();
    let (mut cube_gaps, mut ball_rel) = (Vec::new(), 0.0f64);
    for delta in [0.2, 0.1, 0.05] {
        let nu2 = tilted(&e3(), delta);
        cube_gaps.push(plane_tilt_gap(&cube(3, 1.0), &e3(), &nu2, 2.0, &[0.0; 3], res).unwrap().gap);
        let b = plane_tilt_gap(&ball(3, 1.0), &e3(), &nu2, 2.0, &[0.0; 3], res).unwrap();
        ball_rel = ball_rel.max(b.gap.abs() / b.reference.global);
    }
    let monotone = cube_gaps.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        monotone && ball_rel <= 1e-8,
        format!("cube gaps over delta = 0.2, 0.1, 0.05: {cube_gaps:.4?}; central ball slices rel gap {ball_rel:.1e} (tol 1e-8)"),
    )
}

fn corrector_energy_limit() -> Verdict {
    // plane with irrational slopes over the unit square
    let slope = vec![2f64.sqrt() - 1.0, (3f64.sqrt() - 1.0) / 2.0];
    let area = (1.0 + slope.iter().map(|b| b * b).sum::<f64>()).sqrt();
    let surface = ConvexSurface::plane(slope, 0.1, AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()).unwrap();
    let q = AxisBox::new(vec![0.0, 0.0, -1.0], vec![1.0, 1.0, 3.0]).unwrap();
    let hole = ball(3, 1.0);
    let mut cache = CapacityCache::new(hole.clone(), 2.0, 0.2, MeanCapacityOptions::default()).unwrap();
    let mut densities = Vec::new();
    let mut last = 0.0;
    for m in [3, 4, 5] {
        let sieve = SieveConfig::critical(0.5f64.powi(m), 3, 2.0, hole.clone()).unwrap();
        let e = corrector_energy(&surface, &sieve, &q, CellModel::TangentSlices(&mut cache)).unwrap();
        densities.push(e.density());
        last = e.total;
    }
    let mean = cache.profiles().next().unwrap().mean_value();
    let err = last / (mean * area) - 1.0;
    // the ball's mean capacity is 4π for every normal
    let exact_err = last / (4.0 * PI * area) - 1.0;
    let spread = densities.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        / densities.iter().cloned().fold(f64::INFINITY, f64::min);
    verdict(
        err.abs() <= 0.15 && exact_err.abs() <= 0.15 && spread <= 1.25,
        format!(
            "total {last:.4} vs mean cap x area {:.4} ({:+.2}%) and 4pi x area ({:+.2}%), tol 15%; C = total/|Q| over eps = 2^-3..2^-5: {densities:.4?} (max/min {spread:.3}, tol 1.25)",
            mean * area,
            100.0 * err,
            100.0 * exact_err
        ),
    )
}

fn homogenization_converges() -> Verdict {
    let validated = sieve_lab::load(Path::new("fixture:homogenize-parabola")).unwrap();
    let artifacts = sieve_lab::compute(&validated, None).unwrap();
    let table = artifacts.get_table("convergence.csv").unwrap();
    let dist = table.numbers("lp_distance");
    let gap: Vec<f64> = table
        .numbers("energy_perforated")
        .iter()
        .zip(table.numbers("energy_hom"))
        .map(|(a, b)| (a - b).abs())
        .collect();
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    verdict(
        dist.len() == 3 && decreasing(&dist) && decreasing(&gap),
        format!("eps = 2^-3, 2^-4, 2^-5: L^p distance {dist:.4?}, energy gap {gap:.4?}"),
    )
}

fn solver_invariants(store: &[(String, CapacityEstimate)]) -> Verdict {
    let mut failures = Vec::new();
    let mut estimates: Vec<(String, CapacityEstimate)> = Vec::new();
    // nested templates solved on identical grids
    let families = [(2usize, 1.3, 4.5, 0.25), (3, 2.0, 4.0, 0.5)];
    for (d, p, outer, h) in families {
        let nested = [ball(d, 0.5), cube(d, 1.0), ball(d, 1.0)];
        let mut values: Vec<Vec<f64>> = Vec::new();
        for (i, set) in nested.into_iter().enumerate() {
            let est = solve_capacity(&solid(p, outer, set, h, 2)).unwrap();
            values.push(est.levels.iter().map(|l| l.value).collect());
            estimates.push((format!("d={d} p={p} nested#{i}"), est));
        }
        for w in values.windows(2) {
            if w[0].iter().zip(&w[1]).any(|(a, b)| a > b) {
                failures.push(format!("inclusion order broken for d={d} p={p}"));
            }
        }
    }
    let mut worst_energy = 0.0f64;
    let mut worst_far = f64::NEG_INFINITY;
    for (name, est) in estimates.iter().chain(store) {
        let (lo, hi) = (est.potential.min(), est.potential.max());
        if lo < 0.0 || hi > 1.0 {
            failures.push(format!("{name}: potential leaves [0, 1]: [{lo}, {hi}]"));
        }
        let far = farfield_bound_check(est);
        worst_far = worst_far.max(far.violation - far.tolerance);
        if far.violation > far.tolerance {
            failures.push(format!("{name}: far-field violation {} > {}", far.violation, far.tolerance));
        }
        let e = dirichlet_energy(&est.potential, est.p);
        let rel = (e - est.value).abs() / est.value;
        worst_energy = worst_energy.max(rel);
        if rel > 1e-10 {
            failures.push(format!("{name}: energy re-evaluation off by {rel:.1e}"));
        }
    }
    let n = estimates.len() + store.len();
    let detail = if failures.is_empty() {
        format!("{n} condensers: potentials in [0,1], inclusion order kept, far-field margin {worst_far:.2e}, energy recheck {worst_energy:.1e} (tol 1e-10)")
    } else {
        failures.join("; ")
    };
    verdict(failures.is_empty(), detail)
}

#[test]
fn acceptance() {
    let mut store = Vec::new();
    let mut results = Vec::new();
    let mut report = |n: usize, v: Verdict, started: Instant| {
        let line = format!(
            "criterion {n:>2}: {} {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            started.elapsed().as_secs_f64()
        );
        let _ = writeln!(std::io::stderr(), "{line}");
        results.push((n, v.pass));
    };
    let t = Instant::now();
    report(1, discrepancy_matches_brute_force(), t);
    let t = Instant::now();
    report(2, erdos_turan_holds(), t);
    let t = Instant::now();
    report(3, erdos_koksma_holds(), t);
    let t = Instant::now();
    report(4, deviation_decays(), t);
    let t = Instant::now();
    report(5, scaling_law_holds(), t);
    let t = Instant::now();
    report(6, analytic_capacities(&mut store), t);
    let t = Instant::now();
    report(7, mean_capacity_of_ball(), t);
    let t = Instant::now();
    report(8, tangent_gap_decreases(), t);
    let t = Instant::now();
    report(9, tilt_gap_shrinks(), t);
    let t = Instant::now();
    report(10, corrector_energy_limit(), t);
    let t = Instant::now();
    report(11, homogenization_converges(), t);
    let t = Instant::now();
    report(12, solver_invariants(&store), t);
    let failed: Vec<usize> = results.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
