use alloc::vec;
use alloc::vec::Vec;
use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;
use crate::surface_geometry::{AxisBox, CellIndex, ConvexSurface, HoleShape, SieveConfig, SliceSet};

fn ball(d: usize, r: f64) -> CondenserSet {
    CondenserSet::Solid(HoleShape::ball(d, r).unwrap())
}

fn solve(p: f64, outer: f64, set: CondenserSet, h: f64, levels: usize) -> CapacityEstimate {
    solve_capacity(&CapacityProblem::new(p, outer, set, Resolution::new(h, levels).unwrap()).unwrap()).unwrap()
}

/// `∫ |∇w|^p` over the grid, recomputed from the nodal field.
fn recomputed_energy(field: &crate::grid::GridField, p: f64) -> f64 {
    let g = &field.grid;
    let d = g.dim();
    let st = g.strides();
    let h = g.h();
    let mut idx = vec![0usize; d];
    let mut total = 0.0;
    for n in 0..g.len() {
        g.multi_index(n, &mut idx);
        if (0..d).any(|i| idx[i] + 1 >= g.dims()[i]) {
            continue;
        }
        let s: f64 = (0..d).map(|i| ((field.values[n + st[i]] - field.values[n]) / h).powi(2)).sum();
        total += s.powf(p / 2.0);
    }
    total * h.powi(d as i32)
}

fn ball_condenser_2d(p: f64, r: f64, big: f64) -> f64 {
    let g = (p - 2.0) / (p - 1.0);
    let k = (2.0 - p) / (p - 1.0);
    2.0 * PI * k.powf(p - 1.0) / (r.powf(g) - big.powf(g)).powf(p - 1.0)
}

#[test]
fn empty_set_has_zero_capacity() {
    let e = solve(2.0, 4.0, CondenserSet::Empty { dim: 3 }, 0.5, 2);
    assert_eq!(e.extrapolated, 0.0);
    assert_eq!(e.global, 0.0);
    assert!(e.flags.empty_marking);
    assert!(e.potential.values.iter().all(|&v| v == 0.0));
}

#[test]
fn sets_thinner_than_the_grid_are_flagged() {
    let tiny = CondenserSet::Flat { slice: SliceSet::Disk { dim: 1, radius: 0.01 }, shift: vec![0.3] };
    let e = solve(1.5, 4.0, tiny, 0.25, 1);
    assert!(e.flags.coarse_grid);
}

#[test]
fn problem_validation() {
    let res = Resolution::new(0.5, 1).unwrap();
    assert!(CapacityProblem::new(3.0, 4.0, ball(3, 1.0), res).is_err());
    assert!(CapacityProblem::new(1.0, 4.0, ball(3, 1.0), res).is_err());
    assert!(CapacityProblem::new(2.0, 0.9, ball(3, 1.0), res).is_err());
    assert!(Resolution::new(0.0, 1).is_err());
    assert!(Resolution::new(0.1, 0).is_err());
    let near = solve(2.0, 2.0, ball(3, 1.0), 0.5, 1);
    assert!(near.flags.set_near_boundary);
}

#[test]
fn ball_in_the_plane_matches_the_radial_condenser() {
    let p = 1.3;
    let e = solve(p, 4.0, ball(2, 1.0), 0.25, 3);
    let oracle = ball_condenser_2d(p, 1.0, 4.0);
    assert!((e.extrapolated / oracle - 1.0).abs() < 0.03, "{} vs {oracle}", e.extrapolated);
    let global = ball_condenser_2d(p, 1.0, f64::INFINITY);
    assert!((e.global / global - 1.0).abs() < 0.03, "{} vs {global}", e.global);
}

#[test]
fn coarse_ball_in_space_is_close_to_newtonian_capacity() {
    let e = solve(2.0, 4.0, ball(3, 1.0), 0.25, 2);
    let oracle = 4.0 * PI / (1.0 - 0.25);
    assert!((e.extrapolated / oracle - 1.0).abs() < 0.05, "{} vs {oracle}", e.extrapolated);
    assert!((e.global / (4.0 * PI) - 1.0).abs() < 0.05);
}

#[test]
fn far_field_correction_is_exact_for_balls() {
    for (d, p) in [(3usize, 2.0), (2, 1.3), (3, 1.7)] {
        let r: f64 = 0.7;
        let big: f64 = 5.0;
        let k = (d as f64 - p) / (p - 1.0);
        let sigma = crate::math::unit_sphere_area(d);
        let gamma = (p - d as f64) / (p - 1.0);
        let cap = |outer: f64| sigma * k.powf(p - 1.0) / (r.powf(gamma) - outer.powf(gamma)).powf(p - 1.0);
        let global = global_from_condenser(cap(big), big, d, p);
        assert!((global / cap(f64::INFINITY) - 1.0).abs() < 1e-12);
    }
    assert_eq!(global_from_condenser(0.0, 3.0, 3, 2.0), 0.0);
}

#[test]
fn potential_obeys_maximum_principle_and_energy_identity() {
    for (set, p) in [
        (ball(2, 1.0), 1.3),
        (CondenserSet::Solid(HoleShape::cube(2, 1.4).unwrap()), 1.7),
        (CondenserSet::Flat { slice: SliceSet::Disk { dim: 1, radius: 1.0 }, shift: vec![0.25] }, 1.5),
    ] {
        let e = solve(p, 4.0, set, 0.25, 1);
        assert!(e.potential.min() >= 0.0 && e.potential.max() <= 1.0);
        let again = recomputed_energy(&e.potential, p);
        assert!((again - e.value).abs() <= 1e-10 * e.value, "{again} vs {}", e.value);
    }
}

#[test]
fn capacity_is_monotone_under_inclusion() {
    let small = solve(1.5, 4.0, ball(2, 0.5), 0.25, 1);
    let large = solve(1.5, 4.0, ball(2, 0.7), 0.25, 1);
    let cube = solve(1.5, 4.0, CondenserSet::Solid(HoleShape::cube(2, 1.4).unwrap()), 0.25, 1);
    assert!(small.value <= large.value);
    assert!(large.value <= cube.value);
}

#[test]
fn potential_stays_below_the_far_field_barrier() {
    for (d, p, h) in [(2usize, 1.3, 0.125), (3, 2.0, 0.25)] {
        let e = solve(p, 6.0, ball(d, 1.0), h, 1);
        let check = farfield_bound_check(&e);
        assert!(check.violation <= check.tolerance, "{check:?}");
    }
}

#[test]
fn unit_scaling_is_exact_and_similar_grids_scale_by_the_law() {
    let base = CapacityProblem::new(1.3, 4.0, ball(2, 1.0), Resolution::new(0.25, 2).unwrap()).unwrap();
    assert_eq!(scaling_check(&base, 1.0).unwrap(), 1.0);
    for t in [0.5, 2.0] {
        let ratio = scaling_check(&base, t).unwrap();
        assert!((ratio / t.powf(0.7) - 1.0).abs() < 1e-6, "t = {t}: {ratio}");
    }
    let mapped = base.clone().with_map(CoordinateMap::Identity);
    assert!(mapped.scaled(2.0).is_ok());
    assert!(base.scaled(0.0).is_err());
}

#[test]
fn richardson_recovers_polynomial_limits() {
    let f = |h: f64| 3.0 + 0.7 * h * h;
    let (v, q) = richardson(&[f(0.4), f(0.2), f(0.1)]);
    assert!((v - 3.0).abs() < 1e-12);
    assert!((q.unwrap() - 2.0).abs() < 1e-9);
    let (v, q) = richardson(&[2.0, 1.5]);
    assert_eq!((v, q), (1.0, None));
    // erratic sequences fall back to first order
    let (v, q) = richardson(&[1.0, 2.0, 1.5]);
    assert_eq!((v, q), (1.0, None));
    assert_eq!(richardson(&[]), (0.0, None));
}

#[test]
fn slices_of_balls_and_cubes() {
    let b = HoleShape::ball(3, 1.0).unwrap();
    let nu = [0.0, 0.6, 0.8];
    let s = slice(&b, &nu, 0.6).unwrap();
    assert!((s.set.bounding_radius() - 0.8).abs() < 1e-12);
    assert!(slice(&b, &nu, 1.2).unwrap().set.is_empty());
    assert!(slice(&b, &[0.0, 0.0, 2.0], 0.0).is_err());
    let c = HoleShape::cube(3, 1.1).unwrap();
    let mid = slice(&c, &[0.0, 0.0, 1.0], 0.0).unwrap();
    assert!(mid.set.contains(&[0.54, -0.54]));
    assert!(!mid.set.contains(&[0.56, 0.0]));
    assert_eq!(slice_capacity(2.0, &slice(&b, &nu, 1.5).unwrap(), &SliceResolution::default()).unwrap(), 0.0);
}

#[test]
fn mean_capacity_quadrature_integrates_the_disk_profile() {
    // slices of the unit ball are disks of radius √(1−t²), capacity 8ρ
    let b = HoleShape::ball(3, 1.0).unwrap();
    let opts = MeanCapacityOptions::default();
    let eval = |ts: &[f64]| -> crate::Result<Vec<f64>> { Ok(ts.iter().map(|t| 8.0 * (1.0 - t * t).sqrt()).collect()) };
    let m = mean_capacity_with(&b, &[0.0, 0.0, 1.0], &opts, eval).unwrap();
    assert!((m.value / (4.0 * PI) - 1.0).abs() < 1e-3, "{}", m.value);
    assert_eq!(m.support, (-1.0, 1.0));
    assert!(m.table.windows(2).all(|w| w[0].0 < w[1].0));
}

#[test]
fn mean_capacity_reports_unresolved_integrands() {
    let b = HoleShape::ball(2, 1.0).unwrap();
    let opts = MeanCapacityOptions { tolerance: 1e-12, max_depth: 2, ..Default::default() };
    let eval = |ts: &[f64]| -> crate::Result<Vec<f64>> {
        Ok(ts.iter().map(|t| if *t > 0.123 { 1.0 } else { 0.0 }).collect())
    };
    match mean_capacity_with(&b, &[1.0, 0.0], &opts, eval) {
        Err(crate::Error::Quadrature { table, .. }) => assert!(!table.is_empty()),
        other => panic!("expected a quadrature error, got {other:?}"),
    }
    let wrong_len = |_: &[f64]| -> crate::Result<Vec<f64>> { Ok(vec![1.0]) };
    assert!(mean_capacity_with(&b, &[1.0, 0.0], &opts, wrong_len).is_err());
}

#[test]
fn mean_capacity_in_the_plane_is_normal_invariant_for_disks() {
    // d = 2: slices are segments; the disk gives the same profile for every ν
    let b = HoleShape::ball(2, 1.0).unwrap();
    let opts = MeanCapacityOptions {
        tolerance: 5e-2,
        max_depth: 4,
        slices: SliceResolution { cells_per_radius: 4, levels: 1, outer_factor: 4.0 },
    };
    let a = mean_capacity(&b, &[1.0, 0.0], 1.5, &opts).unwrap();
    let c = mean_capacity(&b, &[0.6, 0.8], 1.5, &opts).unwrap();
    assert!(a.value > 0.0);
    assert!((a.value - c.value).abs() <= 1e-9 * a.value);
}

fn flat_sieve(eps: f64) -> (ConvexSurface, SieveConfig) {
    let dom = AxisBox::new(vec![-1.0], vec![1.0]).unwrap();
    let s = ConvexSurface::plane(vec![0.0], 0.0, dom).unwrap();
    let sieve = SieveConfig::critical(eps, 2, 1.5, HoleShape::ball(2, 0.5).unwrap()).unwrap();
    (s, sieve)
}

#[test]
fn cell_capacity_of_a_central_flat_cut() {
    let (s, sieve) = flat_sieve(1.0 / 8.0);
    let k = CellIndex(vec![0, 0]);
    let cell = cell_capacity(&s, &sieve, &k, Resolution::new(0.125, 1).unwrap()).unwrap();
    assert!(cell.physical > 0.0);
    let solid = solve(1.5, sieve.unit_cell_radius(), ball(2, 0.5), 0.125, 1);
    assert!(cell.unit.value <= solid.value);
    let scale = sieve.hole_size().powf(0.5);
    assert!((cell.physical - cell.unit.global * scale).abs() < 1e-14);
    assert!(matches!(cell_capacity(&s, &sieve, &CellIndex(vec![0, 3]), Resolution::new(0.125, 1).unwrap()), Err(crate::Error::CellNotHit)));
}

#[test]
fn tangent_gap_vanishes_for_planes() {
    let (s, sieve) = flat_sieve(1.0 / 8.0);
    let g = tangent_approx_gap(&s, &sieve, &CellIndex(vec![1, 0]), Resolution::new(0.125, 1).unwrap()).unwrap();
    assert!(g.gap <= 1e-9 * g.reference.global, "{}", g.gap);
}

#[test]
fn tilt_gap_vanishes_for_equal_normals_and_central_ball_slices() {
    let res = Resolution::new(0.25, 1).unwrap();
    let b = HoleShape::ball(2, 1.0).unwrap();
    let nu = [0.0, 1.0];
    let same = plane_tilt_gap(&b, &nu, &nu, 1.5, &[0.0, 0.0], res).unwrap();
    assert!(same.gap <= 1e-12 * same.reference.global);
    let tilted = [0.6, 0.8];
    let central = plane_tilt_gap(&b, &nu, &tilted, 1.5, &[0.0, 0.0], res).unwrap();
    assert!(central.gap <= 1e-9 * central.reference.global, "{}", central.gap);
    assert!(plane_tilt_gap(&b, &nu, &[0.0, 2.0], 1.5, &[0.0, 0.0], res).is_err());
    assert!(plane_tilt_gap(&b, &nu, &tilted, 1.5, &[2.0, 0.0], res).is_err());
}

#[test]
fn tilt_gap_grows_with_the_angle_for_squares() {
    let res = Resolution::new(0.125, 1).unwrap();
    let c = HoleShape::cube(2, 1.4).unwrap();
    let nu = [0.0, 1.0];
    let x = [0.1, 0.05];
    let gaps: Vec<f64> = [0.05f64, 0.1, 0.2]
        .iter()
        .map(|&a| plane_tilt_gap(&c, &nu, &[a.sin(), a.cos()], 1.5, &x, res).unwrap().gap)
        .collect();
    assert!(gaps[0] > 0.0);
    assert!(gaps[0] <= gaps[1] && gaps[1] <= gaps[2], "{gaps:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn potentials_stay_in_the_unit_interval(r in 0.3f64..1.2, p in 1.2f64..1.9, shift in -0.5f64..0.5) {
        let set = CondenserSet::Flat { slice: SliceSet::Disk { dim: 1, radius: r }, shift: vec![shift] };
        let e = solve(p, 4.0, set, 0.25, 1);
        prop_assert!(e.potential.min() >= 0.0);
        prop_assert!(e.potential.max() <= 1.0);
        prop_assert!(e.value > 0.0);
        let again = recomputed_energy(&e.potential, p);
        prop_assert!((again - e.value).abs() <= 1e-10 * e.value);
    }

    #[test]
    fn larger_balls_have_larger_capacity(r in 0.3f64..0.8, grow in 0.05f64..0.2, p in 1.2f64..1.9) {
        let a = solve(p, 4.0, ball(2, r), 0.25, 1);
        let b = solve(p, 4.0, ball(2, r + grow), 0.25, 1);
        prop_assert!(a.value <= b.value * (1.0 + 1e-9));
    }
}
