//! Uniform distribution mod 1 of the surface sequence `g(εk')/ε`.
//!
//! Intervals follow the half-open convention `(a, b] ⊂ (0, 1]`. Sample
//! values are stored in `[0, 1)`; a value of exactly `0` is read as the
//! point `1` of `(0, 1]` for every membership and discrepancy computation.
//! Comparisons are exact (no tolerance).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{ceil, cos, fabs, frac, log, pow, sin, sqrt, CompensatedSum, TAU};
use crate::surface_geometry::{lattice_points, AxisBox, ConvexSurface};
use crate::{Error, Result};

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub eps: f64,
    pub chart_box: Option<AxisBox>,
    pub generator: String,
}

/// A finite multiset of fractional parts in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModOneSample {
    values: Vec<f64>,
    provenance: Provenance,
}

impl ModOneSample {
    /// Wraps arbitrary reals by taking fractional parts.
    pub fn from_reals(reals: impl IntoIterator<Item = f64>, provenance: Provenance) -> Self {
        Self { values: reals.into_iter().map(frac).collect(), provenance }
    }

    /// Sample of values already in `[0, 1)`.
    pub fn new(values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if values.iter().any(|v| !(*v >= 0.0 && *v < 1.0)) {
            return Err(Error::invalid("values", "sample values must lie in [0, 1)"));
        }
        Ok(Self { values, provenance })
    }

    /// Anonymous sample (tests and fixtures).
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(values, Provenance { eps: f64::NAN, chart_box: None, generator: String::from("fixture") })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Values as points of `(0, 1]`, sorted ascending.
    pub fn sorted_unit_points(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.values.iter().map(|&x| to_unit_point(x)).collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

#[inline]
fn to_unit_point(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x
    }
}

/// The interval `(lo, hi]` with `0 <= lo <= hi <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ModInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::invalid("interval", "need 0 <= lo <= hi <= 1"));
        }
        Ok(Self { lo, hi })
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Membership of a sample value in `[0, 1)`, read mod 1 in `(0, 1]`.
    #[inline]
    pub fn contains(&self, value: f64) -> bool {
        let x = to_unit_point(value);
        self.lo < x && x <= self.hi
    }
}

/// `{frac(g(εk')/ε)}` over lattice points `εk' ∈ Q'` (half-open), in
/// lexicographic order of `k'`.
pub fn surface_sequence(surface: &ConvexSurface, eps: f64, chart_box: &AxisBox) -> Result<ModOneSample> {
    if !(eps > 0.0) {
        return Err(Error::invalid("epsilon", "must be positive"));
    }
    if chart_box.dim() != surface.dim() - 1 {
        return Err(Error::invalid("chart_box", "dimension differs from the surface chart"));
    }
    if !chart_box.is_subset_of(surface.domain()) {
        return Err(Error::invalid("chart_box", "must lie inside the surface chart"));
    }
    let mut x = vec![0.0; chart_box.dim()];
    let values = lattice_points(chart_box, eps)
        .into_iter()
        .map(|k| {
            for (xi, ki) in x.iter_mut().zip(&k) {
                *xi = eps * *ki as f64;
            }
            frac(surface.value(&x) / eps)
        })
        .collect();
    Ok(ModOneSample {
        values,
        provenance: Provenance { eps, chart_box: Some(chart_box.clone()), generator: String::from("surface") },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscrepancyMethod {
    ClosedForm,
    BruteForce,
}

/// Whether the witness interval holds too many points (closed `[lo, hi]`,
/// approached by `(lo - η, hi]`) or too few (open `(lo, hi)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessKind {
    OverCapture,
    UnderCapture,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyWitness {
    pub lo: f64,
    pub hi: f64,
    pub kind: WitnessKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyReport {
    pub value: f64,
    pub witness: DiscrepancyWitness,
    pub method: DiscrepancyMethod,
}

/// Extreme discrepancy `sup_I |A(I)/N - |I||` over intervals `I ⊂ (0, 1]`,
/// from the sorted points `x_(1) ≤ … ≤ x_(N)`:
/// `D_N = 1/N + max_j (j/N - x_(j)) - min_j (j/N - x_(j))`.
pub fn discrepancy_exact(sample: &ModOneSample) -> Result<DiscrepancyReport> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let xs = sample.sorted_unit_points();
    let n = xs.len() as f64;
    let (mut imax, mut imin) = (0, 0);
    let (mut vmax, mut vmin) = (f64::NEG_INFINITY, f64::INFINITY);
    for (j, &x) in xs.iter().enumerate() {
        let v = (j + 1) as f64 / n - x;
        if v > vmax {
            vmax = v;
            imax = j;
        }
        if v < vmin {
            vmin = v;
            imin = j;
        }
    }
    let value = (1.0 / n + vmax - vmin).min(1.0);
    let witness = if imin <= imax {
        DiscrepancyWitness { lo: xs[imin], hi: xs[imax], kind: WitnessKind::OverCapture }
    } else {
        DiscrepancyWitness { lo: xs[imax], hi: xs[imin], kind: WitnessKind::UnderCapture }
    };
    Ok(DiscrepancyReport { value, witness, method: DiscrepancyMethod::ClosedForm })
}

/// Star discrepancy over anchored intervals `(0, t]`:
/// `1/(2N) + max_j |x_(j) - (2j-1)/(2N)|`. Bounds `D_N` within a factor 2.
pub fn star_discrepancy(sample: &ModOneSample) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let xs = sample.sorted_unit_points();
    let n = xs.len() as f64;
    let worst = xs
        .iter()
        .enumerate()
        .map(|(j, &x)| fabs(x - (2.0 * j as f64 + 1.0) / (2.0 * n)))
        .fold(0.0, f64::max);
    Ok(1.0 / (2.0 * n) + worst)
}

/// `|Σ_j e^{2πi k s_j}|` with compensated accumulation of both components.
pub fn exponential_sum_modulus(values: &[f64], k: u64) -> f64 {
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for &s in values {
        // reduce k·s mod 1 before scaling by 2π
        let angle = TAU * frac(k as f64 * s);
        re.add(cos(angle));
        im.add(sin(angle));
    }
    let (r, i) = (re.value(), im.value());
    sqrt(r * r + i * i)
}

/// `|Σ_{j=a}^{b} e^{2πi k f(j)}|` for a phase function `f`.
pub fn exponential_sum_of<F: Fn(u64) -> f64>(f: F, a: u64, b: u64, k: u64) -> f64 {
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for j in a..=b {
        let angle = TAU * frac(k as f64 * frac(f(j)));
        re.add(cos(angle));
        im.add(sin(angle));
    }
    let (r, i) = (re.value(), im.value());
    sqrt(r * r + i * i)
}

/// Default harmonic count `n = ⌈N^{1/3}⌉`, balancing `1/n` against
/// `sqrt(n/N)`.
pub fn default_harmonics(sample_len: usize) -> u64 {
    (ceil(pow(sample_len as f64, 1.0 / 3.0) - 1e-9) as u64).max(1)
}

/// Erdős–Turán right-hand side `1/n + (1/N) Σ_{k=1}^n |Σ_j e^{2πi k s_j}| / k`.
pub fn erdos_turan_bound(sample: &ModOneSample, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n", "harmonic count must be at least 1"));
    }
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let big_n = sample.len() as f64;
    let mut acc = CompensatedSum::new();
    for k in 1..=n {
        acc.add(exponential_sum_modulus(sample.values(), k) / k as f64);
    }
    Ok(1.0 / n as f64 + acc.value() / big_n)
}

/// Inputs of the Erdős–Koksma estimate for `F_k = k f` on `[a, b]`:
/// `F_k'(a)`, `F_k'(b)` and a lower bound `ρ` of `F_k''`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpSumBoundInput {
    pub k: u64,
    pub derivative_at_a: f64,
    pub derivative_at_b: f64,
    pub rho: f64,
}

/// `(|F_k'(b) - F_k'(a)| + 2)(3 + 1/sqrt(ρ))`.
pub fn erdos_koksma_sum_bound(input: &ExpSumBoundInput) -> Result<f64> {
    if !(input.rho > 0.0) {
        return Err(Error::invalid("rho", "lower second-derivative bound must be positive"));
    }
    if input.k == 0 {
        return Err(Error::invalid("k", "harmonic index must be positive"));
    }
    Ok((fabs(input.derivative_at_b - input.derivative_at_a) + 2.0) * (3.0 + 1.0 / sqrt(input.rho)))
}

/// Outcome of a counting experiment `A_ε = #{s_j ∈ I}` against `N_ε |I|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub deviation: f64,
    pub count: usize,
    pub total: usize,
}

pub fn count_deviation(sample: &ModOneSample, interval: &ModInterval) -> Result<Deviation> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let count = sample.values().iter().filter(|&&v| interval.contains(v)).count();
    let total = sample.len();
    Ok(Deviation { deviation: fabs(count as f64 / total as f64 - interval.length()), count, total })
}

/// `|A_ε/N_ε - |I||` for the surface sequence over `Q'`.
pub fn theorem1_deviation(
    surface: &ConvexSurface,
    eps: f64,
    chart_box: &AxisBox,
    interval: &ModInterval,
) -> Result<Deviation> {
    let sample = surface_sequence(surface, eps, chart_box)?;
    count_deviation(&sample, interval)
}

/// Least-squares fit `log dev = α log ε + log C`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub exponent: f64,
    pub constant: f64,
    pub max_residual: f64,
    /// `ε` values whose deviation was exactly zero (excluded from the fit).
    pub dropped: Vec<f64>,
}

pub fn decay_fit(pairs: &[(f64, f64)]) -> Result<DecayFit> {
    let mut dropped = Vec::new();
    let mut pts = Vec::new();
    for &(eps, dev) in pairs {
        if !(eps > 0.0) {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        if dev == 0.0 {
            dropped.push(eps);
        } else if dev > 0.0 {
            pts.push((log(eps), log(dev)));
        } else {
            return Err(Error::invalid("deviation", "must be nonnegative"));
        }
    }
    if pts.len() < 3 {
        return Err(Error::TooFewPoints { usable: pts.len(), required: 3 });
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("epsilon", "all epsilon values coincide"));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = pts.iter().map(|p| fabs(p.1 - (slope * p.0 + intercept))).fold(0.0, f64::max);
    Ok(DecayFit { exponent: slope, constant: crate::math::exp(intercept), max_residual, dropped })
}

/// One 1-D fiber `{g(ε(k_1, k''))/ε : a ≤ k_1 ≤ b}` for fixed `k''`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fiber {
    pub transverse: Vec<i64>,
    pub sample: ModOneSample,
}

/// Splits the surface sequence over `Q' = [α, β) × Q''` into fibers along
/// the first chart axis, one per transverse lattice point `k''`.
pub fn fiber_decompose(surface: &ConvexSurface, eps: f64, chart_box: &AxisBox) -> Result<Vec<Fiber>> {
    let full = surface_sequence(surface, eps, chart_box)?;
    let n = chart_box.dim();
    let ranges = chart_box.lattice_ranges(eps);
    let fiber_len = (ranges[0].1 - ranges[0].0 + 1).max(0) as usize;
    if n == 1 || fiber_len == 0 {
        return Ok(vec![Fiber { transverse: Vec::new(), sample: full }]);
    }
    // lattice_points is lexicographic with the first axis slowest: regroup
    let points = lattice_points(chart_box, eps);
    let mut fibers: Vec<Fiber> = Vec::new();
    let transverse_count = points.len() / fiber_len;
    for t in 0..transverse_count {
        let transverse = points[t][1..].to_vec();
        let values: Vec<f64> = (0..fiber_len).map(|i| full.values()[i * transverse_count + t]).collect();
        fibers.push(Fiber {
            transverse,
            sample: ModOneSample {
                values,
                provenance: Provenance {
                    eps,
                    chart_box: Some(chart_box.clone()),
                    generator: String::from("surface-fiber"),
                },
            },
        });
    }
    Ok(fibers)
}


#[cfg(test)]
mod tests {
    use super::oracle::brute_force_discrepancy;
    use super::*;
    use proptest::prelude::*;

    fn line(lo: f64, hi: f64) -> AxisBox {
        AxisBox::new(vec![lo], vec![hi]).unwrap()
    }

    #[test]
    fn constant_surface_gives_constant_sequence() {
        let eps = 0.125;
        let s = ConvexSurface::plane(vec![0.0], 0.25 * eps, line(0.0, 2.0)).unwrap();
        let sample = surface_sequence(&s, eps, &line(0.0, 1.0)).unwrap();
        assert_eq!(sample.len(), 8);
        assert!(sample.values().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn parabola_with_unit_eps() {
        let s = ConvexSurface::paraboloid(2, line(0.0, 4.0)).unwrap();
        let sample = surface_sequence(&s, 1.0, &line(0.0, 4.0)).unwrap();
        assert_eq!(sample.values(), &[0.0, 0.5, 0.0, 0.5]);
    }

    #[test]
    fn paraboloid_sequence_matches_double_loop() {
        let eps = 1.0 / 16.0;
        let dom = AxisBox::cube(-1.0, 3.0, 2).unwrap();
        let s = ConvexSurface::paraboloid(3, dom).unwrap();
        let q = AxisBox::new(vec![0.0, 0.5], vec![1.0, 1.0]).unwrap();
        let sample = surface_sequence(&s, eps, &q).unwrap();
        let mut direct = Vec::new();
        for i in 0..16 {
            for j in 8..16 {
                let (x, y) = (i as f64 / 16.0, j as f64 / 16.0);
                let v: f64 = (0.5 * (x * x + y * y)) / eps;
                direct.push(v - v.floor());
            }
        }
        assert_eq!(sample.values(), &direct[..]);
    }

    #[test]
    fn chart_box_outside_domain_is_rejected() {
        let s = ConvexSurface::paraboloid(2, line(0.0, 1.0)).unwrap();
        assert!(surface_sequence(&s, 0.1, &line(0.5, 1.5)).is_err());
    }

    #[test]
    fn evenly_spread_points() {
        let n = 8;
        let sample = ModOneSample::from_values((0..n).map(|j| j as f64 / n as f64).collect()).unwrap();
        let r = discrepancy_exact(&sample).unwrap();
        assert!((r.value - 0.125).abs() < 1e-15);
    }

    #[test]
    fn fully_clustered_points() {
        let sample = ModOneSample::from_values(vec![0.0; 5]).unwrap();
        assert_eq!(discrepancy_exact(&sample).unwrap().value, 1.0);
    }

    #[test]
    fn odd_tenths() {
        let sample = ModOneSample::from_values(vec![0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
        let r = discrepancy_exact(&sample).unwrap();
        assert!((r.value - 0.2).abs() < 1e-15);
        assert!((brute_force_discrepancy(&sample) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn empty_sample_is_an_error() {
        let sample = ModOneSample::from_values(Vec::new()).unwrap();
        assert_eq!(discrepancy_exact(&sample), Err(Error::EmptySample));
        assert!(erdos_turan_bound(&sample, 1).is_err());
    }

    #[test]
    fn witness_interval_realizes_the_discrepancy() {
        let sample = ModOneSample::from_values(vec![0.05, 0.1, 0.12, 0.6, 0.61, 0.95]).unwrap();
        let r = discrepancy_exact(&sample).unwrap();
        let n = sample.len() as f64;
        let pts = sample.sorted_unit_points();
        let w = r.witness;
        let realized = match w.kind {
            WitnessKind::OverCapture => {
                pts.iter().filter(|&&x| w.lo <= x && x <= w.hi).count() as f64 / n - (w.hi - w.lo)
            }
            WitnessKind::UnderCapture => {
                (w.hi - w.lo) - pts.iter().filter(|&&x| w.lo < x && x < w.hi).count() as f64 / n
            }
        };
        assert!((realized - r.value).abs() < 1e-15);
    }

    #[test]
    fn star_discrepancy_within_factor_two() {
        let sample = ModOneSample::from_values(vec![0.05, 0.1, 0.12, 0.6, 0.61, 0.95]).unwrap();
        let d = discrepancy_exact(&sample).unwrap().value;
        let ds = star_discrepancy(&sample).unwrap();
        assert!(ds <= d + 1e-15 && d <= 2.0 * ds + 1e-15);
    }

    #[test]
    fn erdos_turan_trivial_cases() {
        let zeros = ModOneSample::from_values(vec![0.0; 7]).unwrap();
        assert!((erdos_turan_bound(&zeros, 1).unwrap() - 2.0).abs() < 1e-14);
        let spread = ModOneSample::from_values((0..10).map(|j| j as f64 / 10.0).collect()).unwrap();
        assert!((erdos_turan_bound(&spread, 1).unwrap() - 1.0).abs() < 1e-14);
        assert!(erdos_turan_bound(&spread, 0).is_err());
    }

    #[test]
    fn erdos_koksma_substitutions() {
        let b = |dfa, dfb, rho| {
            erdos_koksma_sum_bound(&ExpSumBoundInput { k: 1, derivative_at_a: dfa, derivative_at_b: dfb, rho }).unwrap()
        };
        assert_eq!(b(1.5, 1.5, 1.0), 8.0);
        assert_eq!(b(0.0, 3.0, 0.25), 25.0);
        assert!(erdos_koksma_sum_bound(&ExpSumBoundInput { k: 1, derivative_at_a: 0.0, derivative_at_b: 1.0, rho: 0.0 })
            .is_err());
    }

    #[test]
    fn erdos_koksma_holds_for_sqrt2_parabola() {
        let c = 2f64.sqrt();
        let sum = exponential_sum_of(|j| c * (j * j) as f64, 1, 200, 1);
        let bound = erdos_koksma_sum_bound(&ExpSumBoundInput {
            k: 1,
            derivative_at_a: 2.0 * c,
            derivative_at_b: 2.0 * c * 200.0,
            rho: 2.0 * c,
        })
        .unwrap();
        assert!(sum <= bound, "{sum} > {bound}");
    }

    #[test]
    fn full_and_empty_intervals() {
        let s = ConvexSurface::paraboloid(2, line(0.0, 3.0)).unwrap();
        let q = line(1.0, 2.0);
        let full = theorem1_deviation(&s, 1.0 / 64.0, &q, &ModInterval::new(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(full.deviation, 0.0);
        let sample = surface_sequence(&s, 1.0 / 64.0, &q).unwrap();
        let t = 0.123456789;
        assert!(sample.values().iter().all(|&v| v != t));
        let empty = theorem1_deviation(&s, 1.0 / 64.0, &q, &ModInterval::new(t, t).unwrap()).unwrap();
        assert_eq!(empty.deviation, 0.0);
    }

    #[test]
    fn counts_are_monotone_in_interval_end() {
        let s = ConvexSurface::paraboloid(2, line(0.0, 3.0)).unwrap();
        let q = line(1.0, 2.0);
        let mut prev = 0;
        for i in 0..=100 {
            let dev = theorem1_deviation(&s, 1.0 / 128.0, &q, &ModInterval::new(0.0, i as f64 / 100.0).unwrap()).unwrap();
            assert!(dev.count >= prev);
            prev = dev.count;
        }
        assert_eq!(prev, 128);
    }

    #[test]
    fn exact_power_laws_are_recovered() {
        let eps: Vec<f64> = (2..9).map(|m| 2f64.powi(-m)).collect();
        let pairs: Vec<(f64, f64)> = eps.iter().map(|&e| (e, e.powf(1.0 / 3.0))).collect();
        let fit = decay_fit(&pairs).unwrap();
        assert!((fit.exponent - 1.0 / 3.0).abs() < 1e-12);
        assert!(fit.max_residual < 1e-12);
        let pairs: Vec<(f64, f64)> = eps.iter().map(|&e| (e, 2.0 * e.sqrt())).collect();
        let fit = decay_fit(&pairs).unwrap();
        assert!((fit.exponent - 0.5).abs() < 1e-12 && (fit.constant - 2.0).abs() < 1e-12);
    }

    #[test]
    fn decay_fit_drops_zeros_and_needs_three_points() {
        let fit = decay_fit(&[(0.5, 0.0), (0.25, 0.1), (0.125, 0.05), (0.0625, 0.025)]).unwrap();
        assert_eq!(fit.dropped, vec![0.5]);
        assert!(matches!(decay_fit(&[(0.5, 0.1), (0.25, 0.0), (0.1, 0.05)]), Err(Error::TooFewPoints { usable: 2, .. })));
    }

    #[test]
    fn parabola_sweep_decays_at_least_cube_root() {
        let s = ConvexSurface::paraboloid(2, line(0.0, 3.0)).unwrap();
        let q = line(1.0, 2.0);
        let i = ModInterval::new(0.0, 0.3).unwrap();
        let pairs: Vec<(f64, f64)> = (4..=12)
            .map(|m| {
                let e = 2f64.powi(-m);
                (e, theorem1_deviation(&s, e, &q, &i).unwrap().deviation)
            })
            .collect();
        let fit = decay_fit(&pairs).unwrap();
        assert!(fit.exponent >= 1.0 / 3.0 - 0.05, "{fit:?}");
    }

    #[test]
    fn fibers_in_two_dimensions() {
        let s = ConvexSurface::paraboloid(2, line(0.0, 3.0)).unwrap();
        let q = line(1.0, 2.0);
        let fibers = fiber_decompose(&s, 1.0 / 32.0, &q).unwrap();
        assert_eq!(fibers.len(), 1);
        assert_eq!(fibers[0].sample, surface_sequence(&s, 1.0 / 32.0, &q).unwrap());
    }

    #[test]
    fn fibers_in_three_dimensions_conserve_counts() {
        let eps = 1.0 / 32.0;
        let dom = AxisBox::cube(-1.0, 3.0, 2).unwrap();
        let s = ConvexSurface::paraboloid(3, dom).unwrap();
        let q = AxisBox::cube(0.0, 1.0, 2).unwrap();
        let fibers = fiber_decompose(&s, eps, &q).unwrap();
        let full = surface_sequence(&s, eps, &q).unwrap();
        let n = full.len() as f64;
        assert!((fibers.len() as f64 - n.sqrt()).abs() <= 1.0);
        let mut a: Vec<f64> = fibers.iter().flat_map(|f| f.sample.values().iter().copied()).collect();
        let mut b = full.values().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        let i = ModInterval::new(0.2, 0.7).unwrap();
        let per_fiber: usize = fibers.iter().map(|f| count_deviation(&f.sample, &i).unwrap().count).sum();
        assert_eq!(per_fiber, count_deviation(&full, &i).unwrap().count);
    }

    proptest! {
        #[test]
        fn closed_form_matches_brute_force(values in proptest::collection::vec(0.0f64..1.0, 1..300)) {
            let sample = ModOneSample::from_values(values).unwrap();
            let exact = discrepancy_exact(&sample).unwrap().value;
            prop_assert!((exact - brute_force_discrepancy(&sample)).abs() < 1e-12);
            prop_assert!(exact >= 1.0 / sample.len() as f64 - 1e-15 && exact <= 1.0);
        }

        #[test]
        fn erdos_turan_dominates_discrepancy(values in proptest::collection::vec(0.0f64..1.0, 1..200), n in 1u64..40) {
            let sample = ModOneSample::from_values(values).unwrap();
            let d = discrepancy_exact(&sample).unwrap().value;
            prop_assert!(d <= erdos_turan_bound(&sample, n).unwrap());
        }

        #[test]
        fn clustered_samples_match_brute_force(grid in 2usize..20, picks in proptest::collection::vec(0usize..20, 1..100)) {
            // repeated values exercise ties
            let values: Vec<f64> = picks.iter().map(|&p| (p % grid) as f64 / grid as f64).collect();
            let sample = ModOneSample::from_values(values).unwrap();
            let exact = discrepancy_exact(&sample).unwrap().value;
            prop_assert!((exact - brute_force_discrepancy(&sample)).abs() < 1e-12);
        }
    }
}
