use alloc::vec::Vec;

use super::hole::HoleShape;
use crate::math::pow;
use crate::{Error, Result};

/// `a_ε = ε^{d/(d-p+1)}`, the critical hole size.
pub fn critical_hole_size(eps: f64, d: usize, p: f64) -> Result<f64> {
    check_exponent(d, p)?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid("epsilon", "must be positive and finite"));
    }
    Ok(pow(eps, d as f64 / (d as f64 - p + 1.0)))
}

fn check_exponent(d: usize, p: f64) -> Result<()> {
    if d < 2 {
        return Err(Error::invalid("d", "dimension must be at least 2"));
    }
    if !(p > 1.0 && p < d as f64) {
        return Err(Error::invalid("p", "exponent must satisfy 1 < p < d"));
    }
    Ok(())
}

/// The sieve `T_ε = ∪_k (εk + a_ε T)` with lattice offset 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SieveConfig {
    eps: f64,
    hole_size: f64,
    d: usize,
    p: f64,
    hole: HoleShape,
}

impl SieveConfig {
    /// Sieve at the critical hole size.
    pub fn critical(eps: f64, d: usize, p: f64, hole: HoleShape) -> Result<Self> {
        let a = critical_hole_size(eps, d, p)?;
        Self::with_hole_size(eps, a, d, p, hole)
    }

    /// Sieve with an explicit hole size. Holes must stay strictly inside the
    /// ball `B_{ε/2}` of their cell: `a_ε · radius(T) < ε/2`.
    pub fn with_hole_size(eps: f64, hole_size: f64, d: usize, p: f64, hole: HoleShape) -> Result<Self> {
        check_exponent(d, p)?;
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::invalid("epsilon", "must be positive and finite"));
        }
        if !(hole_size > 0.0) {
            return Err(Error::invalid("hole_size", "must be positive"));
        }
        if hole.dim() != d {
            return Err(Error::invalid("hole", "template dimension differs from d"));
        }
        if hole_size * hole.bounding_radius() >= eps / 2.0 {
            return Err(Error::invalid("hole_size", "holes touch the cell boundary (a_eps * radius(T) >= eps/2)"));
        }
        Ok(Self { eps, hole_size, d, p, hole })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn hole_size(&self) -> f64 {
        self.hole_size
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn hole(&self) -> &HoleShape {
        &self.hole
    }

    /// Unit-scale cell radius `R_ε = ε / (2 a_ε)`.
    pub fn unit_cell_radius(&self) -> f64 {
        self.eps / (2.0 * self.hole_size)
    }

    pub fn hole_center(&self, k: &CellIndex) -> Vec<f64> {
        k.0.iter().map(|&v| self.eps * v as f64).collect()
    }

    /// Physical point → template coordinates of cell `k`.
    pub fn to_template(&self, k: &CellIndex, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&k.0).map(|(v, &kk)| (v - self.eps * kk as f64) / self.hole_size).collect()
    }
}

/// Lattice index `k = (k', k_d) ∈ Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellIndex(pub Vec<i64>);

impl CellIndex {
    pub fn chart(&self) -> &[i64] {
        &self.0[..self.0.len() - 1]
    }

    pub fn vertical(&self) -> i64 {
        self.0[self.0.len() - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_sizes() {
        assert!((critical_hole_size(0.01, 3, 2.0).unwrap() - 0.001).abs() < 1e-15);
        let v = critical_hole_size(0.25, 2, 1.3).unwrap();
        assert!((v - 0.25f64.powf(2.0 / 1.7)).abs() < 1e-15);
        assert!((v - 0.195747).abs() < 5e-6);
        assert_eq!(critical_hole_size(1.0, 5, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn critical_size_rejects_bad_inputs() {
        assert!(critical_hole_size(0.1, 3, 1.0).is_err());
        assert!(critical_hole_size(0.1, 3, 3.0).is_err());
        assert!(critical_hole_size(0.0, 3, 2.0).is_err());
        assert!(critical_hole_size(-0.1, 3, 2.0).is_err());
    }

    #[test]
    fn holes_touching_cell_boundary_are_rejected() {
        let ball = HoleShape::ball(3, 1.0).unwrap();
        assert!(SieveConfig::with_hole_size(0.1, 0.05, 3, 2.0, ball.clone()).is_err());
        assert!(SieveConfig::with_hole_size(0.1, 0.049, 3, 2.0, ball).is_ok());
    }

    #[test]
    fn critical_sieve_matches_formula() {
        let s = SieveConfig::critical(1.0 / 64.0, 2, 1.3, HoleShape::ball(2, 0.5).unwrap()).unwrap();
        assert_eq!(s.hole_size(), critical_hole_size(1.0 / 64.0, 2, 1.3).unwrap());
        assert!((s.unit_cell_radius() - 1.0 / (2.0 * (1.0f64 / 64.0).powf(0.3 / 1.7))).abs() < 1e-12);
    }
}
