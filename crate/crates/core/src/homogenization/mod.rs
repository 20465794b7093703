//! Correctors, the limit surface measure and the two obstacle problems.
//!
//! The perforated problem imposes `v ≥ φ` exactly on the grid nodes
//! within `h/2` of `Γ_ε`; the homogenized one adds the penalty
//! `∫_Γ (φ − v)_+^p cap_{p,ν} dH^{d−1}` through a facet quadrature whose
//! capacities come from a cache keyed by quantized normals.
//!
//! Energies are reported at `μ = 0` for the returned fields.

mod corrector;
mod measure;
mod obstacle;

pub use corrector::{corrector_energy, hit_cells_in, CellEnergy, CellGeometry, CellModel, CorrectorEnergy};
pub use measure::{
    assemble, build_limit_measure, facet_geometry, facet_normals, CapacityCache, Facet, LimitMeasureTable, SliceProfile,
};
pub use obstacle::{
    check_sweep, convergence_experiment, convergence_row, marked_nodes, solve_homogenized, solve_perforated,
    ConvergenceRow, Domain, HoleSize, ObstacleProblemSpec, ObstacleSolution,
};
