//! Grid p-capacities.
//!
//! A condenser `(S, B_R)` is discretized on a centered cube grid: nodes
//! within `h/2` of `S` are fixed to 1, nodes with `|x| ≥ R` to 0, and the
//! remaining potential is minimized in `[0, 1]` (see [`crate::solver`]).
//! Values are discrete energies at `μ = 0`, refined over `h, h/2, …` with
//! Richardson extrapolation, and converted to the global capacity of `R^d`
//! by the radial far-field correction.

mod cells;
mod condenser;
mod maps;
mod slices;

pub use cells::{cell_capacity, plane_tilt_gap, tangent_approx_gap, CapacityGap, CellCapacity};
pub use condenser::{
    far_field_constant, farfield_bound_check, global_from_condenser, richardson, scaling_check, solve_capacity,
    CapacityEstimate, CapacityFlags, CapacityProblem, CondenserSet, FarFieldCheck, PlanePieceSet, RefinementLevel,
    Resolution, SurfacePatchSet,
};
pub use maps::{ChordToArc, CoordinateMap, RadialGauge};
pub use slices::{
    mean_capacity, mean_capacity_with, slice, slice_capacity, MeanCapacity, MeanCapacityOptions, PlaneSlice,
    SliceResolution,
};

#[cfg(test)]
mod tests;
