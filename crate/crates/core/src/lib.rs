//! Numerics for a periodic sieve of holes cut by a convex surface.
//!
//! The crate is `no_std` (it needs `alloc`) and carries every algorithm:
//!
//! * [`surface_geometry`]: convex graph surfaces, hole templates, the sieve
//!   at critical hole size and the enumeration of holes the surface meets.
//! * [`equidistribution`]: the mod-1 sequence `g(εk')/ε`, exact
//!   discrepancy, Erdős–Turán and Erdős–Koksma bounds, decay fits.
//! * [`pcapacity`]: grid p-capacities of condensers, plane slices, mean
//!   directional capacity and the tangent-plane approximation gaps.
//! * [`homogenization`]: correctors, the limit surface measure, the
//!   perforated thin-obstacle problem and its homogenized counterpart.
//!
//! IO, configuration and the command line live in the `sieve-lab` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod math;

pub mod equidistribution;
pub mod grid;
pub mod homogenization;
pub mod pcapacity;
pub mod solver;
pub mod surface_geometry;

pub use error::{Error, Result};
