//! Uniformity norms, corner and cube counting, spectral density increments and
//! energy-increment partitions on the residue grids `Z_N` and `Z_N x Z_N`.
//!
//! Coordinates are canonical residues in `[0, N)`; a grid point is written
//! `(k, m)` with `k` the horizontal coordinate and `m` the row. Densities and
//! deviations are exact rationals, complex fields use `f64`.

pub mod corners;
pub mod driver;
pub mod error;
pub mod fourier;
pub mod graph;
pub mod partition;
pub mod profile;
pub mod setfile;
pub mod tolerance;
pub mod uniformity;
pub mod verify;
pub mod zn;

pub use error::{Error, Result};
pub use zn::{Arity, ComplexField, GridBox, GridSet, LineSet, MarginalProfile, Rational};
