//! Skew-corner-free sets in grids `[n]²` and tori `(Z/NZ)²`.
//!
//! A skew corner is a triple `(x, y), (x, y + d), (x + d, y')`; it is
//! nontrivial when `d ≠ 0`. The crate builds large sets avoiding
//! nontrivial skew corners, certifies them by exact counting, searches for
//! extremal sets in small ambients, and evaluates the Fourier-analytic
//! quantities behind the density-increment upper bound.

pub mod construct;
pub mod error;
pub mod fourier;
pub mod grid;
pub mod search;
pub mod setfile;
pub mod verify;

pub use error::{Check, Error, Result};
pub use grid::{Ambient, AmbientKind, GridSet, Witness};
