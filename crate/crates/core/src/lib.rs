//! Numerical laboratory for dyadic Haar shifts on finite grids.
//!
//! The unit cube `[0,1)^d` (`d ∈ {1,2}`) is resolved down to a finest level
//! `L`; every function, weight and operator is a finite object over the
//! resulting cells. The crate provides weights and their `A_p`/`A_∞`
//! characteristics, Haar shifts with their truncations and adjoints, a
//! sparse domination construction, the local testing constants and the
//! principal-cube machinery behind the two-weight estimate, together with
//! an experiment harness.

pub mod cli;
pub mod error;
pub mod function;
pub mod grid;
pub mod harness;
pub mod lerner;
pub mod shifts;
pub mod testing;
pub mod weights;

pub use error::{Error, Result};
pub use function::{CubeSums, GridFunction};
pub use grid::{Cube, Grid};
pub use shifts::{HaarShift, Orientation};
pub use weights::Weight;
