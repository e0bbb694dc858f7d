//! Numerical laboratory for the focusing quintic wave equation `□u = u⁵` on
//! ℝ³ with radial data, near the ground state `W`.

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod grid;
pub mod ground_state;
pub mod linalg;
pub mod modulation;
pub mod solver;
pub mod spectrum;

pub use error::{Error, Result};
