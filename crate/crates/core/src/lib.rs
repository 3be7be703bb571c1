//! Subcritical inverse-temperature bounds for quantum and classical spin
//! lattice systems, with finite-volume checks of the ingredients behind them.

pub mod bounds;
pub mod classical;
pub mod error;
pub mod eta;
pub mod lattice;
pub mod norms;
pub mod par;
pub mod quadrature;
pub mod quantum;
pub mod random;
pub mod suites;

pub use error::{Error, Result};
