//! Lattice geometry, spin matrices, local operators and model builders.

pub mod family;
pub mod geometry;
pub mod operator;
pub mod spin;

pub use family::{build_heisenberg, build_ising_staggered, InteractionFamily, ModelKind, Motif, MotifNorm, TIInteractionSpec};
pub use geometry::{Region, Site};
pub use operator::{operator_norm, operator_norm_with_cap, CMatrix, HermitianEigen, LocalOperator, C64, DIM_CAP};
pub use spin::{spin_matrices, SpinRep};
