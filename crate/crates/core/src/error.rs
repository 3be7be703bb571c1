use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spin representation: two_j = {0} (need two_j >= 1)")]
    InvalidSpin(u32),

    #[error("region {inner} is not contained in {outer}")]
    NotSubset { inner: String, outer: String },

    #[error("operator dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("subset enumeration over {sites} sites exceeds the cap of {cap}")]
    SubsetCap { sites: usize, cap: usize },

    #[error("matrix shape {rows}x{cols} does not match region dimension {expected}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        expected: usize,
    },

    #[error("operator is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),

    #[error("element is not eta-free (residual {0:.3e})")]
    NotEtaFree(f64),

    #[error("multilocal and single-site potentials do not commute (residual {0:.3e})")]
    CommutationFailed(f64),

    #[error("root bracket grew beyond 2^60 without a sign change")]
    BracketOverflow,

    #[error("matrix is not a rotation (orthogonality {orth:.3e}, det {det})")]
    NotRotation { orth: f64, det: f64 },

    #[error("region of {size} sites is too large for {what}")]
    RegionTooLarge { size: usize, what: &'static str },

    #[error("expansion order {order} exceeds the cap of {cap}")]
    OrderCap { order: usize, cap: usize },

    #[error("empty region is not allowed here")]
    EmptyRegion,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
