//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by matrix construction, algebra computations, and
/// protocol execution.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("matrix entries must be finite")]
    NonFiniteEntries,

    #[error("matrix is not Hermitian: max |A - A^dag| = {deviation:.3e} exceeds {tol:.3e}")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("matrix is not unitary: max |U^dag U - I| = {deviation:.3e} exceeds {tol:.3e}")]
    NotUnitary { deviation: f64, tol: f64 },

    #[error("invalid tensor space: {context}")]
    InvalidSpace { context: String },

    #[error("factor index {index} out of range for a space of {n_factors} factors")]
    FactorOutOfRange { index: usize, n_factors: usize },

    #[error("cannot normalize a zero state vector")]
    ZeroStateVector,

    #[error("invalid quantum state: {context}")]
    InvalidState { context: String },

    #[error("eigendecomposition failed to converge")]
    EigenFailure,

    #[error(
        "operator algebra closure did not stabilize within {max_generations} generations \
         (dimension {dim_found} of {full_dim} so far)"
    )]
    ClosureNotStabilized {
        max_generations: usize,
        dim_found: usize,
        full_dim: usize,
    },

    #[error("closure requires at least one generator")]
    NoGenerators,

    #[error("entanglement entropy requires a pure global state (purity = {purity:.6})")]
    MixedGlobalState { purity: f64 },

    #[error("invalid protocol: {context}")]
    InvalidProtocol { context: String },

    #[error("branch step references record key \"{key}\" with no preceding measurement")]
    MalformedBranch { key: String },

    #[error("trajectory enumeration exceeded the branch cap of {cap}")]
    BranchCapExceeded { cap: usize },

    #[error("conditional flip requires qubit factors (control dim {control_dim}, target dim {target_dim})")]
    NonQubitFactor { control_dim: usize, target_dim: usize },

    #[error("state transfer verification requires a measurement-free protocol")]
    MeasurementInTransferProtocol,

    #[error("invalid pulse or spin parameters: {context}")]
    InvalidParams { context: String },

    #[error("propagation step count too small: doubling changed the result by {change:.3e} > {tol:.3e}")]
    StepCountTooSmall { change: f64, tol: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
