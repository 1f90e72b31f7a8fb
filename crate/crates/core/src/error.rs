use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("duplicate axis name `{0}`")]
    DuplicateAxis(String),
    #[error("axis lists overlap on `{0}`")]
    OverlappingAxes(String),
    #[error("axis `{name}` has invalid size {size}")]
    InvalidCardinality { name: String, size: usize },
    #[error("axis mismatch: {0}")]
    AxisMismatch(String),
    #[error("expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("negative probability {value} at index {index}")]
    NegativeProbability { index: usize, value: f64 },
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("probabilities sum to {sum}, outside normalization tolerance")]
    NotNormalized { sum: f64 },
    #[error("column for input index {input} sums to {sum}, not 1")]
    NotStochastic { input: usize, sum: f64 },
    #[error("value {value} out of range for axis `{axis}` of size {size}")]
    ValueOutOfRange {
        axis: String,
        value: usize,
        size: usize,
    },
    #[error("zero-probability conditioning event")]
    ZeroProbabilityEvent,
    #[error("zero-probability post-selection (P(Gamma) = {p_gamma:e})")]
    ZeroProbabilityPostSelection { p_gamma: f64 },
    #[error("internal consistency violation: {0}")]
    InternalConsistency(String),

    #[error("unknown subsystem `{0}`")]
    UnknownSubsystem(String),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("density matrix trace is {0}, not 1")]
    NotUnitTrace(f64),
    #[error("negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),
    #[error("ensemble member {0} is not pure")]
    NotPure(usize),
    #[error("invalid rank {rank} for dimension {dim}")]
    InvalidRank { rank: usize, dim: usize },
    #[error("non-finite unitary parameters")]
    NonFiniteParams,

    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("post-selection collapsed for every searched candidate")]
    PostSelectionCollapse,
    #[error("E_D <= E_F + E_F' is only established without the communication arrow")]
    CommunicationNotAllowed,
}

pub type Result<T> = std::result::Result<T, Error>;
