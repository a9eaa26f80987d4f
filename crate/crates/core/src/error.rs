use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("time {t} is outside the tabulated range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("operation requires a lorentzian-TCL rate profile")]
    NotLorentzian,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("Hilbert space dimension {0} exceeds the configured cap")]
    DimensionTooLarge(usize),
    #[error("trace drifted by {drift:e}; reduce the integration step")]
    TraceDrift { drift: f64 },
    #[error("replica count mismatch: {0} vs {1}")]
    ReplicaMismatch(usize, usize),
    #[error("replica count {0} is not supported (1 <= Q <= 5)")]
    UnsupportedReplicaCount(usize),
    #[error("Gram matrix is singular for D = {dim} < Q = {q}")]
    SingularGram { dim: f64, q: usize },
    #[error("lattice width must be even, got {0}")]
    OddWidth(usize),
    #[error("partition size {l_a} exceeds lattice width {width}")]
    PartitionTooLarge { l_a: usize, width: usize },
    #[error("rate schedule has {len} layers, {needed} required")]
    ScheduleTooShort { len: usize, needed: usize },
    #[error("need at least {needed} distinct points, found {found}")]
    InsufficientPoints { needed: usize, found: usize },
    #[error("mean energy is zero; the normalized slope is undefined")]
    ZeroMean,
    #[error("slope never falls below the threshold in the scanned range")]
    NoTransition,
}

pub type Result<T> = core::result::Result<T, Error>;
