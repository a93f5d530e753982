use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid circuit spec: {0}")]
    InvalidSpec(String),

    #[error("expected {expected} parameter sets, got {got}")]
    ParamCount { expected: usize, got: usize },

    #[error("gate parameter {index} is not finite")]
    NonFiniteParam { index: usize },

    #[error("target region is empty")]
    EmptyTarget,

    #[error("site {site} is outside a lattice of {size} sites")]
    SiteOutOfRange { site: usize, size: usize },

    #[error("{engine} engine would need {needed} live qubits; the limit is {limit}")]
    WindowTooLarge {
        engine: &'static str,
        needed: usize,
        limit: usize,
    },

    #[error("qubit {0} is not live in this state")]
    DeadQubit(usize),

    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("operation requires a density matrix")]
    RequiresDensityMatrix,

    #[error("observable touches site {0}, which the state does not carry")]
    SupportOutsideTarget(usize),

    #[error("radius l0={ell0} cannot host the causal cone: {reason}")]
    AssignmentCollision { ell0: usize, reason: String },

    #[error("target does not fit the schedule: {0}")]
    TargetTooLarge(String),

    #[error("lattice coordinate {coord:?} outside layer range 0..{extent}")]
    CoordinateRange { coord: Vec<usize>, extent: usize },

    #[error("transfer window is not closed under coarse-graining: {0}")]
    WindowNotClosed(String),

    #[error("leading transfer eigenvalue has modulus {0}, above 1")]
    BrokenTransfer(f64),

    #[error("noise bound diverges for |lambda| = {0}")]
    Divergent(f64),

    #[error("objective returned {value} at iteration {iteration}")]
    NonFiniteObjective { iteration: usize, value: f64 },

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("{0} sites is too large for exact diagonalization")]
    TooLarge(usize),

    #[error("eigensolver failed to converge")]
    NoConvergence,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("term is not Hermitian: {0}")]
    NonHermitian(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
