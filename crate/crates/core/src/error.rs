use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} qubits, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported qubit count {0} (supported: {1})")]
    UnsupportedQubits(usize, &'static str),

    #[error("invalid Pauli string `{0}`")]
    InvalidPauli(String),

    #[error("measurement group `{0}` contains identity letters")]
    NotFullWeight(String),

    #[error("observable `{member}` is not resolved by measurement group `{group}`")]
    IncompatibleMember { member: String, group: String },

    #[error("vector of length {0} is not a valid {1}")]
    BadLength(usize, &'static str),

    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("matrix is not a valid density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("observable has {0} samples, at least 2 are required")]
    InsufficientSamples(u64),

    #[error("coefficient has imaginary residue {0:e}")]
    ComplexCoefficient(f64),

    #[error("decomposition has no measurement settings")]
    NoSettings,

    #[error("fit needs at least {needed} points with positive sigma, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("{curve} curve tail slope {slope:.4} is outside the 1/sqrt(n) regime")]
    NotInRegime { curve: String, slope: f64 },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
