use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("mode {mode} out of range for {num_modes} modes")]
    ModeOutOfRange { mode: usize, num_modes: usize },

    #[error("duplicate mode index {0}")]
    DuplicateMode(usize),

    #[error("photon sector mismatch: {0}")]
    SectorMismatch(String),

    #[error("component index {index} out of range for {len} components")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("undeclared outcome pattern {0:?}")]
    UnknownOutcome(Vec<u8>),

    #[error("herald probability {0:e} vanishes; sensitivity is undefined")]
    VanishingProbability(f64),

    #[error("circuit has no outcome table; classify the measurement outcomes first")]
    MissingOutcomeTable,

    #[error("reference states are not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semi-definite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("matrix is not symmetric (deviation {0:e})")]
    NotSymmetric(f64),

    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("negative tolerance {0}")]
    NegativeTolerance(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{field}: {message}")]
    Config { field: String, message: String },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
