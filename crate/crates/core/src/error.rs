use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("spacing {spacing} does not tile a side of length {side}")]
    NonTilingSpacing { spacing: f64, side: f64 },

    #[error("domain diameter {0} is not below 1; the single layer operator is not elliptic")]
    DiameterTooLarge(f64),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("time step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("point ({0}, {1}) is not strictly exterior to the domain")]
    NotExterior(f64, f64),

    #[error("negative quadratic form {0}")]
    NegativeQuadraticForm(f64),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{0}")]
    Undefined(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code the command line front end reports for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Singular(_)
            | Error::NonFinite(_)
            | Error::Step { .. }
            | Error::NegativeQuadraticForm(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
