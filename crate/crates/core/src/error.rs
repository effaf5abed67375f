use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("jump requested on a state with vanishing jump expectation")]
    UndefinedJump,
    #[error("jump probability {probability} per step exceeds 0.01; reduce dt")]
    StepTooLarge { probability: f64 },
    #[error("time step must be positive, got {0}")]
    InvalidTimeStep(f64),
    #[error("Fock cutoff {cutoff} too small: top-level population {population:e}")]
    CutoffViolation { cutoff: usize, population: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("grid mismatch: record has {record} samples, fields have {fields}")]
    GridMismatch { record: usize, fields: usize },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, looking through context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of the numerics (cutoff, NaN) rather than of input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::NonFinite(_)
                | Error::CutoffViolation { .. }
                | Error::UndefinedJump
                | Error::StepTooLarge { .. }
                | Error::ZeroNorm
                | Error::InvalidState(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
