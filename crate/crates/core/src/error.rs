use thiserror::Error;

/// Errors produced by the simulation and optimization routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// The signal slope vanishes, so error propagation is undefined.
    #[error("singular point: {0}")]
    SingularPoint(String),
    #[error("degenerate state: {0}")]
    DegenerateState(String),
    #[error("no information: {0}")]
    NoInformation(String),
    /// An outcome with zero probability but non-zero probability derivative.
    #[error("singular outcome: {0}")]
    SingularOutcome(String),
    #[error("bracketing failed: {0}")]
    Bracketing(String),
    #[error("optimization failed: {0}")]
    OptimizationFailure(String),
}

impl Error {
    /// Short machine-readable tag used on the command line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::SingularPoint(_) => "singular-point",
            Error::DegenerateState(_) => "degenerate-state",
            Error::NoInformation(_) => "no-information",
            Error::SingularOutcome(_) => "singular-outcome",
            Error::Bracketing(_) => "bracketing",
            Error::OptimizationFailure(_) => "optimization-failure",
        }
    }

    /// Validation errors versus numerical failures.
    pub fn is_invalid_argument(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
