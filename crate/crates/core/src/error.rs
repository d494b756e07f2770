use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("unknown model `{name}`; available: {available}")]
    UnknownModel { name: String, available: String },

    #[error("trajectory diverged at step {step}")]
    Diverged { step: usize },

    #[error("degenerate tangent cocycle at step {step}: zero diagonal in re-orthonormalisation")]
    DegenerateCocycle { step: usize },

    #[error("singular Jacobian (det A = 0) at step {step}")]
    SingularJacobian { step: usize },

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("spectrum not converged: residual {residual:.3e} exceeds {threshold:.3e}")]
    NotConverged { residual: f64, threshold: f64 },

    #[error("model descriptor: {0}")]
    Descriptor(String),

    #[error("config: {0}")]
    Config(String),

    #[error("I/O: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
