use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised across the estimation stack.
///
/// Each variant belongs to one [`ErrorKind`], which the command-line front end
/// maps onto a process exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("sample is empty: {0}")]
    EmptySample(String),

    #[error("segment {segment} has no observations")]
    DegenerateSegment { segment: usize },

    #[error("matrix is rank deficient (rank {rank} < {expected}); segments are not identifiable, consider re-segmenting")]
    Identifiability { rank: usize, expected: usize },

    #[error("matrix is ill-conditioned (condition number {condition:.3e})")]
    Conditioning { condition: f64 },

    #[error("prior concentration must be positive, got {value} for segment {segment}")]
    Prior { segment: usize, value: f64 },

    #[error("dimension {dimension} has zero variance and cannot be standardized")]
    Standardization { dimension: usize },

    #[error("clusters {first} and {second} have coincident centers")]
    CoincidentCenters { first: usize, second: usize },

    #[error("basket {basket} has non-positive total value")]
    DegenerateBasket { basket: String },

    #[error("optimizer did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse classification of [`Error`] used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Identifiability,
    NonConvergence,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Identifiability { .. } => ErrorKind::Identifiability,
            Error::NonConvergence { .. } => ErrorKind::NonConvergence,
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Input,
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
