use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cholesky factorization failed: smallest eigenvalue {min_eigenvalue:e} is {sign}")]
    Cholesky {
        min_eigenvalue: f64,
        sign: &'static str,
    },

    #[error("newsvendor piece enumeration supports d <= {max}, got d = {d}")]
    TooManyPieces { d: usize, max: usize },

    #[error(
        "rejection sampling accepted {accepted} of {target} rows after {draws} draws \
         (acceptance rate {rate:.4})"
    )]
    AcceptanceShortfall {
        accepted: usize,
        target: usize,
        draws: usize,
        rate: f64,
    },

    #[error("no bulk certificate: gamma = {gamma} is below the smallest certifiable gamma {smallest}")]
    Uncertified { gamma: f64, smallest: f64 },

    #[error("solver: {0}")]
    Solver(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Wraps the error with a description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
