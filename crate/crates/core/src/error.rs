use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The covariance matrix stayed numerically indefinite after jitter
    /// escalation. Usually means duplicated inputs or an extreme lengthscale.
    #[error("Cholesky factorization failed on a {dim}x{dim} covariance (last jitter {jitter:e})")]
    CholeskyFailure { dim: usize, jitter: f64 },

    #[error("log-likelihood at the current state is not finite ({0})")]
    NonFiniteLoglik(f64),

    #[error("slope preprocessing: every group had zero input variance")]
    DegenerateGroup,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("test {test}: {source}")]
    InTest {
        test: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: line {line}: {message}")]
    Parse { path: String, line: u64, message: String },

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_test(self, test: usize) -> Self {
        Error::InTest {
            test,
            source: Box::new(self),
        }
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::CholeskyFailure { .. } | Error::NonFiniteLoglik(_) => true,
            Error::AtIteration { source, .. } | Error::InTest { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
