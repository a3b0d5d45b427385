use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    /// A field failed validation. `field` is a path such as `bilinear.q[2]`.
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("model infeasible: {0}")]
    ModelInfeasible(String),

    #[error("unstable policy: spectral radius of alpha*A is {rho}")]
    Unstable { rho: f64 },

    #[error("stability indeterminate after {iterations} power iterations (bounds [{lower}, {upper}])")]
    IndeterminateStability {
        iterations: usize,
        lower: f64,
        upper: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("theory violation: {0}")]
    TheoryViolation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no stable policy found: {0}")]
    NoStablePolicy(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("unsupported version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            actual,
        }
    }

    /// Prefixes the field path of validation errors, e.g. `q[1]` -> `positive_linear.q[1]`.
    pub fn in_field(self, prefix: &str) -> Self {
        match self {
            Error::Invalid { field, reason } => Error::Invalid {
                field: format!("{prefix}.{field}"),
                reason,
            },
            Error::DimensionMismatch {
                context,
                expected,
                actual,
            } => Error::DimensionMismatch {
                context: format!("{prefix}.{context}"),
                expected,
                actual,
            },
            other => other,
        }
    }

    /// Process exit code used by the command-line interface.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Unstable { .. } | Error::IndeterminateStability { .. } | Error::NoStablePolicy(_) => 4,
            Error::TheoryViolation(_) => 5,
            _ => 2,
        }
    }
}
