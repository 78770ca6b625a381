use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

/// Process exit status for a finished run whose monitors stayed within
/// their ceilings.
pub const EXIT_OK: i32 = 0;
/// Usage or configuration error.
pub const EXIT_CONFIG: i32 = 1;
/// Numerical failure: stability refusal, solver failure, non-finite state.
pub const EXIT_NUMERICAL: i32 = 2;
/// The run completed but an invariant monitor exceeded its ceiling.
pub const EXIT_CEILING: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing field `{0}`")]
    MissingField(String),

    #[error("invalid value for `{field}`: {message}")]
    InvalidField { field: String, message: String },

    #[error("invalid scenario: {0}")]
    Invalid(String),

    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid snapshot file {path}: {message}")]
    Snapshot { path: PathBuf, message: String },

    #[error("in `{context}`: {source}")]
    Core {
        context: String,
        #[source]
        source: wavepot_core::Error,
    },
}

impl CliError {
    pub fn invalid_field(field: &str, message: impl Into<String>) -> Self {
        CliError::InvalidField {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use wavepot_core::Error as E;
        match self {
            CliError::Core {
                source:
                    E::Unstable { .. }
                    | E::NoConvergence { .. }
                    | E::NonFinite { .. }
                    | E::IncompatibleRhs { .. }
                    | E::NotInKernel { .. }
                    | E::NonSolenoidal { .. }
                    | E::NonzeroMean { .. },
                ..
            } => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }
}

/// Attaches a short description of the failing step to core errors.
pub trait Context<T> {
    fn context(self, what: &str) -> Result<T>;
}

impl<T> Context<T> for std::result::Result<T, wavepot_core::Error> {
    fn context(self, what: &str) -> Result<T> {
        self.map_err(|source| CliError::Core {
            context: what.to_string(),
            source,
        })
    }
}
