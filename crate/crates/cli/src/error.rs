use thiserror::Error;

/// Failure classes, each with its own process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Ingestion,
    Convergence,
    Inference,
    Usage,
}

impl ExitClass {
    pub fn code(self) -> i32 {
        match self {
            ExitClass::Ingestion => 2,
            ExitClass::Convergence => 3,
            ExitClass::Inference => 4,
            ExitClass::Usage => 5,
        }
    }
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub class: ExitClass,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            class: ExitClass::Usage,
            message: message.into(),
        }
    }

    pub fn ingestion(message: impl Into<String>) -> Self {
        CliError {
            class: ExitClass::Ingestion,
            message: message.into(),
        }
    }

    /// Classifies a core error raised while reading an input file.
    pub fn reading(path: &std::path::Path, err: ningarch::Error) -> Self {
        CliError::ingestion(format!("{}: {err}", path.display()))
    }
}

impl From<ningarch::Error> for CliError {
    fn from(err: ningarch::Error) -> Self {
        use ningarch::Error as E;
        let class = match &err {
            E::Ingest { .. } => ExitClass::Ingestion,
            E::NonConvergence { .. } | E::Filter { .. } => ExitClass::Convergence,
            E::Inference(_) | E::Numerical { .. } | E::ZeroVariance { .. } | E::UndefinedAcf(_) => {
                ExitClass::Inference
            }
            _ => ExitClass::Usage,
        };
        CliError {
            class,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::usage(format!("i/o error: {err}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::usage(format!("serialization error: {err}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
