use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A `(group, sample id)` pair used when reporting gaps in a prediction run.
pub type SampleKey = (String, String);

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("incomplete cohort: {} missing (group, id) pairs, first: {}", missing.len(), format_keys(missing))]
    IncompleteCohort { missing: Vec<SampleKey> },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("transport error: {message}; {} missing (group, id) pairs: {}", missing.len(), format_keys(missing))]
    Transport {
        message: String,
        missing: Vec<SampleKey>,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
}

fn format_keys(keys: &[SampleKey]) -> String {
    const SHOWN: usize = 8;
    let mut out = keys
        .iter()
        .take(SHOWN)
        .map(|(g, id)| format!("({g}, {id})"))
        .collect::<Vec<_>>()
        .join(", ");
    if keys.len() > SHOWN {
        out.push_str(&format!(", ... {} more", keys.len() - SHOWN));
    }
    out
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Process exit code for this error: 2 for input/validation problems,
    /// 3 for model protocol or transport failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Protocol(_) | Error::Transport { .. } => 3,
            _ => 2,
        }
    }
}
