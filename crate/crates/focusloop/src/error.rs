use std::path::PathBuf;

use focusloop_core::Trial;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] focusloop_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error("{path}, line {line}: {reason}")]
    Csv {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("{path}: file has no data rows")]
    EmptyRecording { path: PathBuf },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("source ended during {phase} after {} completed trials", completed.len())]
    PartialSession {
        phase: String,
        completed: Vec<Trial>,
    },

    #[error("need {needed} samples, source supplied {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("class imbalance: {concentration} concentration vs {relaxation} relaxation trials")]
    ClassImbalance {
        concentration: usize,
        relaxation: usize,
    },

    #[error("unsupported model file version {0}")]
    ModelVersion(u32),

    #[error("bad source spec `{0}` (expected osc:<port>, csv:<path> or synth:<config>)")]
    SourceSpec(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
