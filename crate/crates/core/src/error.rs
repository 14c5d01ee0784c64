use std::io;
use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: interaction references unknown {kind} `{id}`")]
    DanglingReference {
        path: PathBuf,
        line: usize,
        kind: &'static str,
        id: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("cannot fit a model on an empty corpus")]
    EmptyCorpus,

    #[error("requested {requested} latent dimensions but the matrix only has rank {rank}")]
    RankTooLow { requested: usize, rank: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("user {user} has interacted with every post, no negatives to sample")]
    NoNegatives { user: usize },

    #[error(
        "non-finite objective at epoch {epoch}, batch {batch} (parameter norm {param_norm:.4e})"
    )]
    NonFinite {
        epoch: usize,
        batch: usize,
        param_norm: f64,
    },

    #[error("unknown {kind} index {index} (model was trained on {known})")]
    UnknownIndex {
        kind: &'static str,
        index: usize,
        known: usize,
    },

    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),

    #[error("cannot render report: {0}")]
    Report(String),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn write_text(path: &std::path::Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn create_dir(dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
