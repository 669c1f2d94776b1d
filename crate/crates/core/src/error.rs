use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed delimited input: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("duplicate record id `{0}`")]
    DuplicateId(String),

    #[error("record `{0}` has an empty label")]
    EmptyLabel(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("class id {id} out of range for {num_classes} classes")]
    ClassIdOutOfRange { id: usize, num_classes: usize },

    #[error("duplicate vocabulary token `{token}` on line {line}")]
    DuplicateToken { token: String, line: usize },

    #[error("vocabulary is missing the special token `{0}`")]
    MissingSpecial(String),

    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenOutOfRange { id: u32, size: usize },

    #[error("vocabulary target size {target} cannot hold {required} required tokens")]
    VocabTooSmall { target: usize, required: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("malformed config: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

/// Attaches a pipeline stage name to errors.
pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
