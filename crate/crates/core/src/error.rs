use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed graph: cycle, self-loop, duplicate edge or out-of-range node.
    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("validation error: {0}")]
    Validation(String),

    /// Not enough positive radii to place the radial threshold.
    #[error("threshold error for subset {subset:?}: {message}")]
    Threshold { subset: Vec<usize>, message: String },

    #[error("no initial node: {0}")]
    NoInitialNode(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Graph(_) | Error::Validation(_) | Error::Parse(_) | Error::Json(_) => 2,
            Error::Threshold { .. } | Error::NoInitialNode(_) => 3,
            Error::Io(_) | Error::Csv(_) => 4,
        }
    }
}

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
