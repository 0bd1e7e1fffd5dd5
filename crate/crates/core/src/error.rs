use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    /// Malformed or inconsistent input file, with the offending location.
    #[error("{file}: {message} (row {row}{})", column.as_ref().map(|c| format!(", column {c}")).unwrap_or_default())]
    Schema {
        file: String,
        row: usize,
        column: Option<String>,
        message: String,
    },

    #[error("{file}: non-finite value at row {row}, column {column}")]
    NonFinite {
        file: String,
        row: usize,
        column: String,
    },

    #[error("edge at row {row} references unknown node id {node_id}")]
    DanglingEdge { row: usize, node_id: u64 },

    #[error("row count mismatch: {left_name} has {left} nodes, {right_name} has {right}")]
    CountMismatch {
        left_name: String,
        left: usize,
        right_name: String,
        right: usize,
    },

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("training diverged at epoch {epoch}; last finite loss {last_finite_loss:?}")]
    Diverged {
        epoch: usize,
        last_finite_loss: Option<f64>,
    },

    #[error("all grid cells diverged")]
    GridDiverged,

    #[error("k = {k} exceeds the number of points ({n})")]
    TooManyClusters { k: usize, n: usize },

    #[error("perplexity {perplexity} infeasible for {n} points (must be below n/3)")]
    Perplexity { perplexity: f64, n: usize },

    #[error("empty series")]
    EmptySeries,

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error("unknown node id {0}")]
    UnknownNode(u64),

    #[error("incomplete session: {0}")]
    IncompleteSession(String),

    /// A pipeline stage failed; wraps the cause with the stage name.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
