use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(String),

    #[error("degenerate feature `{0}`: constant on the training partition")]
    DegenerateFeature(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite numeric input: {0}")]
    NumericInput(String),

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("undefined metric: every point excluded by the zero-denominator guard")]
    UndefinedMetric,

    #[error("no viable configuration: all {0} trials failed")]
    NoViableConfig(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("incomplete report: {0}")]
    IncompleteReport(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an error with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with any stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
