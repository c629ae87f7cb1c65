use std::path::PathBuf;

use thiserror::Error;

use crate::time::Timestamp;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown scenario keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("scenario parse error: {0}")]
    ScenarioParse(String),

    #[error("non-finite power delta: {0}")]
    NonFiniteAction(f64),

    #[error("empty log")]
    EmptyLog,

    #[error("need at least {needed} reports to aggregate, got {got}")]
    TooFewReports { needed: usize, got: usize },

    #[error("coefficient of variation undefined for {metric}: mean is 0 but std is {std}")]
    UndefinedCov { metric: String, std: f64 },

    #[error("no sources")]
    NoSources,

    #[error("mixed signal reports: {0}")]
    MixedReports(String),

    #[error("gap in series: missing timestamp {0}")]
    Gap(Timestamp),

    #[error("series too short: need {needed} contiguous steps, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("non-finite activation in {layer} at step {step}")]
    NonFiniteActivation { layer: &'static str, step: usize },

    #[error("training diverged at epoch {0}")]
    Diverged(usize),

    #[error("forecast horizon must be positive, got {0}")]
    BadHorizon(i64),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("model archive: {0}")]
    Archive(String),

    #[error("proactive controller requires a model archive")]
    MissingModel,

    #[error("run {run_id} failed: {source}")]
    RunFailed {
        run_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("replay of {manifest} diverged: {detail}")]
    ReplayMismatch { manifest: PathBuf, detail: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
