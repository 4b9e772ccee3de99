use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid decision space: {0}")]
    Space(String),

    #[error("grid of {size} universes exceeds the enumeration cap of {cap}; sample the space instead")]
    GridCap { size: u128, cap: u64 },

    #[error("data error: {0}")]
    Data(String),

    #[error("pipeline error: {0}")]
    Pipeline(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("metric error: {0}")]
    Metric(#[from] MetricError),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("store error: {0}")]
    Store(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Evaluation failures that are recorded per universe or per strategy
/// instead of aborting a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("empty evaluation set")]
    EmptyEvalSet,
    #[error("metric undefined: fewer than two groups with a defined rate")]
    MetricUndefined,
    #[error("evaluation labels contain a single class")]
    DegenerateLabels,
    #[error("length mismatch between labels, predictions and groups")]
    LengthMismatch,
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Data(_) | Error::Io(_) | Error::Csv(_) | Error::Store(_) | Error::Json(_) => 3,
            Error::Manifest(_) | Error::Space(_) | Error::GridCap { .. } => 3,
            Error::Pipeline(_) | Error::Model(_) | Error::Metric(_) | Error::Analysis(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Space(_) => "space",
            Error::GridCap { .. } => "grid-cap",
            Error::Data(_) => "data",
            Error::Pipeline(_) => "pipeline",
            Error::Model(_) => "model",
            Error::Metric(_) => "metric",
            Error::Analysis(_) => "analysis",
            Error::Manifest(_) => "manifest",
            Error::Store(_) => "store",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
