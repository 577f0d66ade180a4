use thiserror::Error;

/// Errors produced by the estimation, ingestion and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("series {series} needs at least {required} observations, got {actual}")]
    InsufficientHistory {
        series: String,
        required: usize,
        actual: usize,
    },

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("insufficient sample: {observations} observations for {parameters} parameters")]
    InsufficientSample {
        observations: usize,
        parameters: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical breakdown at alpha = {alpha:e}: {message}")]
    NumericalBreakdown { alpha: f64, message: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("data gap: series {series} has no observation {index} in {quarter} (needed by week {week})")]
    DataGap {
        series: String,
        quarter: String,
        index: usize,
        week: u8,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("replication {replication}: {source}")]
    Replication {
        replication: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures caused by floating-point breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NumericalBreakdown { .. } | Error::SingularDesign(_) => true,
            Error::Replication { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
