use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GgrError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GgrError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid argument `{field}`: {detail}")]
    InvalidArgument { field: &'static str, detail: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty tumor mask{0}")]
    EmptyMask(String),

    #[error("empty cohort after screening")]
    EmptyCohort,

    #[error("labels contain a single class")]
    SingleClass,

    #[error("unknown patient id `{0}`")]
    UnknownPatient(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("gene regressor {gene} failed: {source}")]
    GeneTraining {
        gene: String,
        #[source]
        source: Box<GgrError>,
    },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("repeat {repeat} fold {fold}: {source}")]
    Fold {
        repeat: usize,
        fold: usize,
        #[source]
        source: Box<GgrError>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("test-fold data reached training: {0}")]
    Leakage(String),
}

impl GgrError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GgrError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(what: &'static str, detail: impl Into<String>) -> Self {
        GgrError::Format {
            what,
            detail: detail.into(),
        }
    }

    pub fn invalid(field: &'static str, detail: impl Into<String>) -> Self {
        GgrError::InvalidArgument {
            field,
            detail: detail.into(),
        }
    }

    /// Short stable tag used by the CLI's machine-readable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            GgrError::Io { .. } => "io",
            GgrError::Format { .. } => "format",
            GgrError::Csv(_) => "csv",
            GgrError::InvalidArgument { .. } => "invalid_argument",
            GgrError::Shape(_) => "shape",
            GgrError::NonFinite(_) => "non_finite",
            GgrError::EmptyMask(_) => "empty_mask",
            GgrError::EmptyCohort => "empty_cohort",
            GgrError::SingleClass => "single_class",
            GgrError::UnknownPatient(_) => "unknown_patient",
            GgrError::Diverged { .. } => "diverged",
            GgrError::GeneTraining { .. } => "gene_training",
            GgrError::MissingInput(_) => "missing_input",
            GgrError::Fold { .. } => "fold",
            GgrError::Config(_) => "config",
            GgrError::Leakage(_) => "leakage",
        }
    }
}
