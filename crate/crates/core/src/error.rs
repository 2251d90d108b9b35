use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error category, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid loudness function: {0}")]
    Parameter(String),
    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },
    #[error("frequency {0} Hz outside the measured range")]
    Range(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("feature column {0} has zero variance")]
    DegenerateFeature(String),
    #[error("labels contain a single class ({0}); at least two are required")]
    DegenerateLabels(String),
    #[error("{0}")]
    Undefined(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("unknown column {0:?}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Domain { .. }
            | Error::DegenerateFeature(_)
            | Error::Undefined(_)
            | Error::Parameter(_) => ErrorKind::Numeric,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: impl Into<String>) -> Error {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        Error::Parse {
            line,
            message: err.to_string(),
        }
    }
}
