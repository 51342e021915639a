use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the simulation and recovery pipeline.
///
/// The variants are grouped so that callers (the CLI in particular) can map
/// them onto a small set of exit classes with [`Error::class`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{what} {value} is outside the covered range [{start}, {end}]")]
    Range {
        what: &'static str,
        value: f64,
        start: f64,
        end: f64,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("singular configuration at point {index}: {message}")]
    Singularity { index: usize, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("frame {frame}: {source}")]
    Frame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse error classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Argument,
    Data,
    Numeric,
}

impl Error {
    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn in_frame(self, frame: usize) -> Self {
        Error::Frame {
            frame,
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Argument(_) | Error::Range { .. } => ErrorClass::Argument,
            Error::Singularity { .. } | Error::InsufficientData(_) => ErrorClass::Numeric,
            Error::Frame { source, .. } => source.class(),
            Error::Data(_)
            | Error::Format { .. }
            | Error::Io(_)
            | Error::Image(_)
            | Error::Json(_)
            | Error::Csv(_) => ErrorClass::Data,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Argument(_) => "argument",
            Error::Range { .. } => "range",
            Error::Data(_) => "data",
            Error::Format { .. } => "format",
            Error::Singularity { .. } => "singularity",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Frame { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Image(_) => "image",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
