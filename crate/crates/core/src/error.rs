use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report. The variant determines the CLI exit
/// code (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent configuration or network spec.
    #[error("configuration error: {0}")]
    Config(String),

    /// API misuse: shape mismatch, backward before forward, bad arguments.
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed or unusable input data.
    #[error("data error: {0}")]
    Data(String),

    /// NaN/Inf encountered, or a loss diverged.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A single synthesis attempt could not produce an item; callers move on.
    #[error("generation skipped: {0}")]
    Skip(String),

    /// The blend would leave the image untouched (alpha is zero).
    #[error("degenerate blend: alpha {0} leaves the background unchanged")]
    DegenerateBlend(f64),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.into(),
            source,
        }
    }

    /// 1 usage/config, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) | Error::DegenerateBlend(_) => 1,
            Error::Data(_) | Error::Skip(_) | Error::Io { .. } | Error::Image { .. } | Error::Json(_) => 2,
            Error::Numeric(_) => 3,
        }
    }
}

macro_rules! usage {
    ($($arg:tt)*) => { $crate::error::Error::Usage(format!($($arg)*)) };
}
macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(format!($($arg)*)) };
}
macro_rules! data_err {
    ($($arg:tt)*) => { $crate::error::Error::Data(format!($($arg)*)) };
}
pub(crate) use {config_err, data_err, usage};
