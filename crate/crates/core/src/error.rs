use std::io;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("synthetic spec error: {0}")]
    Spec(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("label error: {0}")]
    Label(String),
    #[error("{0}")]
    Dataset(String),
    #[error("structural error: {0}")]
    Structural(String),
    #[error("length error: {0}")]
    Length(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("target error: {0}")]
    Target(String),
    #[error("interval error: {0}")]
    Interval(String),
    #[error("checkpoint compatibility error: {0}")]
    Compat(String),
    #[error("optimizer error: non-finite gradient in parameter `{0}`")]
    Optimizer(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Spec(_) | Error::Shape(_) | Error::Json(_) => 1,
            Error::Optimizer(_) | Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
