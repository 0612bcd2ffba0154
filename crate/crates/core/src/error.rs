//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

use crate::linalg::Vec3;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mask is empty: {0}")]
    EmptyMask(String),

    #[error("mask is not connected ({components} components)")]
    DisconnectedMask { components: usize },

    #[error("position ({} , {}, {}) is outside the field/grid bounds", .0.x, .0.y, .0.z)]
    OutOfBounds(Vec3),

    #[error("node {0} not found")]
    NodeNotFound(usize),

    #[error("edge {0} not found")]
    EdgeNotFound(usize),

    #[error("edge {0} ends at a leaf without an assigned radius")]
    MissingRadius(usize),

    #[error("edge {0} has a non-positive radius")]
    NonPositiveRadius(usize),

    #[error("node {child} already has a parent; cannot add a second incoming edge")]
    DuplicateParent { child: usize },

    #[error("graph contains a cycle")]
    GraphCycle,

    #[error("prebuilt tree has no nodes to attach terminals to")]
    NoAttachmentNodes,

    #[error("need at least {needed} data points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("configuration invalid:\n{0}")]
    Config(String),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), line, message: message.into() }
    }

    pub fn stage(stage: &'static str, source: Error) -> Self {
        Error::Stage { stage, source: Box::new(source) }
    }

    /// True for errors caused by an invalid configuration file, as opposed
    /// to runtime/domain failures. The CLI maps these to exit code 1.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
