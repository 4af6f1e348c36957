//! File ingestion, configuration, and the `semdist` command implementations.
//!
//! The classifier boundary is a probability file: one image per line,
//! either dense CSV (`image_id,p1,p2,...,pN`) or sparse pairs
//! (`image_id class:prob class:prob ...` with 1-based class ids). Ground
//! truth is a label file (`image_id<TAB>label;label;...`). Both flavors of
//! the same data produce identical indices.

pub mod commands;
pub mod config;
pub mod ingest;

use thiserror::Error;

use semdist_core::{FeatureError, IndexError, MetricsError, SimilarityError, SynthError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("duplicate image id {0}")]
    DuplicateImageId(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code: 2 for malformed input files, 1 for everything
    /// else that fails.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } => 2,
            CliError::Index(IndexError::Parse { .. }) => 2,
            _ => 1,
        }
    }
}
