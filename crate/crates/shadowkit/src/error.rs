use std::path::PathBuf;

use shadowkit_core::io::IoError;
use shadowkit_core::{GeometryError, MaskError, RenderError, StaError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: invalid value: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("{path}: file not found")]
    MissingFile { path: PathBuf },
    #[error("{id}: {path} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimMismatch {
        id: String,
        path: PathBuf,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("unknown tuple '{0}'")]
    UnknownTuple(String),
    #[error("{id}: {source}")]
    Tuple {
        id: String,
        #[source]
        source: Box<PipelineError>,
    },
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sta(#[from] StaError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Metric(#[from] shadowkit_core::MetricError),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    pub fn in_tuple(self, id: &str) -> Self {
        match self {
            e @ PipelineError::Tuple { .. } => e,
            e => PipelineError::Tuple {
                id: id.to_string(),
                source: Box::new(e),
            },
        }
    }

    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            PipelineError::MissingFile { path }
        } else {
            PipelineError::File { path, source }
        }
    }

    /// Innermost error, skipping tuple tags.
    pub fn root(&self) -> &PipelineError {
        match self {
            PipelineError::Tuple { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

/// 1-based line of a byte offset.
pub(crate) fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}
