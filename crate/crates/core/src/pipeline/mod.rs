//! Per-video annotation loop and floor-level dataset assembly.
//!
//! A video is sampled, reconstructed by an external SfM executor, checked for
//! a single dominant component, densified around breaks when needed, and
//! finally registered onto the floor plan. Registered videos are then pooled
//! into train and test pose lists by recording date.

mod annotate;
mod dataset;
mod executor;
mod frames;
mod reconstruct;
mod split;

use std::io::Write;
use std::path::{Path, PathBuf};

pub use annotate::{annotate_video, AnnotateOptions, AnnotateResult, DEFAULT_MAX_DENSIFY_ROUNDS};
pub use dataset::{build_floor_dataset, DatasetSource, FloorDataset};
pub use executor::{CommandExecutor, ExecutorError, SfmExecutor, SfmRequest, FRAME_LIST_FILE};
pub use frames::{
    densified_interval, densify_at_breaks, sample_frames, VideoJob, DEFAULT_FRAME_INTERVAL,
};
pub use reconstruct::{
    check_alignment, run_reconstruction, Component, ReconstructionOutcome, DEFAULT_ALIGNMENT_THRESHOLD,
};
pub use split::{DatasetSplit, SplitSide};

use crate::colmap_io::FormatError;
use crate::georeg::RegistrationError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Executor(#[from] ExecutorError),
    #[error("reconstruction failed: {msg} (log: {})", log.display())]
    ReconstructionFailed { msg: String, log: PathBuf },
    #[error("densification exhausted for {video}: frame interval is already 1 with breaks at {breaks:?}")]
    DensificationExhausted { video: String, breaks: Vec<(usize, usize)> },
    #[error(transparent)]
    Registration(#[from] RegistrationError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to a temporary sibling of `path` and renames it into place,
/// so readers never observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(io_err(parent))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// Writes `model` into `dir` through a temporary sibling directory, replacing
/// any previous contents only once every file is complete.
pub fn write_model_atomic(model: &crate::colmap_io::SparseModel, dir: &Path) -> Result<(), PipelineError> {
    let parent = dir.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    let tmp = tempfile::Builder::new()
        .prefix(".model-")
        .tempdir_in(parent)
        .map_err(io_err(parent))?;
    model.write_dir(tmp.path())?;
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(io_err(dir))?;
    }
    let staged = tmp.keep();
    std::fs::rename(&staged, dir).map_err(io_err(dir))?;
    Ok(())
}
