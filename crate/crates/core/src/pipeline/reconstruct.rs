use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use super::executor::{SfmExecutor, SfmRequest, FRAME_LIST_FILE};
use super::frames::VideoJob;
use super::{io_err, PipelineError};
use crate::colmap_io::SparseModel;

pub const DEFAULT_ALIGNMENT_THRESHOLD: f64 = 0.95;

/// One connected reconstruction, as produced in `sparse/<k>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    /// Sampled frame names registered in this component.
    pub image_names: BTreeSet<String>,
    pub model: SparseModel,
    pub model_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionOutcome {
    /// Largest first; image name sets are disjoint.
    pub components: Vec<Component>,
    /// Share of sampled frames registered in any component.
    pub registered_fraction: f64,
    /// `(last frame before, first frame after)` for each discontinuity.
    pub break_points: Vec<(usize, usize)>,
}

impl ReconstructionOutcome {
    /// Builds an outcome from per-component frame sets over the sampled
    /// frames `sampled` (index, name). Frames claimed by an earlier (larger)
    /// component are removed from later ones.
    pub fn from_components(sampled: &[(usize, String)], mut comps: Vec<Component>) -> Self {
        let known: BTreeSet<&str> = sampled.iter().map(|(_, n)| n.as_str()).collect();
        for c in &mut comps {
            c.image_names.retain(|n| known.contains(n.as_str()));
        }
        comps.sort_by(|a, b| b.image_names.len().cmp(&a.image_names.len()));
        let mut seen = BTreeSet::new();
        for c in &mut comps {
            c.image_names.retain(|n| !seen.contains(n));
            seen.extend(c.image_names.iter().cloned());
        }
        comps.retain(|c| !c.image_names.is_empty());

        let owner: BTreeMap<&str, usize> = comps
            .iter()
            .enumerate()
            .flat_map(|(k, c)| c.image_names.iter().map(move |n| (n.as_str(), k)))
            .collect();
        let registered_fraction = if sampled.is_empty() {
            0.0
        } else {
            owner.len() as f64 / sampled.len() as f64
        };
        Self {
            break_points: break_points(sampled, &owner),
            components: comps,
            registered_fraction,
        }
    }

    /// Component share of the sampled frames.
    pub fn fraction_of(&self, component: usize, sampled_count: usize) -> f64 {
        if sampled_count == 0 {
            return 0.0;
        }
        self.components[component].image_names.len() as f64 / sampled_count as f64
    }
}

/// Walks the sampled frames in order and records a gap wherever the owning
/// component changes or unregistered frames intervene.
fn break_points(sampled: &[(usize, String)], owner: &BTreeMap<&str, usize>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut prev: Option<(usize, usize)> = None;
    let mut orphan_run = false;
    for (idx, name) in sampled {
        match owner.get(name.as_str()) {
            Some(&comp) => {
                match prev {
                    Some((p, pc)) if pc != comp || orphan_run => out.push((p, *idx)),
                    None if orphan_run => out.push((sampled[0].0, *idx)),
                    _ => {}
                }
                prev = Some((*idx, comp));
                orphan_run = false;
            }
            None => orphan_run = true,
        }
    }
    if orphan_run {
        let last = sampled.last().map(|(i, _)| *i).unwrap_or(0);
        let start = prev.map(|(p, _)| p).unwrap_or(sampled[0].0);
        if start < last {
            out.push((start, last));
        }
    }
    out
}

/// True iff exactly one component holds at least `threshold` of the sampled frames.
pub fn check_alignment(outcome: &ReconstructionOutcome, sampled_count: usize, threshold: f64) -> bool {
    (0..outcome.components.len())
        .filter(|&k| outcome.fraction_of(k, sampled_count) >= threshold)
        .count()
        == 1
}

fn numbered_subdirs(dir: &Path) -> Result<Vec<(u64, PathBuf)>, PipelineError> {
    let mut out = Vec::new();
    if !dir.exists() {
        return Ok(out);
    }
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name();
        if let Some(k) = name.to_str().and_then(|s| s.parse::<u64>().ok()) {
            if entry.path().is_dir() {
                out.push((k, entry.path()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Runs the executor over the sampled frames of `job` inside `project_dir`.
///
/// Previous `sparse/<k>` folders are cleared first so stale components never
/// leak into the outcome; `sparse/geo` is left alone.
pub fn run_reconstruction(
    job: &VideoJob,
    project_dir: &Path,
    executor: &dyn SfmExecutor,
) -> Result<ReconstructionOutcome, PipelineError> {
    if job.sampled_frames.is_empty() {
        return Err(PipelineError::Precondition(format!("{}: no sampled frames", job.stem)));
    }
    let image_dir = project_dir.join("images");
    let output_dir = project_dir.join("sparse");
    std::fs::create_dir_all(&image_dir).map_err(io_err(&image_dir))?;
    std::fs::create_dir_all(&output_dir).map_err(io_err(&output_dir))?;
    for (_, old) in numbered_subdirs(&output_dir)? {
        std::fs::remove_dir_all(&old).map_err(io_err(&old))?;
    }
    let frames: Vec<(usize, String)> = job
        .sampled_frames
        .iter()
        .map(|&i| (i, job.frame_name(i)))
        .collect();
    let request = SfmRequest {
        video: job.video_path.clone(),
        image_dir: image_dir.clone(),
        output_dir: output_dir.clone(),
        frames,
        log_path: project_dir.join("log.log"),
    };
    let list_path = image_dir.join(FRAME_LIST_FILE);
    std::fs::write(&list_path, request.frame_list()).map_err(io_err(&list_path))?;

    executor.run(&request).map_err(|e| PipelineError::ReconstructionFailed {
        msg: e.to_string(),
        log: request.log_path.clone(),
    })?;

    let mut comps = Vec::new();
    for (_, dir) in numbered_subdirs(&output_dir)? {
        let model = SparseModel::read_dir(&dir).map_err(|e| PipelineError::ReconstructionFailed {
            msg: format!("unreadable model in {}: {e}", dir.display()),
            log: request.log_path.clone(),
        })?;
        comps.push(Component {
            image_names: model.image_names(),
            model,
            model_dir: dir,
        });
    }
    Ok(ReconstructionOutcome::from_components(&request.frames, comps))
}
