use std::collections::BTreeSet;
use std::path::Path;

use super::frames::{densified_interval, densify_at_breaks, VideoJob};
use super::reconstruct::{check_alignment, run_reconstruction, DEFAULT_ALIGNMENT_THRESHOLD};
use super::{write_atomic, write_model_atomic, PipelineError, SfmExecutor};
use crate::colmap_io::{write_camera2world_6dof, AnchorCorrespondence, SparseModel};
use crate::georeg::{
    anchor_correspondences, georegister_model_with, validate_path_in, PathValidation, RegistrationMethod,
    RegistrationReport,
};

pub const DEFAULT_MAX_DENSIFY_ROUNDS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotateOptions {
    pub alignment_threshold: f64,
    pub max_densify_rounds: usize,
    pub registration: RegistrationMethod,
    /// Plan raster `(width, height)` used for the in-bounds check of the path.
    pub plan_size: Option<(u32, u32)>,
}

impl Default for AnnotateOptions {
    fn default() -> Self {
        Self {
            alignment_threshold: DEFAULT_ALIGNMENT_THRESHOLD,
            max_densify_rounds: DEFAULT_MAX_DENSIFY_ROUNDS,
            registration: RegistrationMethod::LeastSquares,
            plan_size: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnnotateResult {
    pub model: SparseModel,
    pub report: RegistrationReport,
    pub path: PathValidation,
    pub reconstruction_calls: usize,
    /// Job state after the final round, including densified frames.
    pub job: VideoJob,
}

/// Sample, reconstruct, densify until aligned, then register onto the plan.
///
/// Writes `sparse/geo/`, `camera2world_6DoF.txt` and `path.csv` under
/// `project_dir`. Densified frames whose names collide with an existing
/// frame at 0.1 s resolution are skipped.
pub fn annotate_video(
    mut job: VideoJob,
    anchors: &[AnchorCorrespondence],
    executor: &dyn SfmExecutor,
    project_dir: &Path,
    opts: &AnnotateOptions,
) -> Result<AnnotateResult, PipelineError> {
    if anchors.is_empty() {
        return Err(PipelineError::Precondition(format!("{}: no anchors given", job.stem)));
    }
    if !(opts.alignment_threshold > 0.0 && opts.alignment_threshold <= 1.0) {
        return Err(PipelineError::Precondition(format!(
            "alignment threshold {} outside (0, 1]",
            opts.alignment_threshold
        )));
    }
    let mut calls = 0;
    let mut rounds = 0;
    let outcome = loop {
        let outcome = run_reconstruction(&job, project_dir, executor)?;
        calls += 1;
        if check_alignment(&outcome, job.sampled_frames.len(), opts.alignment_threshold) {
            break outcome;
        }
        if rounds == opts.max_densify_rounds {
            return Err(PipelineError::DensificationExhausted {
                video: job.stem.clone(),
                breaks: outcome.break_points.clone(),
            });
        }
        let added = densify_at_breaks(&job, &outcome)?;
        let names: BTreeSet<String> = job.sampled_frames.iter().map(|&i| job.frame_name(i)).collect();
        let mut fresh = BTreeSet::new();
        let added: Vec<usize> = added
            .into_iter()
            .filter(|&i| {
                let n = job.frame_name(i);
                !names.contains(&n) && fresh.insert(n)
            })
            .collect();
        log::info!(
            "{}: not aligned ({:.1}% registered), adding {} frames at {} break(s)",
            job.stem,
            100.0 * outcome.registered_fraction,
            added.len(),
            outcome.break_points.len()
        );
        let spacing = densified_interval(job.frame_interval);
        job.merge_frames(&added, spacing);
        rounds += 1;
    };

    let dominant = outcome
        .components
        .iter()
        .find(|c| c.image_names.len() as f64 / job.sampled_frames.len() as f64 >= opts.alignment_threshold)
        .expect("aligned outcome has a dominant component");
    // check anchors before any transform is applied
    anchor_correspondences(&dominant.model, anchors)?;
    let (model, report) = georegister_model_with(&dominant.model, anchors, &opts.registration)?;
    let (w, h) = opts.plan_size.unwrap_or((u32::MAX, u32::MAX));
    let path = validate_path_in(&model, w, h);

    write_model_atomic(&model, &project_dir.join("sparse").join("geo"))?;
    write_atomic(
        &project_dir.join("camera2world_6DoF.txt"),
        write_camera2world_6dof(&model).as_bytes(),
    )?;
    write_atomic(&project_dir.join("path.csv"), path.to_csv().as_bytes())?;
    Ok(AnnotateResult {
        model,
        report,
        path,
        reconstruction_calls: calls,
        job,
    })
}
