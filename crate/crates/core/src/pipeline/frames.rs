use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use super::reconstruct::ReconstructionOutcome;
use super::PipelineError;

/// Default sampling interval in frames (about 0.27 s at 60 fps).
pub const DEFAULT_FRAME_INTERVAL: usize = 16;

/// One video to annotate and the frames sampled from it so far.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoJob {
    pub video_path: PathBuf,
    /// `HAND_20231220_141254` style prefix for frame names.
    pub stem: String,
    pub fps: f64,
    /// Seconds.
    pub duration: f64,
    /// Current sampling interval Δf in frames; shrinks with each densification.
    pub frame_interval: usize,
    /// Strictly increasing frame indices.
    pub sampled_frames: Vec<usize>,
}

impl VideoJob {
    pub fn new(video_path: &Path, fps: f64, duration: f64, frame_interval: usize) -> Result<Self, PipelineError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(PipelineError::Precondition(format!("fps must be positive, got {fps}")));
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(PipelineError::Precondition(format!(
                "duration must be positive, got {duration}"
            )));
        }
        if frame_interval == 0 {
            return Err(PipelineError::Precondition("frame interval must be at least 1".into()));
        }
        let stem = video_path
            .file_stem()
            .and_then(|s| s.to_str())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| PipelineError::Precondition(format!("no file stem in {}", video_path.display())))?
            .to_string();
        let mut job = Self {
            video_path: video_path.to_path_buf(),
            stem,
            fps,
            duration,
            frame_interval,
            sampled_frames: Vec::new(),
        };
        job.sampled_frames = sample_frames(&job);
        Ok(job)
    }

    /// Number of decodable frames, i.e. indices in `[0, fps·duration)`.
    pub fn frame_count(&self) -> usize {
        (self.fps * self.duration).ceil() as usize
    }

    pub fn frame_seconds(&self, index: usize) -> f64 {
        index as f64 / self.fps
    }

    /// Frame time truncated to tenths of a second.
    pub fn frame_tenths(&self, index: usize) -> u64 {
        // the epsilon keeps exact multiples (e.g. 9/30 s) from rounding down
        (index as f64 * 10.0 / self.fps + 1e-9).floor() as u64
    }

    /// `<stem>_frame_<SSS.S>s.jpg`.
    pub fn frame_name(&self, index: usize) -> String {
        let t = self.frame_tenths(index);
        format!("{}_frame_{:03}.{}s.jpg", self.stem, t / 10, t % 10)
    }

    /// Adds densified frames and records the tighter spacing they were drawn at.
    pub fn merge_frames(&mut self, new_frames: &[usize], spacing: usize) {
        let all: BTreeSet<usize> = self.sampled_frames.iter().chain(new_frames).copied().collect();
        self.sampled_frames = all.into_iter().collect();
        self.frame_interval = spacing.max(1);
    }
}

/// `{0, Δf, 2Δf, …}` below `fps·duration`.
pub fn sample_frames(job: &VideoJob) -> Vec<usize> {
    let limit = job.fps * job.duration;
    (0..)
        .map(|k| k * job.frame_interval)
        .take_while(|i| (*i as f64) < limit)
        .collect()
}

/// Spacing used inside break gaps: a third of the current interval, at least 1.
pub fn densified_interval(frame_interval: usize) -> usize {
    (frame_interval / 3).max(1)
}

/// New frame indices inside every break gap, spaced by
/// [`densified_interval`], excluding frames already sampled.
pub fn densify_at_breaks(job: &VideoJob, outcome: &ReconstructionOutcome) -> Result<Vec<usize>, PipelineError> {
    if outcome.break_points.is_empty() {
        return Ok(Vec::new());
    }
    if job.frame_interval <= 1 {
        return Err(PipelineError::DensificationExhausted {
            video: job.stem.clone(),
            breaks: outcome.break_points.clone(),
        });
    }
    let step = densified_interval(job.frame_interval);
    let sampled: BTreeSet<usize> = job.sampled_frames.iter().copied().collect();
    let mut out = BTreeSet::new();
    for &(lo, hi) in &outcome.break_points {
        let mut i = lo + step;
        while i < hi {
            if !sampled.contains(&i) {
                out.insert(i);
            }
            i += step;
        }
    }
    Ok(out.into_iter().collect())
}
