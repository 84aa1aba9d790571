//! Pose-regression losses, error metrics, empirical CDFs and a retrieval
//! baseline localizer.

use std::collections::HashMap;
use std::fmt::Write as _;

use image::GrayImage;
use rayon::prelude::*;
use thiserror::Error;

use crate::colmap_io::PoseRecord;
use crate::geometry::{rotation_error_deg, translation_error, Pose6DoF, Quaternion, Vec3};

/// `β = e⁵`, the fixed orientation weight used for all floors.
pub const DEFAULT_BETA: f64 = 148.413_159_102_576_6;
pub const DEFAULT_S_X: f64 = 0.0;
pub const DEFAULT_S_Q: f64 = -5.0;
pub const DEFAULT_DESCRIPTOR_GRID: u32 = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no samples")]
    EmptySamples,
    #[error("no ground truth for prediction(s): {}", .0.join(", "))]
    MissingGroundTruth(Vec<String>),
    #[error("descriptor length {found} does not match {expected}")]
    DescriptorDimension { expected: usize, found: usize },
    #[error("retrieval database is empty")]
    EmptyDatabase,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("meters per pixel must be positive, got {0}")]
    InvalidScale(f64),
    #[error("descriptor grid must be at least 1 and no larger than the image ({0})")]
    InvalidGrid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    FixedBeta,
    Learnable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams {
    pub beta: f64,
    pub s_x: f64,
    pub s_q: f64,
    pub mode: LossMode,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            s_x: DEFAULT_S_X,
            s_q: DEFAULT_S_Q,
            mode: LossMode::FixedBeta,
        }
    }
}

fn unit(q: &Quaternion) -> Quaternion {
    q.scale(1.0 / q.norm())
}

/// Residual norms `(‖x̂ − x‖, ‖q̂ − q/‖q‖‖)`.
///
/// Only the ground truth quaternion is normalized; the prediction is used as
/// is, so `q̂ = −q` gives a nonzero orientation residual.
fn residuals(pred: &Pose6DoF, gt: &Pose6DoF) -> (Vec3, [f64; 4]) {
    let q = unit(&gt.orientation);
    let dq = [
        pred.orientation.w - q.w,
        pred.orientation.x - q.x,
        pred.orientation.y - q.y,
        pred.orientation.z - q.z,
    ];
    (pred.position - gt.position, dq)
}

fn norm4(v: &[f64; 4]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `‖x̂ − x‖ + β·‖q̂ − q/‖q‖‖`.
pub fn posenet_loss(pred: &Pose6DoF, gt: &Pose6DoF, params: &LossParams) -> f64 {
    let (dx, dq) = residuals(pred, gt);
    dx.norm() + params.beta * norm4(&dq)
}

/// `e^{−s_x}·‖x̂ − x‖ + e^{−s_q}·‖q̂ − q/‖q‖‖ + s_x + s_q`.
pub fn learnable_loss(pred: &Pose6DoF, gt: &Pose6DoF, params: &LossParams) -> f64 {
    let (dx, dq) = residuals(pred, gt);
    (-params.s_x).exp() * dx.norm() + (-params.s_q).exp() * norm4(&dq) + params.s_x + params.s_q
}

/// Dispatches on `params.mode`.
pub fn pose_loss(pred: &Pose6DoF, gt: &Pose6DoF, params: &LossParams) -> f64 {
    match params.mode {
        LossMode::FixedBeta => posenet_loss(pred, gt, params),
        LossMode::Learnable => learnable_loss(pred, gt, params),
    }
}

/// Partial derivatives of [`learnable_loss`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossGradient {
    pub position: Vec3,
    /// With respect to the predicted quaternion `(w, x, y, z)`.
    pub orientation: [f64; 4],
    pub s_x: f64,
    pub s_q: f64,
}

/// Analytic gradient of [`learnable_loss`]. At a zero residual the norm's
/// subgradient 0 is used.
pub fn learnable_loss_gradient(pred: &Pose6DoF, gt: &Pose6DoF, params: &LossParams) -> LossGradient {
    let (dx, dq) = residuals(pred, gt);
    let (nx, nq) = (dx.norm(), norm4(&dq));
    let (wx, wq) = ((-params.s_x).exp(), (-params.s_q).exp());
    LossGradient {
        position: if nx > 0.0 { dx * (wx / nx) } else { Vec3::zeros() },
        orientation: if nq > 0.0 {
            dq.map(|c| c * wq / nq)
        } else {
            [0.0; 4]
        },
        s_x: 1.0 - wx * nx,
        s_q: 1.0 - wq * nq,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanScale {
    meters_per_pixel: f64,
}

impl PlanScale {
    pub fn new(meters_per_pixel: f64) -> Result<Self, EvalError> {
        if meters_per_pixel.is_finite() && meters_per_pixel > 0.0 {
            Ok(Self { meters_per_pixel })
        } else {
            Err(EvalError::InvalidScale(meters_per_pixel))
        }
    }

    pub fn meters_per_pixel(&self) -> f64 {
        self.meters_per_pixel
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSample {
    pub image_path: String,
    /// Meters.
    pub trans_err: f64,
    /// Degrees.
    pub rot_err: f64,
}

/// Per-image errors of `preds` against `gts`, sorted by image path.
///
/// Translation error includes the z component.
pub fn compare_poses(
    preds: &[PoseRecord],
    gts: &[PoseRecord],
    scale: &PlanScale,
) -> Result<Vec<ErrorSample>, EvalError> {
    let by_path: HashMap<&str, &PoseRecord> = gts.iter().map(|g| (g.img_path.as_str(), g)).collect();
    let mut missing: Vec<String> = preds
        .iter()
        .filter(|p| !by_path.contains_key(p.img_path.as_str()))
        .map(|p| p.img_path.clone())
        .collect();
    if !missing.is_empty() {
        missing.sort();
        return Err(EvalError::MissingGroundTruth(missing));
    }
    let mut out: Vec<ErrorSample> = preds
        .par_iter()
        .map(|p| {
            let g = by_path[p.img_path.as_str()];
            ErrorSample {
                image_path: p.img_path.clone(),
                trans_err: scale.meters_per_pixel * translation_error(&p.t, &g.t),
                rot_err: rotation_error_deg(&unit(&p.q), &unit(&g.q)),
            }
        })
        .collect();
    out.sort_by(|a, b| a.image_path.cmp(&b.image_path));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub n: usize,
    pub mean_trans: f64,
    pub median_trans: f64,
    pub mean_rot: f64,
    pub median_rot: f64,
}

/// Mean and median of `values`; the median of an even count is the mean of
/// the two central order statistics.
pub fn mean_median(values: &[f64]) -> Result<(f64, f64), EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptySamples);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    Ok((mean, median))
}

pub fn summarize(samples: &[ErrorSample]) -> Result<EvalSummary, EvalError> {
    let trans: Vec<f64> = samples.iter().map(|s| s.trans_err).collect();
    let rot: Vec<f64> = samples.iter().map(|s| s.rot_err).collect();
    let (mean_trans, median_trans) = mean_median(&trans)?;
    let (mean_rot, median_rot) = mean_median(&rot)?;
    Ok(EvalSummary {
        n: samples.len(),
        mean_trans,
        median_trans,
        mean_rot,
        median_rot,
    })
}

impl EvalSummary {
    /// `0.52m, 5.50°` style cells.
    pub fn mean_cell(&self) -> String {
        format!("{:.2}m, {:.2}°", self.mean_trans, self.mean_rot)
    }

    pub fn median_cell(&self) -> String {
        format!("{:.2}m, {:.2}°", self.median_trans, self.median_rot)
    }

    pub fn to_csv(&self) -> String {
        format!(
            "n,mean_trans_m,median_trans_m,mean_rot_deg,median_rot_deg\n{},{:.6},{:.6},{:.6},{:.6}\n",
            self.n, self.mean_trans, self.median_trans, self.mean_rot, self.median_rot
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorAxis {
    Translation,
    Rotation,
}

/// Empirical CDF: one `(value, fraction ≤ value)` step per distinct value.
pub fn cdf(samples: &[ErrorSample], axis: ErrorAxis) -> Result<Vec<(f64, f64)>, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptySamples);
    }
    let mut v: Vec<f64> = samples
        .iter()
        .map(|s| match axis {
            ErrorAxis::Translation => s.trans_err,
            ErrorAxis::Rotation => s.rot_err,
        })
        .collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = frac,
            _ => out.push((*x, frac)),
        }
    }
    Ok(out)
}

pub fn samples_csv(samples: &[ErrorSample]) -> String {
    let mut out = String::from("image_path,trans_err_m,rot_err_deg\n");
    for s in samples {
        writeln!(out, "{},{:.6},{:.6}", s.image_path, s.trans_err, s.rot_err).unwrap();
    }
    out
}

/// Two-series CDF table: `axis,value,fraction`.
pub fn cdf_csv(trans: &[(f64, f64)], rot: &[(f64, f64)]) -> String {
    let mut out = String::from("axis,value,fraction\n");
    for (name, series) in [("translation_m", trans), ("rotation_deg", rot)] {
        for (v, f) in series {
            writeln!(out, "{name},{v:.6},{f:.6}").unwrap();
        }
    }
    out
}

/// Grid of mean luminances, shifted to zero mean and scaled to unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: Vec<f64>,
    /// The image had no luminance variation; `values` are all zero.
    pub degenerate: bool,
}

pub fn grayscale_grid_descriptor(image: &GrayImage, grid: u32) -> Result<Descriptor, EvalError> {
    let (w, h) = image.dimensions();
    if grid == 0 || w < grid || h < grid {
        return Err(EvalError::InvalidGrid(format!("grid {grid}, image {w}x{h}")));
    }
    let bounds = |i: u32, len: u32| (i * len / grid, (i + 1) * len / grid);
    let mut values = Vec::with_capacity((grid * grid) as usize);
    for gy in 0..grid {
        let (y0, y1) = bounds(gy, h);
        for gx in 0..grid {
            let (x0, x1) = bounds(gx, w);
            let mut sum = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += image.get_pixel(x, y).0[0] as f64;
                }
            }
            values.push(sum / ((y1 - y0) * (x1 - x0)) as f64);
        }
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter_mut().for_each(|v| *v -= mean);
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    // cell means are multiples of 1/area, so identical cells cancel exactly
    // up to rounding far below one gray level
    if norm < 1e-9 {
        return Ok(Descriptor {
            values: vec![0.0; values.len()],
            degenerate: true,
        });
    }
    values.iter_mut().for_each(|v| *v /= norm);
    Ok(Descriptor {
        values,
        degenerate: false,
    })
}

/// Pose of the nearest database descriptor, or for `k > 1` the averaged pose
/// of the `k` nearest (ties by database order).
pub fn baseline_localize(
    query: &[f64],
    db: &[(Vec<f64>, Pose6DoF)],
    k: usize,
) -> Result<Pose6DoF, EvalError> {
    if db.is_empty() {
        return Err(EvalError::EmptyDatabase);
    }
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    if let Some((d, _)) = db.iter().find(|(d, _)| d.len() != query.len()) {
        return Err(EvalError::DescriptorDimension {
            expected: query.len(),
            found: d.len(),
        });
    }
    let mut dist: Vec<(f64, usize)> = db
        .iter()
        .enumerate()
        .map(|(i, (d, _))| {
            let s: f64 = d.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            (s, i)
        })
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nearest: Vec<&Pose6DoF> = dist.iter().take(k).map(|(_, i)| &db[*i].1).collect();
    if nearest.len() == 1 {
        return Ok(*nearest[0]);
    }
    let position = nearest.iter().fold(Vec3::zeros(), |acc, p| acc + p.position) / nearest.len() as f64;
    let first = nearest[0].orientation;
    let sum = nearest.iter().fold(Quaternion::new(0.0, 0.0, 0.0, 0.0), |acc, p| {
        let q = if p.orientation.dot(&first) < 0.0 {
            -p.orientation
        } else {
            p.orientation
        };
        Quaternion::new(acc.w + q.w, acc.x + q.x, acc.y + q.y, acc.z + q.z)
    });
    let orientation = sum.normalize().unwrap_or(first);
    Ok(Pose6DoF::new(position, orientation))
}
