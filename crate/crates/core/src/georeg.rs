//! Similarity-transform estimation and geo-registration of reconstructions
//! onto the floor plan.
//!
//! Floor-plan world axes: `x` = plan row (pixels down from the top edge),
//! `y` = plan column (pixels right of the left edge), `z` = the anchor's third
//! column. With `z` pointing out of the plan image towards the viewer this is
//! a right-handed frame.

use std::cmp::Ordering;
use std::fmt::Write as _;

use nalgebra::Matrix3;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::colmap_io::{parse_frame_name, AnchorCorrespondence, SparseModel};
use crate::geometry::{rotmat_to_quat, tvec_from_camera_center, RotMat3, SimilarityTransform, Vec3};
use crate::poi::FloorPlan;

/// A source point is considered degenerate (collinear) when the second
/// singular value of its covariance falls below this fraction of the first.
const DEGENERACY_RATIO: f64 = 1e-12;

/// Default inlier threshold for robust registration, in plan pixels.
pub const DEFAULT_RANSAC_THRESHOLD: f64 = 25.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistrationError {
    #[error("need at least {needed} correspondences, got {found}")]
    InsufficientAnchors { needed: usize, found: usize },
    #[error("source and destination lists differ in length ({src} vs {dst})")]
    LengthMismatch { src: usize, dst: usize },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("robust registration failed: best consensus has {best} inlier(s), need 3")]
    NoConsensus { best: usize },
    #[error("anchor image(s) not in model: {}", .0.join(", "))]
    MissingAnchors(Vec<String>),
}

/// One correspondence between a reconstruction point and a plan point.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    pub name: String,
    pub src: Vec3,
    pub dst: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationReport {
    pub transform: SimilarityTransform,
    pub per_anchor_residuals: Vec<(String, f64)>,
    /// RMS over inliers only.
    pub rms_residual: f64,
    pub inlier_flags: Vec<bool>,
}

impl RegistrationReport {
    fn build(transform: SimilarityTransform, corr: &[Correspondence], threshold: Option<f64>) -> Self {
        let residuals: Vec<(String, f64)> = corr
            .iter()
            .map(|c| (c.name.clone(), (transform.apply(&c.src) - c.dst).norm()))
            .collect();
        let flags: Vec<bool> = residuals
            .iter()
            .map(|(_, r)| threshold.is_none_or(|t| *r <= t))
            .collect();
        let (sum, n) = residuals
            .iter()
            .zip(&flags)
            .filter(|(_, f)| **f)
            .fold((0.0, 0usize), |(s, n), ((_, r), _)| (s + r * r, n + 1));
        Self {
            transform,
            per_anchor_residuals: residuals,
            rms_residual: if n == 0 { 0.0 } else { (sum / n as f64).sqrt() },
            inlier_flags: flags,
        }
    }

    pub fn inlier_count(&self) -> usize {
        self.inlier_flags.iter().filter(|f| **f).count()
    }
}

fn cmp_vec(a: &Vec3, b: &Vec3) -> Ordering {
    a.x.total_cmp(&b.x)
        .then(a.y.total_cmp(&b.y))
        .then(a.z.total_cmp(&b.z))
}

/// Least-squares similarity (Umeyama) minimizing `Σ‖dst_i − (s·R·src_i + t)‖²`.
///
/// Pairs are put in a canonical order before accumulation so the result does
/// not depend on the order the correspondences are given in.
pub fn estimate_similarity(src: &[Vec3], dst: &[Vec3]) -> Result<SimilarityTransform, RegistrationError> {
    if src.len() != dst.len() {
        return Err(RegistrationError::LengthMismatch {
            src: src.len(),
            dst: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(RegistrationError::InsufficientAnchors {
            needed: 3,
            found: src.len(),
        });
    }
    if src.iter().chain(dst).any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(RegistrationError::Degenerate("non-finite coordinate".into()));
    }
    let mut pairs: Vec<(&Vec3, &Vec3)> = src.iter().zip(dst).collect();
    pairs.sort_by(|a, b| cmp_vec(a.0, b.0).then_with(|| cmp_vec(a.1, b.1)));

    let n = pairs.len() as f64;
    let mu_src = pairs.iter().fold(Vec3::zeros(), |acc, (s, _)| acc + *s) / n;
    let mu_dst = pairs.iter().fold(Vec3::zeros(), |acc, (_, d)| acc + *d) / n;

    let mut cov = Matrix3::zeros();
    let mut src_cov = Matrix3::zeros();
    let mut src_var = 0.0;
    for (s, d) in &pairs {
        let sc = *s - mu_src;
        let dc = *d - mu_dst;
        cov += dc * sc.transpose();
        src_cov += sc * sc.transpose();
        src_var += sc.norm_squared();
    }
    cov /= n;
    src_cov /= n;
    src_var /= n;

    let mut sv = src_cov.symmetric_eigenvalues().as_slice().to_vec();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[0] <= 0.0 || sv[1] < DEGENERACY_RATIO * sv[0] {
        return Err(RegistrationError::Degenerate(
            "source points are coincident or collinear".into(),
        ));
    }

    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = svd.singular_values;
    let sign = if u.determinant() * v_t.determinant() < 0.0 { -1.0 } else { 1.0 };
    let s_diag = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, sign));
    let rot = u * s_diag * v_t;
    let scale = (d[0] + d[1] + sign * d[2]) / src_var;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(RegistrationError::Degenerate(format!(
            "estimated scale {scale} is not positive (destination points coincide?)"
        )));
    }
    let rot = RotMat3::new(rot).map_err(|e| RegistrationError::Degenerate(e.to_string()))?;
    let q = rotmat_to_quat(&rot);
    let translation = mu_dst - scale * q.rotate(&mu_src);
    SimilarityTransform::new(scale, q, translation)
        .map_err(|e| RegistrationError::Degenerate(e.to_string()))
}

fn split_pairs(corr: &[Correspondence]) -> (Vec<Vec3>, Vec<Vec3>) {
    corr.iter().map(|c| (c.src, c.dst)).unzip()
}

/// Plain least squares over all correspondences, wrapped in a report.
pub fn estimate_similarity_report(corr: &[Correspondence]) -> Result<RegistrationReport, RegistrationError> {
    let (src, dst) = split_pairs(corr);
    let t = estimate_similarity(&src, &dst)?;
    Ok(RegistrationReport::build(t, corr, None))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    /// Inlier threshold in destination (plan) units.
    pub threshold: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_RANSAC_THRESHOLD,
            max_iters: 500,
            seed: 0,
        }
    }
}

/// RANSAC over minimal 3-subsets followed by least-squares refits on the
/// consensus set until the inlier set stops changing.
pub fn estimate_similarity_robust(
    corr: &[Correspondence],
    params: &RansacParams,
) -> Result<RegistrationReport, RegistrationError> {
    if corr.len() < 4 {
        return Err(RegistrationError::InsufficientAnchors {
            needed: 4,
            found: corr.len(),
        });
    }
    let inliers_of = |t: &SimilarityTransform| -> (Vec<usize>, f64) {
        let mut idx = Vec::new();
        let mut sse = 0.0;
        for (i, c) in corr.iter().enumerate() {
            let r = (t.apply(&c.src) - c.dst).norm();
            if r <= params.threshold {
                idx.push(i);
                sse += r * r;
            }
        }
        (idx, sse)
    };
    let fit = |idx: &[usize]| {
        let src: Vec<Vec3> = idx.iter().map(|i| corr[*i].src).collect();
        let dst: Vec<Vec3> = idx.iter().map(|i| corr[*i].dst).collect();
        estimate_similarity(&src, &dst)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..params.max_iters {
        let subset = sample(&mut rng, corr.len(), 3).into_vec();
        let Ok(t) = fit(&subset) else { continue };
        let (idx, sse) = inliers_of(&t);
        let better = match &best {
            None => true,
            Some((b, bsse)) => idx.len() > b.len() || (idx.len() == b.len() && sse < *bsse),
        };
        if better {
            best = Some((idx, sse));
        }
    }
    let mut consensus = match best {
        Some((idx, _)) if idx.len() >= 3 => idx,
        other => {
            return Err(RegistrationError::NoConsensus {
                best: other.map_or(0, |(i, _)| i.len()),
            })
        }
    };
    let mut transform = fit(&consensus)?;
    for _ in 0..10 {
        let (idx, _) = inliers_of(&transform);
        if idx == consensus || idx.len() < 3 {
            break;
        }
        match fit(&idx) {
            Ok(t) => {
                transform = t;
                consensus = idx;
            }
            Err(_) => break,
        }
    }
    Ok(RegistrationReport::build(transform, corr, Some(params.threshold)))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RegistrationMethod {
    #[default]
    LeastSquares,
    Ransac(RansacParams),
}

/// Plan position of an anchor in world axes.
pub fn anchor_world_position(a: &AnchorCorrespondence) -> Vec3 {
    Vec3::new(a.plan_row, a.plan_col, a.plan_z)
}

/// Applies `t` to every 3D point and camera of `model`.
///
/// Camera centers map through `t`, viewing directions rotate by `t.rotation`:
/// `qvec' = qvec ∘ R⁻¹`, `tvec' = −R'·C'`.
pub fn transform_model(model: &SparseModel, t: &SimilarityTransform) -> SparseModel {
    let mut out = model.clone();
    let r_inv = t.rotation.conjugate();
    for img in out.images.values_mut() {
        let center = t.apply(&img.camera_center());
        let q = (img.qvec * r_inv).normalize().expect("unit qvec");
        img.qvec = q;
        img.tvec = tvec_from_camera_center(&q, &center);
    }
    for pt in out.points3d.values_mut() {
        pt.xyz = t.apply(&pt.xyz);
    }
    out
}

pub fn anchor_correspondences(
    model: &SparseModel,
    anchors: &[AnchorCorrespondence],
) -> Result<Vec<Correspondence>, RegistrationError> {
    let missing: Vec<String> = anchors
        .iter()
        .filter(|a| model.image_by_name(&a.image_name).is_none())
        .map(|a| a.image_name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(RegistrationError::MissingAnchors(missing));
    }
    Ok(anchors
        .iter()
        .map(|a| Correspondence {
            name: a.image_name.clone(),
            src: model.image_by_name(&a.image_name).unwrap().camera_center(),
            dst: anchor_world_position(a),
        })
        .collect())
}

pub fn georegister_model(
    model: &SparseModel,
    anchors: &[AnchorCorrespondence],
) -> Result<(SparseModel, RegistrationReport), RegistrationError> {
    georegister_model_with(model, anchors, &RegistrationMethod::LeastSquares)
}

pub fn georegister_model_with(
    model: &SparseModel,
    anchors: &[AnchorCorrespondence],
    method: &RegistrationMethod,
) -> Result<(SparseModel, RegistrationReport), RegistrationError> {
    let corr = anchor_correspondences(model, anchors)?;
    let report = match method {
        RegistrationMethod::LeastSquares => estimate_similarity_report(&corr)?,
        RegistrationMethod::Ransac(p) => estimate_similarity_robust(&corr, p)?,
    };
    Ok((transform_model(model, &report.transform), report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub image_name: String,
    /// Plan image x (column).
    pub plan_x: f64,
    /// Plan image y (row).
    pub plan_y: f64,
    pub frame_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathValidation {
    /// Camera positions in visit order.
    pub points: Vec<PathPoint>,
    pub in_bounds_fraction: f64,
}

pub const PATH_CSV_HEADER: &str = "image_name,plan_x,plan_y,frame_seconds";

impl PathValidation {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{PATH_CSV_HEADER}").unwrap();
        for p in &self.points {
            let secs = p.frame_seconds.map(|s| format!("{s:.1}")).unwrap_or_default();
            writeln!(out, "{},{:.8},{:.8},{}", p.image_name, p.plan_x, p.plan_y, secs).unwrap();
        }
        out
    }
}

/// Camera centers of a registered model projected onto the plan raster.
///
/// Points are ordered by frame time; names without a parseable frame time sort
/// last by name.
pub fn validate_path(model: &SparseModel, plan: &FloorPlan) -> PathValidation {
    validate_path_in(model, plan.width(), plan.height())
}

pub fn validate_path_in(model: &SparseModel, width: u32, height: u32) -> PathValidation {
    let mut points: Vec<PathPoint> = model
        .images
        .values()
        .map(|img| {
            let c = img.camera_center();
            PathPoint {
                image_name: img.name.clone(),
                plan_x: c.y,
                plan_y: c.x,
                frame_seconds: parse_frame_name(&img.name).ok().map(|f| f.frame_seconds()),
            }
        })
        .collect();
    points.sort_by(|a, b| match (a.frame_seconds, b.frame_seconds) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.image_name.cmp(&b.image_name)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.image_name.cmp(&b.image_name),
    });
    let inside = points
        .iter()
        .filter(|p| {
            p.plan_x >= 0.0 && p.plan_y >= 0.0 && p.plan_x < width as f64 && p.plan_y < height as f64
        })
        .count();
    let in_bounds_fraction = if points.is_empty() {
        1.0
    } else {
        inside as f64 / points.len() as f64
    };
    PathValidation {
        points,
        in_bounds_fraction,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Quaternion;
    use approx::assert_abs_diff_eq;

    fn pts() -> Vec<Vec3> {
        vec![
            Vec3::new(0.3, -1.2, 0.5),
            Vec3::new(2.0, 0.1, -0.7),
            Vec3::new(-1.1, 1.4, 0.2),
            Vec3::new(0.9, 0.8, 1.9),
            Vec3::new(-0.4, -0.6, -1.3),
        ]
    }

    #[test]
    fn identity_from_equal_sets() {
        let p = pts()[..3].to_vec();
        let t = estimate_similarity(&p, &p).unwrap();
        assert_abs_diff_eq!(t.scale, 1.0, epsilon = 1e-12);
        assert!(crate::geometry::rotation_error_deg(&t.rotation, &Quaternion::IDENTITY) < 1e-10);
        assert_abs_diff_eq!(t.translation, Vec3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn scale_and_shift() {
        let src = pts();
        let dst: Vec<Vec3> = src.iter().map(|p| 2.0 * p + Vec3::new(1.0, 0.0, 0.0)).collect();
        let t = estimate_similarity(&src, &dst).unwrap();
        assert_abs_diff_eq!(t.scale, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(t.translation, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-9);
        assert!(t.rotation.vector().norm() < 1e-9);
    }

    #[test]
    fn too_few_and_collinear() {
        let p = pts();
        assert!(matches!(
            estimate_similarity(&p[..2], &p[..2]),
            Err(RegistrationError::InsufficientAnchors { found: 2, .. })
        ));
        let line: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(matches!(
            estimate_similarity(&line, &p),
            Err(RegistrationError::Degenerate(_))
        ));
        assert!(matches!(
            estimate_similarity(&p, &p[..4]),
            Err(RegistrationError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn coplanar_sources_are_accepted() {
        // anchors on a single floor are coplanar
        let src: Vec<Vec3> = pts().iter().map(|p| Vec3::new(p.x, p.y, 0.0)).collect();
        let truth = SimilarityTransform::new(
            3.0,
            Quaternion::from_axis_angle(&Vec3::new(0.2, 1.0, -0.4), 2.1),
            Vec3::new(5.0, -2.0, 1.0),
        )
        .unwrap();
        let dst: Vec<Vec3> = src.iter().map(|p| truth.apply(p)).collect();
        let t = estimate_similarity(&src, &dst).unwrap();
        assert_abs_diff_eq!(t.scale, 3.0, epsilon = 1e-9);
        assert!(crate::geometry::rotation_error_deg(&t.rotation, &truth.rotation) < 1e-8);
    }

    #[test]
    fn validate_path_counts_out_of_bounds() {
        use crate::colmap_io::{CameraIntrinsics, CameraModel, RegisteredImage};
        let mut m = SparseModel::default();
        m.cameras.insert(
            1,
            CameraIntrinsics {
                camera_id: 1,
                model: CameraModel::Pinhole,
                width: 10,
                height: 10,
                params: vec![1.0, 1.0, 5.0, 5.0],
            },
        );
        let centers = [(5.0, 5.0, 2.0), (1.0, 2.0, 1.0), (100.0, 3.0, 3.0)];
        for (i, (row, col, secs)) in centers.into_iter().enumerate() {
            let q = Quaternion::IDENTITY;
            m.images.insert(
                i as u32 + 1,
                RegisteredImage {
                    image_id: i as u32 + 1,
                    qvec: q,
                    tvec: tvec_from_camera_center(&q, &Vec3::new(row, col, 0.0)),
                    camera_id: 1,
                    name: format!("HAND_20231220_141254_frame_{:05.1}s.jpg", secs),
                    points2d: vec![],
                },
            );
        }
        let v = validate_path_in(&m, 50, 50);
        assert_abs_diff_eq!(v.in_bounds_fraction, 2.0 / 3.0);
        let secs: Vec<f64> = v.points.iter().map(|p| p.frame_seconds.unwrap()).collect();
        assert_eq!(secs, vec![1.0, 2.0, 3.0]);
        assert_eq!((v.points[0].plan_x, v.points[0].plan_y), (2.0, 1.0));
        assert!(v.to_csv().starts_with(PATH_CSV_HEADER));
    }
}
