//! Floor plans with pixel-level point-of-interest labels and "what is near me"
//! queries.
//!
//! Plan conventions: pixel `(row, col)` sits at world `(x, y) = (row, col)`.
//! Headings and bearings are measured on the plan image with 0° along `+col`
//! (image right) and positive angles turning clockwise as displayed, so 90° is
//! `+row` (image down).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{rotmat_to_quat, Pose6DoF, Quaternion, RotMat3, Vec3};

/// Cameras whose optical axis is within this angle of vertical have no heading.
pub const MIN_TILT_FROM_VERTICAL_DEG: f64 = 5.0;

pub type PoiId = u16;

#[derive(Debug, Error)]
pub enum PoiError {
    #[error("{path}: {msg}")]
    Load { path: PathBuf, msg: String },
    #[error("label raster is {labels:?} but plan raster is {plan:?}")]
    DimensionMismatch { plan: (u32, u32), labels: (u32, u32) },
    #[error("label {id} at pixel (row {row}, col {col}) has no registry entry")]
    UnknownLabel { id: PoiId, row: u32, col: u32 },
    #[error("invalid floor plan: {0}")]
    Invalid(String),
    #[error("camera axis is within {MIN_TILT_FROM_VERTICAL_DEG}° of vertical; heading undefined")]
    UndefinedHeading,
    #[error("position (row {row}, col {col}) is outside the {height}x{width} plan")]
    OutOfBounds { row: f64, col: f64, height: u32, width: u32 },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoiInfo {
    pub name: String,
    pub category: String,
}

/// JSON sidecar describing a floor plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorPlanMeta {
    pub meters_per_pixel: f64,
    /// Plan raster, relative to the meta file.
    pub plan_image: PathBuf,
    /// 16-bit label raster, relative to the meta file.
    pub label_image: PathBuf,
    #[serde(default)]
    pub registry: BTreeMap<PoiId, PoiInfo>,
}

#[derive(Debug, Clone)]
pub struct FloorPlan {
    width: u32,
    height: u32,
    meters_per_pixel: f64,
    labels: Vec<PoiId>,
    registry: BTreeMap<PoiId, PoiInfo>,
    pixels: BTreeMap<PoiId, Vec<(u32, u32)>>,
}

impl FloorPlan {
    /// `labels` is row-major, `width * height` long, 0 meaning unlabeled.
    pub fn new(
        width: u32,
        height: u32,
        meters_per_pixel: f64,
        labels: Vec<PoiId>,
        registry: BTreeMap<PoiId, PoiInfo>,
    ) -> Result<Self, PoiError> {
        if width == 0 || height == 0 {
            return Err(PoiError::Invalid(format!("empty raster {width}x{height}")));
        }
        if !(meters_per_pixel.is_finite() && meters_per_pixel > 0.0) {
            return Err(PoiError::Invalid(format!(
                "meters_per_pixel must be positive, got {meters_per_pixel}"
            )));
        }
        if labels.len() != width as usize * height as usize {
            return Err(PoiError::Invalid(format!(
                "{} labels for a {width}x{height} raster",
                labels.len()
            )));
        }
        let mut pixels: BTreeMap<PoiId, Vec<(u32, u32)>> = BTreeMap::new();
        for (i, id) in labels.iter().enumerate().filter(|(_, id)| **id != 0) {
            let (row, col) = ((i / width as usize) as u32, (i % width as usize) as u32);
            if !registry.contains_key(id) {
                return Err(PoiError::UnknownLabel { id: *id, row, col });
            }
            pixels.entry(*id).or_default().push((row, col));
        }
        Ok(Self {
            width,
            height,
            meters_per_pixel,
            labels,
            registry,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn meters_per_pixel(&self) -> f64 {
        self.meters_per_pixel
    }

    pub fn label_at(&self, row: u32, col: u32) -> PoiId {
        self.labels[row as usize * self.width as usize + col as usize]
    }

    pub fn poi(&self, id: PoiId) -> Option<&PoiInfo> {
        self.registry.get(&id)
    }

    pub fn registry(&self) -> &BTreeMap<PoiId, PoiInfo> {
        &self.registry
    }

    /// Pixels carrying each label, row-major order.
    pub fn poi_pixels(&self) -> &BTreeMap<PoiId, Vec<(u32, u32)>> {
        &self.pixels
    }

    pub fn contains(&self, row: f64, col: f64) -> bool {
        row >= 0.0 && col >= 0.0 && row < self.height as f64 && col < self.width as f64
    }

    /// Writes the label raster as a 16-bit grayscale PNG.
    pub fn write_label_png(&self, path: &Path) -> Result<(), PoiError> {
        let img: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width, self.height, self.labels.clone()).unwrap();
        img.save(path).map_err(|e| PoiError::Load {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }
}

fn open_image(path: &Path) -> Result<DynamicImage, PoiError> {
    image::open(path).map_err(|e| PoiError::Load {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Loads a plan from its raster, 16-bit label raster and JSON meta file.
///
/// Only the plan raster's dimensions are used.
pub fn load_floorplan(plan_path: &Path, labels_path: &Path, meta_path: &Path) -> Result<FloorPlan, PoiError> {
    let meta = read_meta(meta_path)?;
    let plan = open_image(plan_path)?;
    let labels = open_image(labels_path)?;
    let (pw, ph) = (plan.width(), plan.height());
    let (lw, lh) = (labels.width(), labels.height());
    if (pw, ph) != (lw, lh) {
        return Err(PoiError::DimensionMismatch {
            plan: (pw, ph),
            labels: (lw, lh),
        });
    }
    let raw: Vec<u16> = match labels {
        DynamicImage::ImageLuma16(buf) => buf.into_raw(),
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(u16::from).collect(),
        other => {
            return Err(PoiError::Load {
                path: labels_path.to_path_buf(),
                msg: format!("label raster must be single-channel, got {:?}", other.color()),
            })
        }
    };
    FloorPlan::new(lw, lh, meta.meters_per_pixel, raw, meta.registry)
}

pub fn read_meta(meta_path: &Path) -> Result<FloorPlanMeta, PoiError> {
    let text = std::fs::read_to_string(meta_path).map_err(|e| PoiError::Load {
        path: meta_path.to_path_buf(),
        msg: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| PoiError::Load {
        path: meta_path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Resolves the rasters named in the meta file relative to it and loads them.
pub fn load_floorplan_from_meta(meta_path: &Path) -> Result<FloorPlan, PoiError> {
    let meta = read_meta(meta_path)?;
    let base = meta_path.parent().unwrap_or(Path::new("."));
    load_floorplan(&base.join(&meta.plan_image), &base.join(&meta.label_image), meta_path)
}

/// Wraps an angle in degrees to `(−180, 180]`.
pub fn wrap_degrees(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Plan angle of a world direction given as `(d_row, d_col)`.
fn plan_angle(d_row: f64, d_col: f64) -> f64 {
    d_row.atan2(d_col).to_degrees()
}

/// Compass heading on the plan of the camera's optical axis (+z of the camera).
pub fn heading_from_pose(pose: &Pose6DoF) -> Result<f64, PoiError> {
    let q = pose
        .orientation
        .normalize()
        .map_err(|e| PoiError::InvalidQuery(e.to_string()))?;
    let axis = q.rotate(&Vec3::z());
    if axis.z.abs() >= MIN_TILT_FROM_VERTICAL_DEG.to_radians().cos() {
        return Err(PoiError::UndefinedHeading);
    }
    Ok(wrap_degrees(plan_angle(axis.x, axis.y)))
}

/// Camera-to-world orientation of an upright camera (image down = world −z)
/// looking horizontally along plan heading `heading_deg`.
pub fn level_camera_orientation(heading_deg: f64) -> Quaternion {
    // camera x -> world +x (row), camera y -> world -z, camera z -> world +y (col)
    let base = RotMat3::from_row_major([1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0]).unwrap();
    let turn = Quaternion::from_axis_angle(&Vec3::z(), -heading_deg.to_radians());
    (turn * rotmat_to_quat(&base)).normalize().unwrap()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoiHit {
    pub poi_id: PoiId,
    pub name: String,
    /// Meters, measured in the plan plane.
    pub distance: f64,
    /// Degrees in `(−180, 180]`, 0 straight ahead, positive to the right.
    pub bearing: f64,
}

/// Distance (m) and bearing (deg) from a plan position to pixel `(row, col)`.
/// A pixel under the camera has bearing 0.
pub fn pixel_offset(row: f64, col: f64, heading: f64, mpp: f64, px: (u32, u32)) -> (f64, f64) {
    let d_row = px.0 as f64 - row;
    let d_col = px.1 as f64 - col;
    let dist = d_row.hypot(d_col);
    let bearing = if dist == 0.0 {
        0.0
    } else {
        wrap_degrees(plan_angle(d_row, d_col) - heading)
    };
    (dist * mpp, bearing)
}

/// Every PoI with a labeled pixel within `radius` meters and `fov` degrees
/// of the camera heading, reported at its nearest qualifying pixel.
///
/// Results are sorted by distance, then id.
pub fn pois_near(plan: &FloorPlan, pose: &Pose6DoF, radius: f64, fov: f64) -> Result<Vec<PoiHit>, PoiError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(PoiError::InvalidQuery(format!("radius must be positive, got {radius}")));
    }
    if !(fov > 0.0 && fov <= 360.0) {
        return Err(PoiError::InvalidQuery(format!("fov must be in (0, 360], got {fov}")));
    }
    let (row, col) = (pose.position.x, pose.position.y);
    if !plan.contains(row, col) {
        return Err(PoiError::OutOfBounds {
            row,
            col,
            height: plan.height,
            width: plan.width,
        });
    }
    let heading = heading_from_pose(pose)?;
    let half_fov = fov / 2.0;
    let mut hits = Vec::new();
    for (id, pixels) in &plan.pixels {
        let best = pixels
            .iter()
            .map(|px| pixel_offset(row, col, heading, plan.meters_per_pixel, *px))
            .filter(|(d, b)| *d <= radius && b.abs() <= half_fov)
            // pixels are row-major, so the first minimum is the lowest (row, col)
            .fold(None, |acc: Option<(f64, f64)>, cur| match acc {
                Some(a) if a.0 <= cur.0 => Some(a),
                _ => Some(cur),
            });
        if let Some((distance, bearing)) = best {
            hits.push(PoiHit {
                poi_id: *id,
                name: plan.registry[id].name.clone(),
                distance,
                bearing,
            });
        }
    }
    hits.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.poi_id.cmp(&b.poi_id)));
    Ok(hits)
}
