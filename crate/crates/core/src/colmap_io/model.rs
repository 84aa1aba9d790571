//! In-memory sparse reconstruction: cameras, registered images and 3D points.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::Matrix3;

use super::binary;
use super::FormatError;
use crate::geometry::{camera_center_from_extrinsics, Pose6DoF, Quaternion, Vec3};

pub type CameraId = u32;
pub type ImageId = u32;
pub type Point3DId = u64;

/// The published COLMAP camera model table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CameraModel {
    SimplePinhole,
    Pinhole,
    SimpleRadial,
    Radial,
    OpenCv,
    OpenCvFisheye,
    FullOpenCv,
    Fov,
    SimpleRadialFisheye,
    RadialFisheye,
    ThinPrismFisheye,
    RadTanThinPrismFisheye,
}

impl CameraModel {
    pub const ALL: [CameraModel; 12] = [
        CameraModel::SimplePinhole,
        CameraModel::Pinhole,
        CameraModel::SimpleRadial,
        CameraModel::Radial,
        CameraModel::OpenCv,
        CameraModel::OpenCvFisheye,
        CameraModel::FullOpenCv,
        CameraModel::Fov,
        CameraModel::SimpleRadialFisheye,
        CameraModel::RadialFisheye,
        CameraModel::ThinPrismFisheye,
        CameraModel::RadTanThinPrismFisheye,
    ];

    pub fn from_id(id: i32) -> Option<Self> {
        usize::try_from(id).ok().and_then(|i| Self::ALL.get(i).copied())
    }

    pub fn id(self) -> i32 {
        Self::ALL.iter().position(|m| *m == self).unwrap() as i32
    }

    pub fn num_params(self) -> usize {
        match self {
            CameraModel::SimplePinhole => 3,
            CameraModel::Pinhole => 4,
            CameraModel::SimpleRadial => 4,
            CameraModel::Radial => 5,
            CameraModel::OpenCv => 8,
            CameraModel::OpenCvFisheye => 8,
            CameraModel::FullOpenCv => 12,
            CameraModel::Fov => 5,
            CameraModel::SimpleRadialFisheye => 4,
            CameraModel::RadialFisheye => 5,
            CameraModel::ThinPrismFisheye => 12,
            CameraModel::RadTanThinPrismFisheye => 16,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CameraModel::SimplePinhole => "SIMPLE_PINHOLE",
            CameraModel::Pinhole => "PINHOLE",
            CameraModel::SimpleRadial => "SIMPLE_RADIAL",
            CameraModel::Radial => "RADIAL",
            CameraModel::OpenCv => "OPENCV",
            CameraModel::OpenCvFisheye => "OPENCV_FISHEYE",
            CameraModel::FullOpenCv => "FULL_OPENCV",
            CameraModel::Fov => "FOV",
            CameraModel::SimpleRadialFisheye => "SIMPLE_RADIAL_FISHEYE",
            CameraModel::RadialFisheye => "RADIAL_FISHEYE",
            CameraModel::ThinPrismFisheye => "THIN_PRISM_FISHEYE",
            CameraModel::RadTanThinPrismFisheye => "RAD_TAN_THIN_PRISM_FISHEYE",
        }
    }

    /// Models whose first three parameters are `f, cx, cy`.
    fn single_focal(self) -> bool {
        matches!(
            self,
            CameraModel::SimplePinhole
                | CameraModel::SimpleRadial
                | CameraModel::Radial
                | CameraModel::SimpleRadialFisheye
                | CameraModel::RadialFisheye
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraIntrinsics {
    pub camera_id: CameraId,
    pub model: CameraModel,
    pub width: u64,
    pub height: u64,
    pub params: Vec<f64>,
}

impl CameraIntrinsics {
    /// Pinhole calibration matrix; distortion terms are dropped.
    pub fn calibration_matrix(&self) -> Matrix3<f64> {
        let p = &self.params;
        let (fx, fy, cx, cy) = if self.model.single_focal() {
            (p[0], p[0], p[1], p[2])
        } else {
            (p[0], p[1], p[2], p[3])
        };
        Matrix3::new(fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0)
    }
}

/// A 2D keypoint and the 3D point it observes, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2D {
    pub xy: [f64; 2],
    pub point3d_id: Option<Point3DId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegisteredImage {
    pub image_id: ImageId,
    /// World-to-camera rotation.
    pub qvec: Quaternion,
    pub tvec: Vec3,
    pub camera_id: CameraId,
    pub name: String,
    pub points2d: Vec<Point2D>,
}

impl RegisteredImage {
    pub fn camera_center(&self) -> Vec3 {
        camera_center_from_extrinsics(&self.qvec, &self.tvec)
    }

    /// Camera-to-world pose.
    pub fn pose(&self) -> Pose6DoF {
        Pose6DoF::from_extrinsics(&self.qvec, &self.tvec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackElement {
    pub image_id: ImageId,
    pub point2d_idx: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point3D {
    pub point3d_id: Point3DId,
    pub xyz: Vec3,
    pub rgb: [u8; 3],
    pub error: f64,
    pub track: Vec<TrackElement>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseModel {
    pub cameras: BTreeMap<CameraId, CameraIntrinsics>,
    pub images: BTreeMap<ImageId, RegisteredImage>,
    pub points3d: BTreeMap<Point3DId, Point3D>,
}

impl SparseModel {
    /// Reads `cameras.bin`, `images.bin` and `points3D.bin` from `dir` and
    /// checks referential integrity.
    pub fn read_dir(dir: &Path) -> Result<Self, FormatError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read(&path).map_err(|source| FormatError::Io { path, source })
        };
        let model = SparseModel {
            cameras: binary::read_cameras_bin(&read("cameras.bin")?)?,
            images: binary::read_images_bin(&read("images.bin")?)?,
            points3d: binary::read_points3d_bin(&read("points3D.bin")?)?,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), FormatError> {
        std::fs::create_dir_all(dir).map_err(|source| FormatError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let files = [
            ("cameras.bin", binary::write_cameras_bin(&self.cameras)),
            ("images.bin", binary::write_images_bin(&self.images)),
            ("points3D.bin", binary::write_points3d_bin(&self.points3d)),
        ];
        for (name, bytes) in files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|source| FormatError::Io { path, source })?;
        }
        Ok(())
    }

    /// Referential integrity between the three tables.
    pub fn validate(&self) -> Result<(), FormatError> {
        for img in self.images.values() {
            if !self.cameras.contains_key(&img.camera_id) {
                return Err(FormatError::Integrity(format!(
                    "image {} ({}) references missing camera {}",
                    img.image_id, img.name, img.camera_id
                )));
            }
            if let Some(p) = img
                .points2d
                .iter()
                .filter_map(|p| p.point3d_id)
                .find(|id| !self.points3d.contains_key(id))
            {
                return Err(FormatError::Integrity(format!(
                    "image {} ({}) observes missing point3D {p}",
                    img.image_id, img.name
                )));
            }
        }
        for pt in self.points3d.values() {
            if pt.track.is_empty() {
                return Err(FormatError::Integrity(format!(
                    "point3D {} has an empty track",
                    pt.point3d_id
                )));
            }
            if let Some(t) = pt.track.iter().find(|t| !self.images.contains_key(&t.image_id)) {
                return Err(FormatError::Integrity(format!(
                    "point3D {} track references missing image {}",
                    pt.point3d_id, t.image_id
                )));
            }
        }
        Ok(())
    }

    pub fn image_by_name(&self, name: &str) -> Option<&RegisteredImage> {
        self.images.values().find(|img| img.name == name)
    }

    pub fn image_names(&self) -> BTreeSet<String> {
        self.images.values().map(|img| img.name.clone()).collect()
    }
}
