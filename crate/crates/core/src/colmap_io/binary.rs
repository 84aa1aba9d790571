//! COLMAP sparse-model binary files (`cameras.bin`, `images.bin`, `points3D.bin`).
//!
//! All integers and doubles are little-endian. Each file starts with a `u64`
//! record count. Layouts:
//!
//! ```text
//! cameras.bin   camera_id u32 | model_id i32 | width u64 | height u64 | params f64 × arity(model)
//! images.bin    image_id u32 | qw qx qy qz f64 | tx ty tz f64 | camera_id u32 | name bytes NUL
//!               | num_points2D u64 | (x f64, y f64, point3D_id u64) × num_points2D
//! points3D.bin  point3D_id u64 | x y z f64 | r g b u8 | error f64 | track_len u64
//!               | (image_id u32, point2D_idx u32) × track_len
//! ```
//!
//! A 2D point without a 3D point stores `u64::MAX` as its id.

use std::collections::BTreeMap;

use super::model::{
    CameraId, CameraIntrinsics, CameraModel, ImageId, Point2D, Point3D, Point3DId,
    RegisteredImage, TrackElement,
};
use super::FormatError;
use crate::geometry::{Quaternion, Vec3};

const INVALID_POINT3D_ID: u64 = u64::MAX;

/// Tolerance on `|‖qvec‖ − 1|` accepted when reading images.
const QVEC_NORM_TOL: f64 = 1e-6;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let remaining = self.buf.len() - self.pos;
        if remaining < n {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n - remaining,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.array::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn i32(&mut self) -> Result<i32, FormatError> {
        Ok(i32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn cstring(&mut self) -> Result<String, FormatError> {
        let start = self.pos;
        let len = self.buf[start..]
            .iter()
            .position(|b| *b == 0)
            .ok_or(FormatError::Truncated {
                offset: self.buf.len(),
                needed: 1,
            })?;
        let bytes = self.take(len + 1)?;
        String::from_utf8(bytes[..len].to_vec()).map_err(|_| FormatError::Invalid {
            offset: start,
            msg: "image name is not valid UTF-8".into(),
        })
    }

    /// Record count, rejected early when it cannot fit in the rest of the buffer.
    fn count(&mut self, min_record_size: usize) -> Result<usize, FormatError> {
        let offset = self.pos;
        let n = self.u64()?;
        let remaining = (self.buf.len() - self.pos) as u64;
        if n.saturating_mul(min_record_size as u64) > remaining {
            return Err(FormatError::Truncated {
                offset,
                needed: (n.saturating_mul(min_record_size as u64) - remaining) as usize,
            });
        }
        Ok(n as usize)
    }

    fn finish(&self) -> Result<(), FormatError> {
        if self.pos != self.buf.len() {
            return Err(FormatError::TrailingBytes { offset: self.pos });
        }
        Ok(())
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn i32(&mut self, v: i32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, v: usize) {
        self.u64(v as u64);
    }
}

fn insert_unique<K: Ord + Copy + std::fmt::Display, V>(
    map: &mut BTreeMap<K, V>,
    id: K,
    value: V,
    kind: &'static str,
    offset: usize,
) -> Result<(), FormatError> {
    if map.insert(id, value).is_some() {
        return Err(FormatError::DuplicateId {
            kind,
            id: id.to_string(),
            offset,
        });
    }
    Ok(())
}

pub fn read_cameras_bin(bytes: &[u8]) -> Result<BTreeMap<CameraId, CameraIntrinsics>, FormatError> {
    let mut r = Reader::new(bytes);
    let n = r.count(24)?;
    let mut out = BTreeMap::new();
    for _ in 0..n {
        let offset = r.pos;
        let camera_id = r.u32()?;
        let model_offset = r.pos;
        let model_id = r.i32()?;
        let model = CameraModel::from_id(model_id).ok_or(FormatError::UnknownCameraModel {
            model_id,
            offset: model_offset,
        })?;
        let width = r.u64()?;
        let height = r.u64()?;
        if width == 0 || height == 0 {
            return Err(FormatError::Invalid {
                offset,
                msg: format!("camera {camera_id} has zero dimension {width}x{height}"),
            });
        }
        let params = (0..model.num_params())
            .map(|_| r.f64())
            .collect::<Result<Vec<_>, _>>()?;
        let cam = CameraIntrinsics {
            camera_id,
            model,
            width,
            height,
            params,
        };
        insert_unique(&mut out, camera_id, cam, "camera", offset)?;
    }
    r.finish()?;
    Ok(out)
}

pub fn write_cameras_bin(cameras: &BTreeMap<CameraId, CameraIntrinsics>) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.len(cameras.len());
    for cam in cameras.values() {
        debug_assert_eq!(cam.params.len(), cam.model.num_params());
        w.u32(cam.camera_id);
        w.i32(cam.model.id());
        w.u64(cam.width);
        w.u64(cam.height);
        for p in &cam.params {
            w.f64(*p);
        }
    }
    w.0
}

pub fn read_images_bin(bytes: &[u8]) -> Result<BTreeMap<ImageId, RegisteredImage>, FormatError> {
    let mut r = Reader::new(bytes);
    let n = r.count(4 + 56 + 4 + 1 + 8)?;
    let mut out = BTreeMap::new();
    for _ in 0..n {
        let offset = r.pos;
        let image_id = r.u32()?;
        let qvec = Quaternion::new(r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        if !qvec.is_finite() || (qvec.norm() - 1.0).abs() > QVEC_NORM_TOL {
            return Err(FormatError::Invalid {
                offset,
                msg: format!("image {image_id} has non-unit qvec {qvec}"),
            });
        }
        let tvec = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
        let camera_id = r.u32()?;
        let name = r.cstring()?;
        if name.is_empty() {
            return Err(FormatError::Invalid {
                offset,
                msg: format!("image {image_id} has an empty name"),
            });
        }
        let num_points = r.count(24)?;
        let mut points2d = Vec::with_capacity(num_points);
        for _ in 0..num_points {
            let xy = [r.f64()?, r.f64()?];
            let id = r.u64()?;
            points2d.push(Point2D {
                xy,
                point3d_id: (id != INVALID_POINT3D_ID).then_some(id),
            });
        }
        let img = RegisteredImage {
            image_id,
            qvec,
            tvec,
            camera_id,
            name,
            points2d,
        };
        insert_unique(&mut out, image_id, img, "image", offset)?;
    }
    r.finish()?;
    Ok(out)
}

pub fn write_images_bin(images: &BTreeMap<ImageId, RegisteredImage>) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.len(images.len());
    for img in images.values() {
        w.u32(img.image_id);
        for c in img.qvec.to_array() {
            w.f64(c);
        }
        for c in img.tvec.iter() {
            w.f64(*c);
        }
        w.u32(img.camera_id);
        w.0.extend_from_slice(img.name.as_bytes());
        w.u8(0);
        w.len(img.points2d.len());
        for p in &img.points2d {
            w.f64(p.xy[0]);
            w.f64(p.xy[1]);
            w.u64(p.point3d_id.unwrap_or(INVALID_POINT3D_ID));
        }
    }
    w.0
}

pub fn read_points3d_bin(bytes: &[u8]) -> Result<BTreeMap<Point3DId, Point3D>, FormatError> {
    let mut r = Reader::new(bytes);
    let n = r.count(8 + 24 + 3 + 8 + 8)?;
    let mut out = BTreeMap::new();
    for _ in 0..n {
        let offset = r.pos;
        let point3d_id = r.u64()?;
        let xyz = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
        let rgb = [r.u8()?, r.u8()?, r.u8()?];
        let error = r.f64()?;
        let track_len = r.count(8)?;
        let track = (0..track_len)
            .map(|_| {
                Ok(TrackElement {
                    image_id: r.u32()?,
                    point2d_idx: r.u32()?,
                })
            })
            .collect::<Result<Vec<_>, FormatError>>()?;
        let pt = Point3D {
            point3d_id,
            xyz,
            rgb,
            error,
            track,
        };
        insert_unique(&mut out, point3d_id, pt, "point3D", offset)?;
    }
    r.finish()?;
    Ok(out)
}

pub fn write_points3d_bin(points: &BTreeMap<Point3DId, Point3D>) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.len(points.len());
    for pt in points.values() {
        w.u64(pt.point3d_id);
        for c in pt.xyz.iter() {
            w.f64(*c);
        }
        for c in pt.rgb {
            w.u8(c);
        }
        w.f64(pt.error);
        w.len(pt.track.len());
        for t in &pt.track {
            w.u32(t.image_id);
            w.u32(t.point2d_idx);
        }
    }
    w.0
}
