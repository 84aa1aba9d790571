//! Per-image geometric data archive.
//!
//! An archive is a directory holding `index.json` plus little-endian binary
//! blobs, one set per split:
//!
//! ```text
//! index.json                 schema, version, per-split record list
//! <split>.w_P.f64            observed 3D points in world frame, 3 × f64 per row
//! <split>.c_p.f64            matching 2D observations in pixels, 2 × f64 per row
//! <split>.point_ids.u64      matching 3D point ids, 1 × u64 per row
//! ```
//!
//! Each record in `index.json` carries `image_path`, `w_t_c` (camera center),
//! `c_q_w` (world-to-camera quaternion, w first), `c_R_w` (row-major),
//! `K` (row-major calibration matrix) and `points: {start, count}` indexing
//! rows of the three blobs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::frame_name::parse_frame_name;
use super::FormatError;
use crate::pipeline::{DatasetSource, DatasetSplit, SplitSide};

pub const GEOMETRIC_SCHEMA: &str = "floorpose.geometric-data";
pub const GEOMETRIC_SCHEMA_VERSION: u32 = 1;

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricRecord {
    pub image_path: String,
    pub w_t_c: [f64; 3],
    pub c_q_w: [f64; 4],
    pub c_R_w: [f64; 9],
    pub w_P: Vec<[f64; 3]>,
    pub point_ids: Vec<u64>,
    pub c_p: Vec<[f64; 2]>,
    pub K: [f64; 9],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeometricDataset {
    /// Keyed by split name (`train`, `test`).
    pub splits: BTreeMap<String, Vec<GeometricRecord>>,
}

#[derive(Serialize, Deserialize)]
struct Index {
    schema: String,
    version: u32,
    byte_order: String,
    splits: BTreeMap<String, SplitIndex>,
}

#[derive(Serialize, Deserialize)]
struct SplitIndex {
    w_p: String,
    c_p: String,
    point_ids: String,
    records: Vec<RecordIndex>,
}

#[allow(non_snake_case)]
#[derive(Serialize, Deserialize)]
struct RecordIndex {
    image_path: String,
    w_t_c: [f64; 3],
    c_q_w: [f64; 4],
    c_R_w: [f64; 9],
    K: [f64; 9],
    points: PointRange,
}

#[derive(Serialize, Deserialize)]
struct PointRange {
    start: usize,
    count: usize,
}

/// Builds the train/test geometric records from registered models.
///
/// Images whose names do not carry a recording timestamp, or that fall in the
/// gap between the split windows, are left out.
pub fn export_geometric_dataset(
    sources: &[DatasetSource],
    split: &DatasetSplit,
) -> Result<GeometricDataset, FormatError> {
    let mut out = GeometricDataset::default();
    out.splits.insert("train".into(), Vec::new());
    out.splits.insert("test".into(), Vec::new());
    for src in sources {
        let model = &src.model;
        for img in model.images.values() {
            let cam = model.cameras.get(&img.camera_id).ok_or_else(|| {
                FormatError::Integrity(format!(
                    "image {} references missing camera {}",
                    img.name, img.camera_id
                ))
            })?;
            let Ok(frame) = parse_frame_name(&img.name) else {
                continue;
            };
            let key = match split.assign(frame.recorded_at) {
                Some(SplitSide::Train) => "train",
                Some(SplitSide::Test) => "test",
                None => continue,
            };
            let mut w_p = Vec::new();
            let mut c_p = Vec::new();
            let mut ids = Vec::new();
            for p in &img.points2d {
                let Some(id) = p.point3d_id else { continue };
                let pt = model.points3d.get(&id).ok_or_else(|| {
                    FormatError::Integrity(format!("image {} observes missing point3D {id}", img.name))
                })?;
                w_p.push([pt.xyz.x, pt.xyz.y, pt.xyz.z]);
                c_p.push(p.xy);
                ids.push(id);
            }
            let c = img.camera_center();
            let k = cam.calibration_matrix();
            let k_rows = [
                k[(0, 0)],
                k[(0, 1)],
                k[(0, 2)],
                k[(1, 0)],
                k[(1, 1)],
                k[(1, 2)],
                k[(2, 0)],
                k[(2, 1)],
                k[(2, 2)],
            ];
            out.splits.get_mut(key).unwrap().push(GeometricRecord {
                image_path: src.image_path(&img.name),
                w_t_c: [c.x, c.y, c.z],
                c_q_w: img.qvec.to_array(),
                c_R_w: img.qvec.to_rotmat().to_row_major(),
                w_P: w_p,
                point_ids: ids,
                c_p,
                K: k_rows,
            });
        }
    }
    for records in out.splits.values_mut() {
        records.sort_by(|a, b| a.image_path.cmp(&b.image_path));
    }
    Ok(out)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_geometric_archive(data: &GeometricDataset, dir: &Path) -> Result<(), FormatError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut index = Index {
        schema: GEOMETRIC_SCHEMA.into(),
        version: GEOMETRIC_SCHEMA_VERSION,
        byte_order: "little".into(),
        splits: BTreeMap::new(),
    };
    for (name, records) in &data.splits {
        let mut w_p = Vec::new();
        let mut c_p = Vec::new();
        let mut ids = Vec::new();
        let mut rec_index = Vec::with_capacity(records.len());
        let mut start = 0;
        for r in records {
            if r.w_P.len() != r.c_p.len() || r.w_P.len() != r.point_ids.len() {
                return Err(FormatError::Archive(format!(
                    "{}: w_P, c_p and point ids differ in length",
                    r.image_path
                )));
            }
            for p in &r.w_P {
                p.iter().for_each(|v| w_p.extend_from_slice(&v.to_le_bytes()));
            }
            for p in &r.c_p {
                p.iter().for_each(|v| c_p.extend_from_slice(&v.to_le_bytes()));
            }
            for id in &r.point_ids {
                ids.extend_from_slice(&id.to_le_bytes());
            }
            rec_index.push(RecordIndex {
                image_path: r.image_path.clone(),
                w_t_c: r.w_t_c,
                c_q_w: r.c_q_w,
                c_R_w: r.c_R_w,
                K: r.K,
                points: PointRange {
                    start,
                    count: r.w_P.len(),
                },
            });
            start += r.w_P.len();
        }
        let split = SplitIndex {
            w_p: format!("{name}.w_P.f64"),
            c_p: format!("{name}.c_p.f64"),
            point_ids: format!("{name}.point_ids.u64"),
            records: rec_index,
        };
        for (file, bytes) in [(&split.w_p, &w_p), (&split.c_p, &c_p), (&split.point_ids, &ids)] {
            let path = dir.join(file);
            std::fs::write(&path, bytes).map_err(io_err(&path))?;
        }
        index.splits.insert(name.clone(), split);
    }
    let path = dir.join("index.json");
    let json = serde_json::to_string_pretty(&index).unwrap();
    std::fs::write(&path, json).map_err(io_err(&path))
}

fn f64_rows<const N: usize>(bytes: &[u8], file: &str) -> Result<Vec<[f64; N]>, FormatError> {
    if bytes.len() % (8 * N) != 0 {
        return Err(FormatError::Archive(format!(
            "{file}: length {} is not a multiple of {}",
            bytes.len(),
            8 * N
        )));
    }
    Ok(bytes
        .chunks_exact(8 * N)
        .map(|row| std::array::from_fn(|i| f64::from_le_bytes(row[8 * i..8 * i + 8].try_into().unwrap())))
        .collect())
}

pub fn read_geometric_archive(dir: &Path) -> Result<GeometricDataset, FormatError> {
    let path = dir.join("index.json");
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let index: Index =
        serde_json::from_str(&text).map_err(|e| FormatError::Archive(format!("index.json: {e}")))?;
    if index.schema != GEOMETRIC_SCHEMA || index.version != GEOMETRIC_SCHEMA_VERSION {
        return Err(FormatError::Archive(format!(
            "unsupported schema {} v{}",
            index.schema, index.version
        )));
    }
    let mut out = GeometricDataset::default();
    for (name, split) in index.splits {
        let read = |file: &str| {
            let path = dir.join(file);
            std::fs::read(&path).map_err(io_err(&path))
        };
        let w_p = f64_rows::<3>(&read(&split.w_p)?, &split.w_p)?;
        let c_p = f64_rows::<2>(&read(&split.c_p)?, &split.c_p)?;
        let ids_bytes = read(&split.point_ids)?;
        if ids_bytes.len() % 8 != 0 {
            return Err(FormatError::Archive(format!("{}: bad length", split.point_ids)));
        }
        let ids: Vec<u64> = ids_bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if w_p.len() != c_p.len() || w_p.len() != ids.len() {
            return Err(FormatError::Archive(format!("{name}: blob row counts differ")));
        }
        let mut records = Vec::with_capacity(split.records.len());
        for r in split.records {
            let range = r.points.start..r.points.start + r.points.count;
            if range.end > w_p.len() {
                return Err(FormatError::Archive(format!(
                    "{}: point range {range:?} out of bounds",
                    r.image_path
                )));
            }
            records.push(GeometricRecord {
                image_path: r.image_path,
                w_t_c: r.w_t_c,
                c_q_w: r.c_q_w,
                c_R_w: r.c_R_w,
                w_P: w_p[range.clone()].to_vec(),
                point_ids: ids[range.clone()].to_vec(),
                c_p: c_p[range].to_vec(),
                K: r.K,
            });
        }
        out.splits.insert(name, records);
    }
    Ok(out)
}
