//! Readers and writers for SfM sparse models and the dataset text formats.

mod binary;
mod captions;
mod frame_name;
mod geodata;
mod model;
mod text;

use std::path::PathBuf;

use thiserror::Error;

pub use binary::{
    read_cameras_bin, read_images_bin, read_points3d_bin, write_cameras_bin, write_images_bin,
    write_points3d_bin,
};
pub use captions::{parse_captions_csv, write_captions_csv, CaptionRecord};
pub use frame_name::{parse_frame_name, CaptureMode, FrameName};
pub use geodata::{
    export_geometric_dataset, read_geometric_archive, write_geometric_archive, GeometricDataset,
    GeometricRecord, GEOMETRIC_SCHEMA, GEOMETRIC_SCHEMA_VERSION,
};
pub use model::{
    CameraId, CameraIntrinsics, CameraModel, ImageId, Point2D, Point3D, Point3DId,
    RegisteredImage, SparseModel, TrackElement,
};
pub use text::{
    parse_geo_coord, read_camera2world_6dof, read_pose_records, write_camera2world_6dof,
    write_pose_records, AnchorCorrespondence, Camera2WorldRecord, PoseRecord, PoseRecordFile,
    CAMERA2WORLD_HEADER, POSE_RECORD_HEADER,
};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("truncated stream at byte {offset}: {needed} more byte(s) needed")]
    Truncated { offset: usize, needed: usize },
    #[error("unknown camera model id {model_id} at byte {offset}")]
    UnknownCameraModel { model_id: i32, offset: usize },
    #[error("duplicate {kind} id {id} at byte {offset}")]
    DuplicateId {
        kind: &'static str,
        id: String,
        offset: usize,
    },
    #[error("invalid record at byte {offset}: {msg}")]
    Invalid { offset: usize, msg: String },
    #[error("unexpected trailing bytes starting at byte {offset}")]
    TrailingBytes { offset: usize },
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("model integrity: {0}")]
    Integrity(String),
    #[error("invalid frame name {name:?}: {msg}")]
    FrameName { name: String, msg: String },
    #[error("archive: {0}")]
    Archive(String),
}
