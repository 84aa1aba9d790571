use crate::colmap_io::{parse_frame_name, PoseRecord, SparseModel};

use super::split::{DatasetSplit, SplitSide};

/// A registered model plus the prefix its image names are stored under.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSource {
    pub path_prefix: String,
    pub model: SparseModel,
}

impl DatasetSource {
    pub fn new(path_prefix: impl Into<String>, model: SparseModel) -> Self {
        Self {
            path_prefix: path_prefix.into(),
            model,
        }
    }

    pub fn image_path(&self, name: &str) -> String {
        let prefix = self.path_prefix.trim_end_matches('/');
        if prefix.is_empty() {
            name.to_string()
        } else {
            format!("{prefix}/{name}")
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FloorDataset {
    pub train: Vec<PoseRecord>,
    pub test: Vec<PoseRecord>,
    /// Dated between the two split windows.
    pub dropped: usize,
    /// No parseable recording timestamp in the image name.
    pub skipped: usize,
}

impl FloorDataset {
    pub fn total(&self) -> usize {
        self.train.len() + self.test.len() + self.dropped + self.skipped
    }
}

/// Pools registered images into train and test pose records.
///
/// Each record holds the camera center and the camera-to-world orientation.
/// Ids are dense from 0 within each split, assigned in image-path order.
pub fn build_floor_dataset(sources: &[DatasetSource], split: &DatasetSplit) -> FloorDataset {
    let mut out = FloorDataset::default();
    for src in sources {
        for img in src.model.images.values() {
            let side = match parse_frame_name(&img.name) {
                Ok(f) => split.assign(f.recorded_at),
                Err(e) => {
                    log::warn!("skipping {}: {e}", img.name);
                    out.skipped += 1;
                    continue;
                }
            };
            let pose = img.pose();
            let rec = PoseRecord {
                img_path: src.image_path(&img.name),
                img_id: 0,
                q: pose.orientation.normalize().expect("registered images carry unit quaternions"),
                t: pose.position,
            };
            match side {
                Some(SplitSide::Train) => out.train.push(rec),
                Some(SplitSide::Test) => out.test.push(rec),
                None => out.dropped += 1,
            }
        }
    }
    if out.skipped > 0 {
        log::warn!("{} image(s) skipped for lack of a recording timestamp", out.skipped);
    }
    for list in [&mut out.train, &mut out.test] {
        list.sort_by(|a, b| a.img_path.cmp(&b.img_path));
        for (i, r) in list.iter_mut().enumerate() {
            r.img_id = i as u64;
        }
    }
    out
}
