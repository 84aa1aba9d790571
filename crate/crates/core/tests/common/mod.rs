//! Shared fixtures: a hand-rolled COLMAP byte encoder, a ray-cast synthetic
//! building, scripted camera trajectories and a stub SfM executor.
#![allow(dead_code)]

pub mod poi_oracle;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use floorpose::colmap_io::{
    AnchorCorrespondence, CameraIntrinsics, CameraModel, Point2D, Point3D, RegisteredImage, SparseModel,
    TrackElement,
};
use floorpose::geometry::{tvec_from_camera_center, Pose6DoF, Quaternion, SimilarityTransform, Vec3};
use floorpose::pipeline::{ExecutorError, SfmExecutor, SfmRequest, VideoJob};
use floorpose::poi::level_camera_orientation;
use image::GrayImage;

// ---------------------------------------------------------------------------
// Byte-level encoder, written independently of the library writer so that
// round-trip checks compare against a separate implementation.

pub struct Bytes(pub Vec<u8>);

impl Bytes {
    pub fn new() -> Self {
        Bytes(Vec::new())
    }
    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.0.push(v);
        self
    }
    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.0.extend(v.to_le_bytes());
        self
    }
    pub fn i32(&mut self, v: i32) -> &mut Self {
        self.0.extend(v.to_le_bytes());
        self
    }
    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.0.extend(v.to_le_bytes());
        self
    }
    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.0.extend(v.to_le_bytes());
        self
    }
    pub fn cstr(&mut self, s: &str) -> &mut Self {
        self.0.extend(s.as_bytes());
        self.0.push(0);
        self
    }
}

/// `cameras.bin` holding the single 3840×2160 PINHOLE camera.
pub fn pinhole_cameras_bin() -> Vec<u8> {
    let mut b = Bytes::new();
    b.u64(1).u32(1).i32(1).u64(3840).u64(2160);
    for p in [3000.0, 3000.0, 1920.0, 1080.0] {
        b.f64(p);
    }
    b.0
}

/// Three raw files for a model with 3 images observing 50 points.
pub struct RawModel {
    pub cameras: Vec<u8>,
    pub images: Vec<u8>,
    pub points3d: Vec<u8>,
}

fn unit_quat(rng: &mut impl rand::Rng) -> [f64; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.1 {
            return q.map(|v| v / n);
        }
    }
}

pub fn raw_model_3x50(seed: u64) -> RawModel {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut cams = Bytes::new();
    cams.u64(2);
    cams.u32(1).i32(1).u64(3840).u64(2160);
    for p in [3000.0, 3000.0, 1920.0, 1080.0] {
        cams.f64(p);
    }
    // OPENCV with 8 parameters
    cams.u32(2).i32(4).u64(1920).u64(1080);
    for _ in 0..8 {
        cams.f64(rng.random_range(-2.0..2000.0));
    }

    // every point seen by one or more images; obs[(image, point)] = slot
    let mut observations: Vec<Vec<u64>> = vec![Vec::new(); 3];
    let mut tracks: Vec<Vec<(u32, u32)>> = Vec::new();
    for pid in 0..50u64 {
        let mut track = Vec::new();
        for img in 0..3u32 {
            if rng.random_bool(0.6) || (img == 2 && track.is_empty()) {
                let slot = observations[img as usize].len() as u32;
                observations[img as usize].push(pid + 1);
                track.push((img + 1, slot));
            }
        }
        tracks.push(track);
    }

    let mut imgs = Bytes::new();
    imgs.u64(3);
    for img in 0..3u32 {
        imgs.u32(img + 1);
        for v in unit_quat(&mut rng) {
            imgs.f64(v);
        }
        for _ in 0..3 {
            imgs.f64(rng.random_range(-10.0..10.0));
        }
        imgs.u32(if img == 0 { 1 } else { 2 });
        imgs.cstr(&format!("HAND_20231220_141254_frame_00{img}.0s.jpg"));
        let obs = &observations[img as usize];
        // one unobserved keypoint per image to exercise the sentinel
        imgs.u64(obs.len() as u64 + 1);
        for pid in obs {
            imgs.f64(rng.random_range(0.0..1920.0)).f64(rng.random_range(0.0..1080.0)).u64(*pid);
        }
        imgs.f64(1.5).f64(2.5).u64(u64::MAX);
    }

    let mut pts = Bytes::new();
    pts.u64(50);
    for (k, track) in tracks.iter().enumerate() {
        pts.u64(k as u64 + 1);
        for _ in 0..3 {
            pts.f64(rng.random_range(-50.0..50.0));
        }
        pts.u8(rng.random()).u8(rng.random()).u8(rng.random());
        pts.f64(rng.random_range(0.0..2.0));
        pts.u64(track.len() as u64);
        for (i, s) in track {
            pts.u32(*i).u32(*s);
        }
    }
    RawModel {
        cameras: cams.0,
        images: imgs.0,
        points3d: pts.0,
    }
}

// ---------------------------------------------------------------------------
// Synthetic building: a ring corridor around a central block, plan units are
// pixels, world axes are (row, col, up).

pub const PLAN_HEIGHT: u32 = 120;
pub const PLAN_WIDTH: u32 = 200;
pub const FLOOR_Z: f64 = -15.0;
pub const CEILING_Z: f64 = 15.0;

pub const IMG_W: u32 = 64;
pub const IMG_H: u32 = 48;
pub const FOCAL: f64 = 40.0;

struct Wall {
    a: (f64, f64),
    b: (f64, f64),
    wavelength: f64,
    phase: f64,
}

pub struct Building {
    walls: Vec<Wall>,
}

impl Building {
    pub fn new() -> Self {
        let corners_outer = [(0.0, 0.0), (0.0, 200.0), (120.0, 200.0), (120.0, 0.0)];
        let corners_inner = [(40.0, 40.0), (40.0, 160.0), (80.0, 160.0), (80.0, 40.0)];
        let mut walls = Vec::new();
        for (k, ring) in [corners_outer, corners_inner].iter().enumerate() {
            for i in 0..4 {
                let n = walls.len() as f64;
                walls.push(Wall {
                    a: ring[i],
                    b: ring[(i + 1) % 4],
                    wavelength: 7.0 + 3.3 * n + 2.0 * k as f64,
                    phase: 0.9 * n,
                });
            }
        }
        Building { walls }
    }

    /// Grayscale view from `pose` (camera-to-world orientation).
    pub fn render(&self, pose: &Pose6DoF) -> GrayImage {
        let c = pose.position;
        let q = pose.orientation;
        GrayImage::from_fn(IMG_W, IMG_H, |u, v| {
            let dc = Vec3::new(
                (u as f64 + 0.5 - IMG_W as f64 / 2.0) / FOCAL,
                (v as f64 + 0.5 - IMG_H as f64 / 2.0) / FOCAL,
                1.0,
            );
            let d = q.rotate(&dc);
            image::Luma([(255.0 * self.shade(&c, &d).clamp(0.0, 1.0)).round() as u8])
        })
    }

    fn shade(&self, c: &Vec3, d: &Vec3) -> f64 {
        let mut best: Option<(f64, f64, &Wall)> = None;
        for w in &self.walls {
            if let Some((t, s)) = ray_segment(c, d, w) {
                if best.is_none_or(|(bt, _, _)| t < bt) {
                    best = Some((t, s, w));
                }
            }
        }
        if let Some((t, s, w)) = best {
            let z = c.z + t * d.z;
            if (FLOOR_Z..=CEILING_Z).contains(&z) {
                let len = ((w.b.0 - w.a.0).powi(2) + (w.b.1 - w.a.1).powi(2)).sqrt();
                let stripe = (std::f64::consts::TAU * s / w.wavelength + w.phase).sin();
                return 0.45 + 0.3 * stripe * (0.7 + 0.3 * (z / 6.0).cos()) + 0.2 * s / len;
            }
        }
        let plane = if d.z < 0.0 { FLOOR_Z } else { CEILING_Z };
        if d.z.abs() < 1e-12 {
            return 0.5;
        }
        let t = (plane - c.z) / d.z;
        let (x, y) = (c.x + t * d.x, c.y + t * d.y);
        if d.z < 0.0 {
            0.25 + 0.1 * (x / 7.0).sin() * (y / 9.0).cos()
        } else {
            0.85 + 0.05 * (y / 13.0).sin()
        }
    }
}

/// Ray `c + t·d` (horizontal part) against a wall; returns (t, offset along wall).
fn ray_segment(c: &Vec3, d: &Vec3, w: &Wall) -> Option<(f64, f64)> {
    let (ex, ey) = (w.b.0 - w.a.0, w.b.1 - w.a.1);
    let den = d.x * ey - d.y * ex;
    if den.abs() < 1e-12 {
        return None;
    }
    let (ax, ay) = (w.a.0 - c.x, w.a.1 - c.y);
    let t = (ax * ey - ay * ex) / den;
    let u = (ax * d.y - ay * d.x) / den;
    if t > 1e-9 && (0.0..=1.0).contains(&u) {
        let len = (ex * ex + ey * ey).sqrt();
        Some((t, u * len))
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Scripted videos.

/// Constant-speed walk along a polyline, facing the direction of travel.
#[derive(Clone)]
pub struct Trajectory {
    pub waypoints: Vec<(f64, f64)>,
    /// Plan units per frame.
    pub speed: f64,
}

impl Trajectory {
    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
            .sum()
    }

    pub fn pose(&self, frame: usize) -> Pose6DoF {
        let mut s = frame as f64 * self.speed;
        for w in self.waypoints.windows(2) {
            let (dr, dc) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            let len = (dr * dr + dc * dc).sqrt();
            if s < len || std::ptr::eq(w, self.waypoints.windows(2).last().unwrap()) {
                let f = s / len;
                let heading = dr.atan2(dc).to_degrees();
                return Pose6DoF::new(
                    Vec3::new(w[0].0 + f * dr, w[0].1 + f * dc, 0.0),
                    level_camera_orientation(heading),
                );
            }
            s -= len;
        }
        unreachable!("trajectory has at least one segment")
    }
}

#[derive(Clone)]
pub struct ScriptedVideo {
    pub stem: String,
    pub trajectory: Trajectory,
    pub fps: f64,
    pub duration: f64,
    pub frame_interval: usize,
    /// Maps world coordinates into the arbitrary SfM frame.
    pub world_to_sfm: SimilarityTransform,
    /// Inside this inclusive frame range the stub loses tracking whenever
    /// consecutive frames are more than `max_gap` apart.
    pub hard_zone: Option<(usize, usize)>,
    pub max_gap: usize,
}

impl ScriptedVideo {
    pub fn job(&self, project: &Path) -> VideoJob {
        VideoJob::new(
            &project.join(format!("{}.MOV", self.stem)),
            self.fps,
            self.duration,
            self.frame_interval,
        )
        .unwrap()
    }

    /// Frame index encoded in an image name of this video.
    pub fn frame_of(&self, name: &str) -> usize {
        let f = floorpose::colmap_io::parse_frame_name(name).unwrap();
        assert_eq!(f.video_stem(), self.stem);
        (f.tenths as f64 * self.fps / 10.0).round() as usize
    }

    /// Anchors at six sampled frames spread over the walk.
    pub fn anchors(&self, job: &VideoJob) -> Vec<AnchorCorrespondence> {
        let n = job.sampled_frames.len();
        (0..6)
            .map(|k| {
                let i = job.sampled_frames[k * (n - 1) / 5];
                let p = self.trajectory.pose(i).position;
                AnchorCorrespondence {
                    image_name: job.frame_name(i),
                    plan_row: p.x,
                    plan_col: p.y,
                    plan_z: p.z,
                }
            })
            .collect()
    }

    pub fn geo_coord_text(&self, job: &VideoJob) -> String {
        self.anchors(job)
            .iter()
            .enumerate()
            .map(|(k, a)| format!("{}. {} {} {} {}\n", k + 1, a.image_name, a.plan_row, a.plan_col, a.plan_z))
            .collect()
    }
}

fn transform(scale: f64, axis: [f64; 3], angle: f64, t: [f64; 3]) -> SimilarityTransform {
    let axis = Vec3::new(axis[0], axis[1], axis[2]).normalize();
    SimilarityTransform::new(scale, Quaternion::from_axis_angle(&axis, angle), Vec3::new(t[0], t[1], t[2])).unwrap()
}

/// Frame spacing of the training walks in plan units.
pub const TRAIN_FRAME_SPACING: f64 = 6.0;

/// Two training walks (the second needs densification) and one test walk
/// that follows the first route half a frame-spacing ahead and one unit over.
pub fn scripted_videos() -> Vec<ScriptedVideo> {
    vec![
        ScriptedVideo {
            stem: "HAND_20231220_141254".into(),
            trajectory: Trajectory {
                waypoints: vec![(20.0, 20.0), (20.0, 180.0), (100.0, 180.0)],
                speed: 1.0,
            },
            fps: 10.0,
            duration: 24.0,
            frame_interval: 6,
            world_to_sfm: transform(0.37, [0.3, -0.5, 0.8], 1.1, [3.0, -7.0, 2.0]),
            hard_zone: None,
            max_gap: 6,
        },
        ScriptedVideo {
            stem: "DJI_20240110_093000".into(),
            trajectory: Trajectory {
                waypoints: vec![(100.0, 180.0), (100.0, 20.0), (20.0, 20.0)],
                speed: 1.0,
            },
            fps: 10.0,
            duration: 24.0,
            frame_interval: 6,
            world_to_sfm: transform(2.9, [-0.7, 0.1, 0.2], -2.4, [-40.0, 11.0, 5.5]),
            hard_zone: Some((60, 120)),
            max_gap: 2,
        },
        ScriptedVideo {
            stem: "HAND_20240514_160102".into(),
            trajectory: Trajectory {
                waypoints: vec![(21.0, 23.0), (21.0, 181.0), (100.0, 181.0)],
                speed: 1.0,
            },
            fps: 10.0,
            duration: 23.0,
            frame_interval: 6,
            world_to_sfm: transform(0.05, [0.0, 1.0, 0.0], 0.4, [0.1, 0.2, -0.3]),
            hard_zone: None,
            max_gap: 6,
        },
    ]
}

/// Writes `video.toml` and `geo_coord.txt` for `video` under `root/<stem>`.
pub fn setup_project(root: &Path, video: &ScriptedVideo) -> (PathBuf, VideoJob) {
    let project = root.join(&video.stem);
    std::fs::create_dir_all(&project).unwrap();
    let job = video.job(&project);
    std::fs::write(
        project.join("video.toml"),
        format!(
            "video = \"{}.MOV\"\nfps = {:.1}\nduration = {:.1}\nframe_interval = {}\n",
            video.stem, video.fps, video.duration, video.frame_interval
        ),
    )
    .unwrap();
    std::fs::write(project.join("geo_coord.txt"), video.geo_coord_text(&job)).unwrap();
    (project, job)
}

// ---------------------------------------------------------------------------
// Stub SfM executor.

/// Produces exact reconstructions in each video's SfM frame, split into
/// components wherever the scripted hard zone loses tracking.
pub struct StubSfm {
    videos: BTreeMap<String, ScriptedVideo>,
    calls: Mutex<BTreeMap<String, usize>>,
}

impl StubSfm {
    pub fn new(videos: &[ScriptedVideo]) -> Self {
        Self {
            videos: videos.iter().map(|v| (v.stem.clone(), v.clone())).collect(),
            calls: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn calls(&self, stem: &str) -> usize {
        self.calls.lock().unwrap().get(stem).copied().unwrap_or(0)
    }
}

pub fn stub_camera() -> CameraIntrinsics {
    CameraIntrinsics {
        camera_id: 1,
        model: CameraModel::Pinhole,
        width: IMG_W as u64,
        height: IMG_H as u64,
        params: vec![FOCAL, FOCAL, IMG_W as f64 / 2.0, IMG_H as f64 / 2.0],
    }
}

impl SfmExecutor for StubSfm {
    fn run(&self, req: &SfmRequest) -> Result<(), ExecutorError> {
        let stem = req.video.file_stem().unwrap().to_string_lossy().into_owned();
        let video = self
            .videos
            .get(&stem)
            .ok_or_else(|| ExecutorError::Other(format!("no script for {stem}")))?;
        *self.calls.lock().unwrap().entry(stem.clone()).or_default() += 1;
        std::fs::write(&req.log_path, format!("stub run over {} frames\n", req.frames.len())).unwrap();

        let mut groups: Vec<Vec<&(usize, String)>> = Vec::new();
        let mut prev: Option<usize> = None;
        for f in &req.frames {
            let lost = match (prev, video.hard_zone) {
                (Some(p), Some((a, b))) => p >= a && f.0 <= b && f.0 - p > video.max_gap,
                _ => false,
            };
            if prev.is_none() || lost {
                groups.push(Vec::new());
            }
            groups.last_mut().unwrap().push(f);
            prev = Some(f.0);
        }

        let t = &video.world_to_sfm;
        for (k, group) in groups.iter().enumerate() {
            let mut model = SparseModel::default();
            model.cameras.insert(1, stub_camera());
            for (idx, name) in group.iter().map(|f| (f.0, &f.1)) {
                let world = video.trajectory.pose(idx);
                let sfm = t.apply_to_pose(&world);
                let qvec = sfm.orientation.conjugate().normalize().unwrap();
                let image_id = idx as u32 + 1;
                // one landmark straight ahead, seen at the principal point
                let ahead = world.position + world.orientation.rotate(&Vec3::z()) * 5.0;
                let pid = idx as u64 + 1;
                model.points3d.insert(
                    pid,
                    Point3D {
                        point3d_id: pid,
                        xyz: t.apply(&ahead),
                        rgb: [128, 128, 128],
                        error: 0.5,
                        track: vec![TrackElement {
                            image_id,
                            point2d_idx: 0,
                        }],
                    },
                );
                model.images.insert(
                    image_id,
                    RegisteredImage {
                        image_id,
                        qvec,
                        tvec: tvec_from_camera_center(&qvec, &sfm.position),
                        camera_id: 1,
                        name: name.clone(),
                        points2d: vec![Point2D {
                            xy: [IMG_W as f64 / 2.0, IMG_H as f64 / 2.0],
                            point3d_id: Some(pid),
                        }],
                    },
                );
            }
            model
                .write_dir(&req.output_dir.join(k.to_string()))
                .map_err(|e| ExecutorError::Other(e.to_string()))?;
        }
        Ok(())
    }
}
