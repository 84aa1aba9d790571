use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use super::{Category, CliError, Config, EvaluateArgs, ExportArgs, InspectArgs, PlotPathArgs, PoiQueryArgs, SampleArgs};
use super::AnnotateArgs;
use crate::colmap_io::{
    export_geometric_dataset, parse_geo_coord, read_cameras_bin, read_images_bin, read_points3d_bin,
    read_pose_records, write_geometric_archive, write_pose_records, FormatError, SparseModel,
};
use crate::eval::{cdf, cdf_csv, compare_poses, samples_csv, summarize, ErrorAxis, PlanScale};
use crate::geometry::{Pose6DoF, Vec3};
use crate::georeg::validate_path_in;
use crate::pipeline::{
    annotate_video, build_floor_dataset, write_atomic, CommandExecutor, DatasetSource, VideoJob,
};
use crate::poi::{level_camera_orientation, load_floorplan_from_meta, pois_near, read_meta};

pub const VIDEO_MANIFEST: &str = "video.toml";
pub const GEO_COORD_FILE: &str = "geo_coord.txt";
pub const TRAIN_FILE: &str = "image_train_all.txt";
pub const TEST_FILE: &str = "image_test_all.txt";

/// `video.toml` inside a project folder.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VideoManifest {
    /// Relative paths resolve against the project folder.
    video: PathBuf,
    fps: f64,
    duration: f64,
    frame_interval: Option<usize>,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::new(Category::Io, format!("{}: {e}", path.display()))
}

fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::new(Category::Parse, format!("{}: {e}", path.display())))
}

fn emit(out: &mut Vec<u8>, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::new(Category::Io, e.to_string()))
}

fn load_job(cfg: &Config, project: &Path) -> Result<VideoJob, CliError> {
    let path = project.join(VIDEO_MANIFEST);
    let m: VideoManifest =
        toml::from_str(&read_input(&path)?).map_err(|e| CliError::new(Category::Parse, format!("{}: {e}", path.display())))?;
    let video = if m.video.is_relative() {
        project.join(&m.video)
    } else {
        m.video
    };
    Ok(VideoJob::new(&video, m.fps, m.duration, m.frame_interval.unwrap_or(cfg.frame_interval))?)
}

fn plan_size(cfg: &Config) -> Result<Option<(u32, u32)>, CliError> {
    match &cfg.plan_meta {
        Some(meta) => {
            let plan = load_floorplan_from_meta(meta)?;
            Ok(Some((plan.width(), plan.height())))
        }
        None => Ok(None),
    }
}

fn meters_per_pixel(cfg: &Config) -> Result<f64, CliError> {
    if let Some(m) = cfg.meters_per_pixel {
        return Ok(m);
    }
    match &cfg.plan_meta {
        Some(meta) => Ok(read_meta(meta)?.meters_per_pixel),
        None => Ok(1.0),
    }
}

/// Builds a directory next to `dest` and renames it into place once `fill`
/// succeeds, so a failed run never leaves a partial folder behind.
fn stage_dir(dest: &Path, fill: impl FnOnce(&Path) -> Result<(), CliError>) -> Result<(), CliError> {
    let parent = match dest.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent).map_err(|e| io_error(&parent, e))?;
    let tmp = tempfile::Builder::new()
        .prefix(".stage-")
        .tempdir_in(&parent)
        .map_err(|e| io_error(&parent, e))?;
    fill(tmp.path())?;
    if dest.exists() {
        std::fs::remove_dir_all(dest).map_err(|e| io_error(dest, e))?;
    }
    let staged = tmp.keep();
    std::fs::rename(&staged, dest).map_err(|e| io_error(dest, e))
}

pub fn sample(cfg: &Config, a: &SampleArgs, out: &mut Vec<u8>) -> Result<(), CliError> {
    let job = VideoJob::new(&a.video, a.fps, a.duration, a.interval.unwrap_or(cfg.frame_interval))?;
    let mut text = String::from("frame_index,image_name\n");
    for &i in &job.sampled_frames {
        writeln!(text, "{i},{}", job.frame_name(i)).unwrap();
    }
    emit(out, &text)
}

pub fn annotate(cfg: &Config, a: &AnnotateArgs, out: &mut Vec<u8>) -> Result<(), CliError> {
    let sfm = cfg
        .sfm_command
        .as_deref()
        .ok_or_else(|| CliError::config("annotate needs sfm_command in the config"))?;
    let mut executor = CommandExecutor::new(sfm).map_err(|e| CliError::config(e.to_string()))?;
    if let Some(extract) = &cfg.extract_command {
        executor = executor.with_extract(extract.as_str()).map_err(|e| CliError::config(e.to_string()))?;
    }
    // inputs are all checked before any reconstruction starts
    let mut jobs = Vec::new();
    for project in &a.projects {
        let job = load_job(cfg, project)?;
        let anchors = parse_geo_coord(&read_input(&project.join(GEO_COORD_FILE))?)?;
        if anchors.is_empty() {
            return Err(CliError::config(format!("{}: no anchors in {GEO_COORD_FILE}", project.display())));
        }
        jobs.push((project, job, anchors));
    }
    let opts = cfg.annotate_options(plan_size(cfg)?);
    let results: Vec<Result<String, CliError>> = jobs
        .into_par_iter()
        .map(|(project, job, anchors)| {
            let r = annotate_video(job, &anchors, &executor, project, &opts)?;
            Ok(format!(
                "{}: {} images registered, {} reconstruction run(s), anchor rms {:.4}, {:.1}% of path on plan",
                project.display(),
                r.model.images.len(),
                r.reconstruction_calls,
                r.report.rms_residual,
                100.0 * r.path.in_bounds_fraction
            ))
        })
        .collect();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(line) => emit(out, &format!("{line}\n"))?,
            Err(e) => {
                eprintln!("error[{}]: {}", e.category.label(), e.message);
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn project_source(project: &Path) -> Result<DatasetSource, CliError> {
    let model = SparseModel::read_dir(&project.join("sparse").join("geo"))?;
    let name = project
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| project.display().to_string());
    Ok(DatasetSource::new(format!("{name}/images"), model))
}

pub fn export(cfg: &Config, a: &ExportArgs, out: &mut Vec<u8>) -> Result<(), CliError> {
    let split = cfg.split().map_err(CliError::config)?;
    let sources = a
        .projects
        .par_iter()
        .map(|p| project_source(p))
        .collect::<Result<Vec<_>, _>>()?;
    let data = build_floor_dataset(&sources, &split);
    write_atomic(&a.out.join(TRAIN_FILE), write_pose_records(&data.train, &cfg.floor).as_bytes())?;
    write_atomic(&a.out.join(TEST_FILE), write_pose_records(&data.test, &cfg.floor).as_bytes())?;
    if let Some(dir) = &a.geometric {
        let geo = export_geometric_dataset(&sources, &split)?;
        stage_dir(dir, |tmp| Ok(write_geometric_archive(&geo, tmp)?))?;
    }
    emit(
        out,
        &format!(
            "train {} test {} dropped {} skipped {}\n",
            data.train.len(),
            data.test.len(),
            data.dropped,
            data.skipped
        ),
    )
}

pub fn evaluate(cfg: &Config, a: &EvaluateArgs, out: &mut Vec<u8>) -> Result<(), CliError> {
    let scale = PlanScale::new(meters_per_pixel(cfg)?)?;
    let pred = read_pose_records(&read_input(&a.pred)?)?;
    let gt = read_pose_records(&read_input(&a.gt)?)?;
    let samples = compare_poses(&pred.records, &gt.records, &scale)?;
    let summary = summarize(&samples)?;
    if let Some(dir) = &a.out {
        let t = cdf(&samples, ErrorAxis::Translation)?;
        let r = cdf(&samples, ErrorAxis::Rotation)?;
        write_atomic(&dir.join("summary.csv"), summary.to_csv().as_bytes())?;
        write_atomic(&dir.join("samples.csv"), samples_csv(&samples).as_bytes())?;
        write_atomic(&dir.join("cdf.csv"), cdf_csv(&t, &r).as_bytes())?;
    }
    emit(
        out,
        &format!(
            "n {}\nmean {}\nmedian {}\n",
            summary.n,
            summary.mean_cell(),
            summary.median_cell()
        ),
    )
}

pub fn poi_query(cfg: &Config, a: &PoiQueryArgs, out: &mut Vec<u8>) -> Result<(), CliError> {
    let meta = cfg
        .plan_meta
        .as_deref()
        .ok_or_else(|| CliError::config("poi-query needs plan_meta in the config"))?;
    let plan = load_floorplan_from_meta(meta)?;
    let pose = Pose6DoF::new(Vec3::new(a.row, a.col, 0.0), level_camera_orientation(a.heading));
    let hits = pois_near(&plan, &pose, a.radius, a.fov)?;
    let mut text = String::from("poi_id,name,distance_m,bearing_deg\n");
    for h in hits {
        writeln!(text, "{},{},{:.3},{:.1}", h.poi_id, h.name, h.distance, h.bearing).unwrap();
    }
    emit(out, &text)
}

pub fn plot_path(cfg: &Config, a: &PlotPathArgs, out: &mut Vec<u8>) -> Result<(), CliError> {
    let model = SparseModel::read_dir(&a.model)?;
    let (w, h) = plan_size(cfg)?.unwrap_or((u32::MAX, u32::MAX));
    let path = validate_path_in(&model, w, h);
    if path.in_bounds_fraction < 1.0 {
        log::warn!("{:.1}% of the path lies outside the plan", 100.0 * (1.0 - path.in_bounds_fraction));
    }
    match &a.out {
        Some(p) => write_atomic(p, path.to_csv().as_bytes()).map_err(CliError::from),
        None => emit(out, &path.to_csv()),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| {
        CliError::from(FormatError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", parts.join(", "))
}

fn dump_cameras(bytes: &[u8], text: &mut String) -> Result<(), CliError> {
    let cams = read_cameras_bin(bytes)?;
    writeln!(text, "cameras: {}", cams.len()).unwrap();
    for c in cams.values() {
        writeln!(
            text,
            "camera {} {} width {} height {} params {}",
            c.camera_id,
            c.model.name(),
            c.width,
            c.height,
            fmt_list(&c.params)
        )
        .unwrap();
    }
    Ok(())
}

fn dump_images(bytes: &[u8], verbose: bool, text: &mut String) -> Result<(), CliError> {
    let images = read_images_bin(bytes)?;
    writeln!(text, "images: {}", images.len()).unwrap();
    for img in images.values() {
        let observed = img.points2d.iter().filter(|p| p.point3d_id.is_some()).count();
        let c = img.camera_center();
        writeln!(
            text,
            "image {} {} camera {} qvec {} tvec {} center {} points2D {} ({} with 3D)",
            img.image_id,
            img.name,
            img.camera_id,
            fmt_list(&img.qvec.to_array()),
            fmt_list(img.tvec.as_slice()),
            fmt_list(c.as_slice()),
            img.points2d.len(),
            observed
        )
        .unwrap();
        if verbose {
            for (k, p) in img.points2d.iter().enumerate() {
                let id = p.point3d_id.map_or("-".to_string(), |i| i.to_string());
                writeln!(text, "  {k}: ({}, {}) -> {id}", p.xy[0], p.xy[1]).unwrap();
            }
        }
    }
    Ok(())
}

fn dump_points(bytes: &[u8], verbose: bool, text: &mut String) -> Result<(), CliError> {
    let points = read_points3d_bin(bytes)?;
    writeln!(text, "points3D: {}", points.len()).unwrap();
    for p in points.values() {
        writeln!(
            text,
            "point {} xyz {} rgb {:?} error {} track {}",
            p.point3d_id,
            fmt_list(p.xyz.as_slice()),
            p.rgb,
            p.error,
            p.track.len()
        )
        .unwrap();
        if verbose {
            for t in &p.track {
                writeln!(text, "  image {} point2D {}", t.image_id, t.point2d_idx).unwrap();
            }
        }
    }
    Ok(())
}

pub fn inspect(a: &InspectArgs, out: &mut Vec<u8>) -> Result<(), CliError> {
    let mut text = String::new();
    let files: Vec<PathBuf> = if a.path.is_dir() {
        ["cameras.bin", "images.bin", "points3D.bin"]
            .iter()
            .map(|f| a.path.join(f))
            .filter(|p| p.exists())
            .collect()
    } else {
        vec![a.path.clone()]
    };
    if files.is_empty() {
        return Err(CliError::new(
            Category::Parse,
            format!("{}: no cameras.bin, images.bin or points3D.bin found", a.path.display()),
        ));
    }
    for f in files {
        let bytes = read_bytes(&f)?;
        match f.file_name().and_then(|n| n.to_str()) {
            Some("cameras.bin") => dump_cameras(&bytes, &mut text)?,
            Some("images.bin") => dump_images(&bytes, a.verbose, &mut text)?,
            Some("points3D.bin") => dump_points(&bytes, a.verbose, &mut text)?,
            _ => {
                return Err(CliError::new(
                    Category::Parse,
                    format!("{}: expected cameras.bin, images.bin or points3D.bin", f.display()),
                ))
            }
        }
    }
    emit(out, &text)
}
