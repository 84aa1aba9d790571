//! Line-oriented dataset formats: `geo_coord.txt`, `image_train_all.txt`
//! and `camera2world_6DoF.txt`.

use std::fmt::Write as _;

use super::model::SparseModel;
use super::FormatError;
use crate::geometry::{Quaternion, Vec3};

pub const POSE_RECORD_HEADER: &str = "IMG_PATH, IMG_ID, QW, QX, QY, QZ, TX, TY, TZ";
pub const CAMERA2WORLD_HEADER: &str = "IMG_NAME, QW, QX, QY, QZ, TX, TY, TZ";

/// One hand-placed anchor: image name and its floor-plan pixel position.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorCorrespondence {
    pub image_name: String,
    /// Pixels from the top edge.
    pub plan_row: f64,
    /// Pixels from the left edge.
    pub plan_col: f64,
    pub plan_z: f64,
}

fn line_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Line {
        line,
        msg: msg.into(),
    }
}

fn parse_real(field: &str, line: usize, what: &str) -> Result<f64, FormatError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| line_err(line, format!("{what}: {field:?} is not a number")))?;
    if !v.is_finite() {
        return Err(line_err(line, format!("{what}: {field:?} is not finite")));
    }
    Ok(v)
}

/// Lines are `[<ordinal>.] <name> <row> <col> <z>`; blank lines are skipped.
pub fn parse_geo_coord(text: &str) -> Result<Vec<AnchorCorrespondence>, FormatError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let mut fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if let Some(ord) = fields[0].strip_suffix('.') {
            if !ord.is_empty() && ord.chars().all(|c| c.is_ascii_digit()) {
                fields.remove(0);
            }
        }
        if fields.len() != 4 {
            return Err(line_err(
                line,
                format!("expected `<name> <row> <col> <z>`, found {} field(s)", fields.len()),
            ));
        }
        let plan_row = parse_real(fields[1], line, "row")?;
        let plan_col = parse_real(fields[2], line, "col")?;
        let plan_z = parse_real(fields[3], line, "z")?;
        if plan_row < 0.0 || plan_col < 0.0 {
            return Err(line_err(line, "plan coordinates must be non-negative"));
        }
        out.push(AnchorCorrespondence {
            image_name: fields[0].to_string(),
            plan_row,
            plan_col,
            plan_z,
        });
    }
    Ok(out)
}

/// One line of `image_train_all.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseRecord {
    pub img_path: String,
    pub img_id: u64,
    pub q: Quaternion,
    pub t: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseRecordFile {
    /// Free-text building banner on the first line.
    pub banner: String,
    pub records: Vec<PoseRecord>,
}

fn same_header(line: &str, header: &str) -> bool {
    let norm = |s: &str| {
        s.split(',')
            .map(|f| f.trim().to_ascii_uppercase())
            .collect::<Vec<_>>()
    };
    norm(line) == norm(header)
}

pub fn read_pose_records(text: &str) -> Result<PoseRecordFile, FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, banner) = lines
        .next()
        .ok_or_else(|| line_err(1, "missing building banner"))?;
    let (hline, header) = lines
        .next()
        .ok_or_else(|| line_err(2, "missing column header"))?;
    if !same_header(header, POSE_RECORD_HEADER) {
        return Err(line_err(
            hline,
            format!("expected header `{POSE_RECORD_HEADER}`"),
        ));
    }
    let mut records = Vec::new();
    for (line, raw) in lines {
        let f: Vec<&str> = raw.split(',').map(str::trim).collect();
        if f.len() != 9 {
            return Err(line_err(line, format!("expected 9 fields, found {}", f.len())));
        }
        if f[0].is_empty() {
            return Err(line_err(line, "empty IMG_PATH"));
        }
        let img_id = f[1]
            .parse()
            .map_err(|_| line_err(line, format!("IMG_ID {:?} is not an integer", f[1])))?;
        let r = |i: usize, what: &str| parse_real(f[i], line, what);
        let q = Quaternion::new(r(2, "QW")?, r(3, "QX")?, r(4, "QY")?, r(5, "QZ")?);
        if (q.norm() - 1.0).abs() > 1e-4 {
            return Err(line_err(line, format!("quaternion {q} is not unit-norm")));
        }
        records.push(PoseRecord {
            img_path: f[0].to_string(),
            img_id,
            q,
            t: Vec3::new(r(6, "TX")?, r(7, "TY")?, r(8, "TZ")?),
        });
    }
    Ok(PoseRecordFile {
        banner: banner.trim_end().to_string(),
        records,
    })
}

/// Emits records in ascending `img_id` with reals at 8 decimals.
pub fn write_pose_records(records: &[PoseRecord], banner: &str) -> String {
    let mut sorted: Vec<&PoseRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.img_id);
    let mut out = String::new();
    writeln!(out, "{}", banner.trim_end()).unwrap();
    writeln!(out, "{POSE_RECORD_HEADER}").unwrap();
    for r in sorted {
        writeln!(
            out,
            "{},  {}, {:.8}, {:.8}, {:.8}, {:.8}, {:.8}, {:.8}, {:.8}",
            r.img_path, r.img_id, r.q.w, r.q.x, r.q.y, r.q.z, r.t.x, r.t.y, r.t.z
        )
        .unwrap();
    }
    out
}

/// Camera-to-world pose of one image: orientation and camera center.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera2WorldRecord {
    pub image_name: String,
    pub q: Quaternion,
    pub t: Vec3,
}

/// One line per registered image, ascending image id.
pub fn write_camera2world_6dof(model: &SparseModel) -> String {
    let mut out = String::new();
    writeln!(out, "{CAMERA2WORLD_HEADER}").unwrap();
    for img in model.images.values() {
        let pose = img.pose();
        let q = pose.orientation.normalize().unwrap_or(Quaternion::IDENTITY);
        let c = pose.position;
        writeln!(
            out,
            "{}, {:.8}, {:.8}, {:.8}, {:.8}, {:.8}, {:.8}, {:.8}",
            img.name, q.w, q.x, q.y, q.z, c.x, c.y, c.z
        )
        .unwrap();
    }
    out
}

pub fn read_camera2world_6dof(text: &str) -> Result<Vec<Camera2WorldRecord>, FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if same_header(h, CAMERA2WORLD_HEADER) => {}
        Some((line, _)) => {
            return Err(line_err(line, format!("expected header `{CAMERA2WORLD_HEADER}`")))
        }
        None => return Err(line_err(1, "missing column header")),
    }
    lines
        .map(|(line, raw)| {
            let f: Vec<&str> = raw.split(',').map(str::trim).collect();
            if f.len() != 8 {
                return Err(line_err(line, format!("expected 8 fields, found {}", f.len())));
            }
            let r = |i: usize| parse_real(f[i], line, CAMERA2WORLD_HEADER.split(", ").nth(i).unwrap());
            Ok(Camera2WorldRecord {
                image_name: f[0].to_string(),
                q: Quaternion::new(r(1)?, r(2)?, r(3)?, r(4)?),
                t: Vec3::new(r(5)?, r(6)?, r(7)?),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const GEO_COORD: &str = "\
1. HAND_20231220_141254_frame_000.3s.jpg 1052 2113 0

2. HAND_20231220_141254_frame_019.3s.jpg 464 2082 0

7. HAND_20231220_141254_frame_113.1s.jpg 450 915 0
";

    #[test]
    fn geo_coord_listing() {
        let a = parse_geo_coord(GEO_COORD).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(
            a[0],
            AnchorCorrespondence {
                image_name: "HAND_20231220_141254_frame_000.3s.jpg".into(),
                plan_row: 1052.0,
                plan_col: 2113.0,
                plan_z: 0.0,
            }
        );
        assert_eq!(a[2].image_name, "HAND_20231220_141254_frame_113.1s.jpg");
        assert_eq!((a[2].plan_row, a[2].plan_col, a[2].plan_z), (450.0, 915.0, 0.0));
    }

    #[test]
    fn geo_coord_without_ordinals_and_empty() {
        assert!(parse_geo_coord("").unwrap().is_empty());
        let a = parse_geo_coord("x.jpg 1.5 2 0\n").unwrap();
        assert_eq!(a[0].plan_row, 1.5);
    }

    #[test]
    fn geo_coord_errors_carry_line_numbers() {
        let e = parse_geo_coord("a.jpg 1 2 0\nb.jpg 1 two 0\n").unwrap_err();
        assert!(matches!(e, FormatError::Line { line: 2, .. }), "{e}");
        let e = parse_geo_coord("\n\n3. b.jpg 1 2\n").unwrap_err();
        assert!(matches!(e, FormatError::Line { line: 3, .. }), "{e}");
    }

    const TRAIN_EXCERPT: &str = "\
Lehigh Health Science and Technology (HST) Building.

IMG_PATH, IMG_ID, QW, QX, QY, QZ, TX, TY, TZ

20231220_141254_proj/HAND_20231220_141254/HAND_20231220_141254_frame_153.4s.jpg,  541, 0.46282440, -0.48897273, 0.52665017, -0.51897865, 602.36415529, 2137.65949852, -0.94367326

20231220_141254_proj/HAND_20231220_141254/HAND_20231220_141254_frame_153.1s.jpg,  540, 0.46784778, -0.48610208, 0.51996406, -0.52388988, 592.78433312, 2137.81172284, -1.24991543
";

    #[test]
    fn pose_records_excerpt() {
        let f = read_pose_records(TRAIN_EXCERPT).unwrap();
        assert_eq!(f.records.len(), 2);
        let r = &f.records[0];
        assert_eq!(r.img_id, 541);
        assert!(r.img_path.ends_with("frame_153.4s.jpg"));
        assert_eq!(r.q, Quaternion::new(0.46282440, -0.48897273, 0.52665017, -0.51897865));
        assert_eq!(r.t, Vec3::new(602.36415529, 2137.65949852, -0.94367326));

        let written = write_pose_records(&f.records, &f.banner);
        // ascending id on output
        let lines: Vec<&str> = written.lines().collect();
        assert!(lines[2].contains("frame_153.1s.jpg,  540, 0.46784778"));
        assert_eq!(read_pose_records(&written).unwrap().records.len(), 2);
    }

    #[test]
    fn pose_records_empty_section() {
        let f = read_pose_records(&format!("banner\n{POSE_RECORD_HEADER}\n")).unwrap();
        assert!(f.records.is_empty());
        assert_eq!(f.banner, "banner");
    }

    #[test]
    fn pose_records_errors() {
        assert!(matches!(
            read_pose_records("banner\n"),
            Err(FormatError::Line { line: 2, .. })
        ));
        assert!(matches!(
            read_pose_records("banner\nIMG, ID\n"),
            Err(FormatError::Line { line: 2, .. })
        ));
        let bad = format!("banner\n{POSE_RECORD_HEADER}\na.jpg, 1, 1, 0, 0, 0, 1, 2\n");
        assert!(matches!(
            read_pose_records(&bad),
            Err(FormatError::Line { line: 3, .. })
        ));
    }

    #[test]
    fn camera2world_empty_model() {
        let text = write_camera2world_6dof(&SparseModel::default());
        assert_eq!(text, format!("{CAMERA2WORLD_HEADER}\n"));
        assert!(read_camera2world_6dof(&text).unwrap().is_empty());
    }
}
