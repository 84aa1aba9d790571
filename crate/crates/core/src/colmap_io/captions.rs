//! `*_output.csv` caption files: `image_id,image_file,caption` with RFC-4180 quoting.

use super::FormatError;

const HEADER: [&str; 3] = ["image_id", "image_file", "caption"];

#[derive(Debug, Clone, PartialEq)]
pub struct CaptionRecord {
    pub image_id: u64,
    pub image_file: String,
    pub caption: String,
}

fn csv_err(e: csv::Error) -> FormatError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    let msg = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} columns, found {len} (unquoted comma in caption?)"),
        _ => e.to_string(),
    };
    FormatError::Line { line, msg }
}

pub fn parse_captions_csv(text: &str) -> Result<Vec<CaptionRecord>, FormatError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(csv_err)?;
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != HEADER {
        return Err(FormatError::Line {
            line: 1,
            msg: format!("expected header `{}`, found `{}`", HEADER.join(","), names.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let image_id = rec[0].trim().parse().map_err(|_| FormatError::Line {
            line,
            msg: format!("image_id {:?} is not an integer", &rec[0]),
        })?;
        let image_file = rec[1].trim().to_string();
        if image_file.is_empty() {
            return Err(FormatError::Line {
                line,
                msg: "empty image_file".into(),
            });
        }
        out.push(CaptionRecord {
            image_id,
            image_file,
            caption: rec[2].to_string(),
        });
    }
    Ok(out)
}

pub fn write_captions_csv(records: &[CaptionRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).unwrap();
    for r in records {
        w.write_record([r.image_id.to_string().as_str(), &r.image_file, &r.caption])
            .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}
