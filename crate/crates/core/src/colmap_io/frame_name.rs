use std::fmt;
use std::sync::LazyLock;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use regex::Regex;

use super::FormatError;

static FRAME_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(HAND|DJI)(_pad)?_(\d{8})_(\d{6})_frame_(\d{3}|[1-9]\d{3,})\.(\d)s\.([A-Za-z0-9]+)$",
    )
    .unwrap()
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaptureMode {
    Hand,
    Dji,
}

impl CaptureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CaptureMode::Hand => "HAND",
            CaptureMode::Dji => "DJI",
        }
    }
}

/// Parsed `<MODE>[_pad]_<YYYYMMDD>_<HHMMSS>_frame_<SSS.S>s.<ext>`.
///
/// The frame offset is kept in tenths of a second so that formatting
/// reproduces the original name exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FrameName {
    pub mode: CaptureMode,
    pub padded: bool,
    pub recorded_at: NaiveDateTime,
    pub tenths: u64,
    pub extension: String,
}

impl FrameName {
    pub fn frame_seconds(&self) -> f64 {
        self.tenths as f64 / 10.0
    }

    /// `HAND_20231220_141254` style prefix shared by the video and its frames.
    pub fn video_stem(&self) -> String {
        format!(
            "{}{}_{}",
            self.mode.as_str(),
            if self.padded { "_pad" } else { "" },
            self.recorded_at.format("%Y%m%d_%H%M%S")
        )
    }
}

impl fmt::Display for FrameName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}_frame_{:03}.{}s.{}",
            self.video_stem(),
            self.tenths / 10,
            self.tenths % 10,
            self.extension
        )
    }
}

pub fn parse_frame_name(name: &str) -> Result<FrameName, FormatError> {
    let err = |msg: &str| FormatError::FrameName {
        name: name.to_string(),
        msg: msg.to_string(),
    };
    let caps = FRAME_RE
        .captures(name)
        .ok_or_else(|| err("does not match <MODE>[_pad]_<YYYYMMDD>_<HHMMSS>_frame_<SSS.S>s.<ext>"))?;
    let mode = match &caps[1] {
        "HAND" => CaptureMode::Hand,
        _ => CaptureMode::Dji,
    };
    let date = NaiveDate::parse_from_str(&caps[3], "%Y%m%d").map_err(|_| err("invalid date"))?;
    let time = NaiveTime::parse_from_str(&caps[4], "%H%M%S").map_err(|_| err("invalid time"))?;
    let whole: u64 = caps[5].parse().map_err(|_| err("frame seconds overflow"))?;
    let tenth: u64 = caps[6].parse().unwrap();
    Ok(FrameName {
        mode,
        padded: caps.get(2).is_some(),
        recorded_at: date.and_time(time),
        tenths: whole
            .checked_mul(10)
            .and_then(|v| v.checked_add(tenth))
            .ok_or_else(|| err("frame seconds overflow"))?,
        extension: caps[7].to_string(),
    })
}
