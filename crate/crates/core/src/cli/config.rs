use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use crate::eval::{LossMode, LossParams, DEFAULT_BETA, DEFAULT_S_Q, DEFAULT_S_X};
use crate::georeg::{RansacParams, RegistrationMethod, DEFAULT_RANSAC_THRESHOLD};
use crate::pipeline::{
    AnnotateOptions, DatasetSplit, DEFAULT_ALIGNMENT_THRESHOLD, DEFAULT_FRAME_INTERVAL, DEFAULT_MAX_DENSIFY_ROUNDS,
};

/// Run configuration, loaded from TOML and patched by `--set key=value`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub floor: String,
    pub plan_meta: Option<PathBuf>,
    #[serde(deserialize_with = "date")]
    pub train_cutoff: NaiveDate,
    #[serde(deserialize_with = "date")]
    pub test_start: NaiveDate,
    pub frame_interval: usize,
    pub alignment_threshold: f64,
    pub max_densify_rounds: usize,
    /// Use RANSAC instead of plain least squares for registration.
    pub robust: bool,
    pub ransac_threshold: f64,
    pub ransac_iters: usize,
    pub seed: u64,
    pub beta: f64,
    pub s_x: f64,
    pub s_q: f64,
    pub learnable: bool,
    /// Overrides the plan meta value when set.
    pub meters_per_pixel: Option<f64>,
    pub sfm_command: Option<String>,
    pub extract_command: Option<String>,
    pub jobs: Option<usize>,
}

impl Default for Config {
    fn default() -> Self {
        let split = DatasetSplit::default();
        Self {
            floor: "floor".into(),
            plan_meta: None,
            train_cutoff: split.train_cutoff(),
            test_start: split.test_start(),
            frame_interval: DEFAULT_FRAME_INTERVAL,
            alignment_threshold: DEFAULT_ALIGNMENT_THRESHOLD,
            max_densify_rounds: DEFAULT_MAX_DENSIFY_ROUNDS,
            robust: false,
            ransac_threshold: DEFAULT_RANSAC_THRESHOLD,
            ransac_iters: RansacParams::default().max_iters,
            seed: 0,
            beta: DEFAULT_BETA,
            s_x: DEFAULT_S_X,
            s_q: DEFAULT_S_Q,
            learnable: false,
            meters_per_pixel: None,
            sfm_command: None,
            extract_command: None,
            jobs: None,
        }
    }
}

/// Accepts both TOML dates (`2024-04-15`) and quoted strings.
fn date<'de, D: serde::Deserializer<'de>>(d: D) -> Result<NaiveDate, D::Error> {
    let text = match toml::Value::deserialize(d)? {
        toml::Value::String(s) => s,
        toml::Value::Datetime(dt) => dt.to_string(),
        other => return Err(serde::de::Error::custom(format!("expected a date, found {other}"))),
    };
    NaiveDate::parse_from_str(&text, "%Y-%m-%d")
        .map_err(|e| serde::de::Error::custom(format!("bad date `{text}`: {e}")))
}

fn parse_override(item: &str) -> Result<(String, toml::Value), String> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| format!("--set expects key=value, got `{item}`"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(format!("--set expects key=value, got `{item}`"));
    }
    let raw = raw.trim();
    // bare words such as file paths are taken as strings
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

impl Config {
    /// Reads `path` (if any), applies overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, String> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                text.parse::<toml::Table>().map_err(|e| format!("{}: {e}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (k, v) = parse_override(item)?;
            table.insert(k, v);
        }
        let mut cfg: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| e.message().to_string())?;
        // relative plan meta paths resolve against the config file's folder
        if let (Some(meta), Some(cfg_path)) = (&cfg.plan_meta, path) {
            if meta.is_relative() {
                if let Some(dir) = cfg_path.parent() {
                    cfg.plan_meta = Some(dir.join(meta));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.floor.trim().is_empty() {
            return Err("floor must not be empty".into());
        }
        self.split()?;
        if self.frame_interval == 0 {
            return Err("frame_interval must be at least 1".into());
        }
        if !(self.alignment_threshold > 0.0 && self.alignment_threshold <= 1.0) {
            return Err(format!("alignment_threshold {} outside (0, 1]", self.alignment_threshold));
        }
        if !(self.ransac_threshold.is_finite() && self.ransac_threshold > 0.0) {
            return Err(format!("ransac_threshold must be positive, got {}", self.ransac_threshold));
        }
        if self.ransac_iters == 0 {
            return Err("ransac_iters must be at least 1".into());
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.s_x.is_finite() && self.s_q.is_finite()) {
            return Err("s_x and s_q must be finite".into());
        }
        if let Some(m) = self.meters_per_pixel {
            if !(m.is_finite() && m > 0.0) {
                return Err(format!("meters_per_pixel must be positive, got {m}"));
            }
        }
        if self.jobs == Some(0) {
            return Err("jobs must be at least 1".into());
        }
        for (name, cmd) in [("sfm_command", &self.sfm_command), ("extract_command", &self.extract_command)] {
            if cmd.as_ref().is_some_and(|c| c.trim().is_empty()) {
                return Err(format!("{name} must not be empty"));
            }
        }
        Ok(())
    }

    pub fn split(&self) -> Result<DatasetSplit, String> {
        DatasetSplit::new(self.train_cutoff, self.test_start).map_err(|e| e.to_string())
    }

    pub fn registration(&self) -> RegistrationMethod {
        if self.robust {
            RegistrationMethod::Ransac(RansacParams {
                threshold: self.ransac_threshold,
                max_iters: self.ransac_iters,
                seed: self.seed,
            })
        } else {
            RegistrationMethod::LeastSquares
        }
    }

    pub fn annotate_options(&self, plan_size: Option<(u32, u32)>) -> AnnotateOptions {
        AnnotateOptions {
            alignment_threshold: self.alignment_threshold,
            max_densify_rounds: self.max_densify_rounds,
            registration: self.registration(),
            plan_size,
        }
    }

    pub fn loss_params(&self) -> LossParams {
        LossParams {
            beta: self.beta,
            s_x: self.s_x,
            s_q: self.s_q,
            mode: if self.learnable {
                LossMode::Learnable
            } else {
                LossMode::FixedBeta
            },
        }
    }

    pub fn jobs(&self) -> usize {
        self.jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
    }
}
