use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

/// Name of the frame list written into the image directory before each run.
pub const FRAME_LIST_FILE: &str = "frames.txt";

/// Everything an SfM run needs to know about one video.
#[derive(Debug, Clone, PartialEq)]
pub struct SfmRequest {
    pub video: PathBuf,
    pub image_dir: PathBuf,
    /// Parent of the numbered `sparse/<k>` model folders.
    pub output_dir: PathBuf,
    /// `(frame index, image file name)` in increasing index order.
    pub frames: Vec<(usize, String)>,
    pub log_path: PathBuf,
}

impl SfmRequest {
    /// Content of the frame list: one `<index> <name>` line per frame.
    pub fn frame_list(&self) -> String {
        let mut s = String::new();
        for (i, name) in &self.frames {
            writeln!(s, "{i} {name}").unwrap();
        }
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExecutorError {
    #[error("could not start `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("`{command}` exited with {status} (log: {})", log.display())]
    Failed {
        command: String,
        status: String,
        log: PathBuf,
    },
    #[error("executor I/O on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid command template `{0}`")]
    Template(String),
    #[error("{0}")]
    Other(String),
}

impl ExecutorError {
    pub fn log_path(&self) -> Option<&Path> {
        match self {
            ExecutorError::Failed { log, .. } => Some(log),
            _ => None,
        }
    }
}

/// Turns an image folder into numbered sparse model folders.
pub trait SfmExecutor: Sync {
    fn run(&self, request: &SfmRequest) -> Result<(), ExecutorError>;
}

/// Runs external programs from argument templates.
///
/// Templates are split on whitespace and each argument has its placeholders
/// substituted; no shell is involved, so paths with spaces stay intact.
/// The optional extraction step sees `{video}`, `{frame_list}` and
/// `{image_dir}`; the SfM step sees `{image_dir}` and `{output_dir}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandExecutor {
    pub extract_template: Option<String>,
    pub sfm_template: String,
}

impl CommandExecutor {
    pub fn new(sfm_template: impl Into<String>) -> Result<Self, ExecutorError> {
        let sfm_template = sfm_template.into();
        if sfm_template.split_whitespace().next().is_none() {
            return Err(ExecutorError::Template(sfm_template));
        }
        Ok(Self {
            extract_template: None,
            sfm_template,
        })
    }

    pub fn with_extract(mut self, template: impl Into<String>) -> Result<Self, ExecutorError> {
        let t = template.into();
        if t.split_whitespace().next().is_none() {
            return Err(ExecutorError::Template(t));
        }
        self.extract_template = Some(t);
        Ok(self)
    }

    fn argv(template: &str, vars: &[(&str, &Path)]) -> Vec<String> {
        template
            .split_whitespace()
            .map(|arg| {
                vars.iter().fold(arg.to_string(), |acc, (key, val)| {
                    acc.replace(&format!("{{{key}}}"), &val.to_string_lossy())
                })
            })
            .collect()
    }

    fn spawn(argv: &[String], log: &Path) -> Result<(), ExecutorError> {
        let command = argv.join(" ");
        let io = |source| ExecutorError::Io {
            path: log.to_path_buf(),
            source,
        };
        let out = std::fs::OpenOptions::new().create(true).append(true).open(log).map_err(io)?;
        let err = out.try_clone().map_err(io)?;
        log::info!("running {command}");
        let status = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::null())
            .stdout(out)
            .stderr(err)
            .status()
            .map_err(|source| ExecutorError::Spawn {
                command: command.clone(),
                source,
            })?;
        if !status.success() {
            return Err(ExecutorError::Failed {
                command,
                status: status.to_string(),
                log: log.to_path_buf(),
            });
        }
        Ok(())
    }
}

impl SfmExecutor for CommandExecutor {
    fn run(&self, req: &SfmRequest) -> Result<(), ExecutorError> {
        File::create(&req.log_path).map_err(|source| ExecutorError::Io {
            path: req.log_path.clone(),
            source,
        })?;
        if let Some(t) = &self.extract_template {
            let list = req.image_dir.join(FRAME_LIST_FILE);
            let argv = Self::argv(
                t,
                &[("video", &req.video), ("frame_list", &list), ("image_dir", &req.image_dir)],
            );
            Self::spawn(&argv, &req.log_path)?;
        }
        let argv = Self::argv(
            &self.sfm_template,
            &[("image_dir", &req.image_dir), ("output_dir", &req.output_dir)],
        );
        Self::spawn(&argv, &req.log_path)
    }
}
