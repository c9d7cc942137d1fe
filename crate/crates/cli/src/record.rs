use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::GlobalArgs;

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: PathBuf,
    /// SHA-256 of the file, or of `manifest.json` for a checkpoint directory.
    pub sha256: Option<String>,
}

impl Artifact {
    fn of(path: &Path) -> Self {
        let target = if path.is_dir() { path.join("manifest.json") } else { path.to_path_buf() };
        let sha256 = target.is_file().then(|| interlerp::sha256_file(&target).ok()).flatten();
        Self { path: path.to_path_buf(), sha256 }
    }
}

/// One line of `runs.log`.
#[derive(Debug, Serialize)]
pub struct RunRecord<'a> {
    pub run_id: String,
    pub command: &'a str,
    pub argv: &'a [String],
    pub config_sha256: Option<String>,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
    pub started_unix: u64,
    pub wall_time_s: f64,
    pub exit_status: u8,
}

/// Per-invocation state: global flags plus the artifacts the command
/// touched, written to `runs.log` once the command returns.
pub struct Ctx {
    pub global: GlobalArgs,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    config_sha256: Option<String>,
    started: SystemTime,
    clock: Instant,
}

impl Ctx {
    pub fn new(global: GlobalArgs) -> Self {
        Self { global, inputs: Vec::new(), outputs: Vec::new(), config_sha256: None, started: SystemTime::now(), clock: Instant::now() }
    }

    /// Context for an invocation whose flags could not be parsed.
    pub fn detached(runs_log: PathBuf) -> Self {
        Self::new(GlobalArgs { seed: None, config: None, out: None, overwrite: false, quiet: true, runs_log })
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Records the effective configuration by hash.
    pub fn config<T: Serialize>(&mut self, effective: &T) {
        let json = serde_json::to_vec(effective).expect("configs serialise");
        self.config_sha256 = Some(hex::encode(Sha256::digest(&json)));
    }

    pub fn say(&self, msg: impl std::fmt::Display) {
        if !self.global.quiet {
            println!("{msg}");
        }
    }

    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        self.global.out.clone().ok_or_else(|| CliError::Usage("this command needs --out <DIR>".into()))
    }

    /// Refuses to proceed when any of `files` already exists, unless
    /// `--overwrite` was given.
    pub fn claim(&self, files: &[PathBuf]) -> Result<(), CliError> {
        if self.global.overwrite {
            return Ok(());
        }
        if let Some(f) = files.iter().find(|f| f.exists()) {
            return Err(CliError::Usage(format!("{} already exists; pass --overwrite to replace it", f.display())));
        }
        Ok(())
    }

    pub fn finish(&mut self, command: &str, argv: &[String], exit_status: u8) {
        let started_unix = self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let nanos = self.started.duration_since(UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0);
        let record = RunRecord {
            run_id: format!("{nanos:x}-{:x}", std::process::id()),
            command,
            argv,
            config_sha256: self.config_sha256.take(),
            inputs: self.inputs.iter().map(|p| Artifact::of(p)).collect(),
            outputs: self.outputs.iter().map(|p| Artifact::of(p)).collect(),
            started_unix,
            wall_time_s: self.clock.elapsed().as_secs_f64(),
            exit_status,
        };
        let line = serde_json::to_string(&record).expect("records serialise");
        let appended =
            std::fs::OpenOptions::new().create(true).append(true).open(&self.global.runs_log).and_then(|mut f| writeln!(f, "{line}"));
        if let Err(e) = appended {
            eprintln!("warning: could not append to {}: {e}", self.global.runs_log.display());
        }
    }
}
