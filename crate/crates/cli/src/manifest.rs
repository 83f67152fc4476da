use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use spectral_relevance::io::write_atomic;

/// Record of one command invocation, stored next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub tool_version: String,
    pub config: Value,
    pub seeds: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub jobs: Option<usize>,
    pub started_unix: u64,
    pub wall_clock_secs: f64,
}

pub struct ManifestBuilder {
    command: String,
    jobs: Option<usize>,
    started_unix: u64,
    start: Instant,
}

impl ManifestBuilder {
    pub fn start(command: &str, jobs: Option<usize>) -> Self {
        Self {
            command: command.to_string(),
            jobs,
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            start: Instant::now(),
        }
    }

    pub fn finish(
        self,
        path: &Path,
        config: Value,
        seeds: Value,
        inputs: Vec<PathBuf>,
        outputs: Vec<PathBuf>,
    ) -> anyhow::Result<()> {
        let manifest = RunManifest {
            command: self.command,
            argv: std::env::args().collect(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seeds,
            inputs,
            outputs,
            jobs: self.jobs,
            started_unix: self.started_unix,
            wall_clock_secs: self.start.elapsed().as_secs_f64(),
        };
        write_atomic(path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        Ok(())
    }
}

/// `<file>.manifest.json` beside a single output file.
pub fn beside(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}
