use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

/// Record written next to every output so a run can be repeated exactly.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub args: Vec<String>,
    pub config: Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub report: Option<Value>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            args: std::env::args().collect(),
            config: Value::Null,
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            report: None,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn finish(&mut self, elapsed: Duration) {
        self.wall_clock_seconds = elapsed.as_secs_f64();
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// `out.raw` -> `out.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    output.with_extension("manifest.json")
}
