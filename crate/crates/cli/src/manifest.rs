use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

/// Provenance record written next to a command's primary output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Full argument vector; rerunning it reproduces the outputs.
    pub argv: Vec<String>,
    /// Resolved parameters, defaults included.
    pub parameters: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub duration_seconds: f64,
    pub summary: Value,
}

pub struct Run {
    command: &'static str,
    started: Instant,
}

impl Run {
    pub fn start(command: &'static str) -> Self {
        Self { command, started: Instant::now() }
    }

    /// Writes the manifest as `<primary>.manifest.json`.
    pub fn finish(
        self,
        parameters: impl Serialize,
        inputs: Vec<PathBuf>,
        outputs: Vec<PathBuf>,
        seed: Option<u64>,
        summary: Value,
    ) -> anyhow::Result<()> {
        let primary = outputs.first().cloned().expect("at least one output");
        let manifest = RunManifest {
            command: self.command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            argv: std::env::args().collect(),
            parameters: serde_json::to_value(parameters)?,
            inputs,
            outputs,
            seed,
            duration_seconds: self.started.elapsed().as_secs_f64(),
            summary,
        };
        write_json(&manifest_path(&primary), &manifest)
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}
