//! Run manifest: the resolved inputs and every file a subcommand wrote.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context as _, Result};
use serde::Serialize;

use crate::config::Config;

#[derive(Serialize)]
pub struct RunManifest<'a> {
    pub tool_version: &'static str,
    pub subcommand: &'a str,
    pub config_source: &'a str,
    /// Full resolved (section, key) → SI value snapshot.
    pub config: &'a Config,
    pub master_seed: Option<u64>,
    pub shots: Option<u64>,
    pub workers: usize,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

/// Collects output files as they are written, then drops the manifest
/// alongside them.
pub struct OutputSink {
    dir: PathBuf,
    written: Vec<String>,
    started: Instant,
}

impl OutputSink {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new(), started: Instant::now() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn finish(
        self,
        subcommand: &str,
        config: &Config,
        seed: Option<u64>,
        shots: Option<u64>,
        workers: usize,
    ) -> Result<()> {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config_source: &config.source,
            config,
            master_seed: seed,
            shots,
            workers,
            outputs: self.written.clone(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = self.dir.join("manifest.json");
        let body = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, body)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
