//! Per-run manifest: resolved configuration plus SHA-256 of every artifact.
//! The creation time lives here and nowhere else.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::commands::CliError;

/// Run manifest file name; per command so stages sharing `--out` keep theirs.
pub fn run_manifest_file(command: &str) -> String {
    format!("run_manifest_{command}.json")
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    format_version: u32,
    command: &'a str,
    created_unix_s: u64,
    execution: &'static str,
    threads: Option<usize>,
    config: &'a serde_json::Value,
    /// Path relative to the output directory → SHA-256 hex.
    artifacts: BTreeMap<String, String>,
}

pub struct Artifacts {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Writes `contents` to `rel` under the output root and records it.
    pub fn write(&mut self, rel: &str, contents: &str) -> Result<(), CliError> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    /// Records a file some other writer produced under the root.
    pub fn record(&mut self, rel: &str) {
        self.files.push(self.path(rel));
    }

    pub fn finish(self, command: &str, config: &impl Serialize, exec: evolm::exec::Execution) -> Result<(), CliError> {
        let mut artifacts = BTreeMap::new();
        for f in &self.files {
            let bytes = std::fs::read(f).map_err(|e| CliError::io(f, e))?;
            let rel = f.strip_prefix(&self.root).unwrap_or(f).to_string_lossy().replace('\\', "/");
            artifacts.insert(rel, hex::encode(Sha256::digest(&bytes)));
        }
        let config = serde_json::to_value(config).map_err(evolm::Error::from)?;
        let manifest = RunManifest {
            tool: "evolm",
            version: env!("CARGO_PKG_VERSION"),
            format_version: evolm::FORMAT_VERSION,
            command,
            created_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            execution: if exec.is_parallel() { "parallel" } else { "sequential" },
            threads: evolm::exec::threads_from_env(),
            config: &config,
            artifacts,
        };
        let path = self.path(&run_manifest_file(command));
        let text = serde_json::to_string_pretty(&manifest).map_err(evolm::Error::from)?;
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}
