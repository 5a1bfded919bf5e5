//! Result files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};

#[derive(Debug, Clone, Serialize)]
struct OutputFile {
    name: String,
    sha256: String,
}

pub struct Outputs {
    dir: PathBuf,
    command: String,
    config_hash: String,
    files: Vec<OutputFile>,
}

impl Outputs {
    pub fn new(dir: &Path, command: &str, cfg: &RunConfig) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config_hash: cfg.hash(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(OutputFile {
            name: name.to_string(),
            sha256: hex(&Sha256::digest(bytes)),
        });
        Ok(())
    }

    /// `{ "command", "config_hash", "result" }`, pretty-printed.
    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<()> {
        let doc = json!({
            "command": self.command,
            "config_hash": self.config_hash,
            "result": result,
        });
        let mut bytes = serde_json::to_vec_pretty(&doc)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner()?;
        self.write(name, &bytes)
    }

    pub fn raw(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        self.write(name, bytes)
    }

    /// Writes `manifest.json`: the full config (defaults filled in), its
    /// hash, the command and the digest of every file written.
    pub fn finish(mut self, cfg: &RunConfig, status: &str) -> Result<()> {
        let doc = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "status": status,
            "config_hash": self.config_hash,
            "config": cfg,
            "outputs": self.files,
        });
        let mut bytes = serde_json::to_vec_pretty(&doc)?;
        bytes.push(b'\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.clear();
        Ok(())
    }
}
