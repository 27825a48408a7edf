//! Run-directory bookkeeping: every successful run leaves a resolved config
//! snapshot, the seed, and sha256 checksums of all written artifacts.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub struct RunDir {
    root: PathBuf,
    artifacts: BTreeMap<String, String>,
    seed: u64,
}

impl RunDir {
    pub fn create(root: &Path, seed: u64, resolved_config: &str) -> Result<Self> {
        std::fs::create_dir_all(root)
            .with_context(|| format!("creating output dir {}", root.display()))?;
        let mut dir = Self { root: root.to_path_buf(), artifacts: BTreeMap::new(), seed };
        dir.write_text("config_resolved.toml", resolved_config)?;
        Ok(dir)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn checksum(path: &Path) -> Result<String> {
        let bytes =
            std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        Ok(format!("{:x}", hasher.finalize()))
    }

    /// Record an artifact written by someone else.
    pub fn record(&mut self, name: &str) -> Result<()> {
        let digest = Self::checksum(&self.path(name))?;
        self.artifacts.insert(name.to_string(), digest);
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, content)
            .with_context(|| format!("writing {}", path.display()))?;
        self.record(name)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("value serializes");
        self.write_text(name, &text)
    }

    pub fn write_jsonl<T: Serialize>(&mut self, name: &str, items: &[T]) -> Result<()> {
        let path = self.path(name);
        contextsim_core::io::write_jsonl(&path, items)
            .with_context(|| format!("writing {}", path.display()))?;
        self.record(name)
    }

    /// Finalize the run: manifest with seed + checksums. Exit status 0 is
    /// only reached through here.
    pub fn finish(mut self) -> Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            seed: u64,
            artifacts: &'a BTreeMap<String, String>,
        }
        let manifest = Manifest { seed: self.seed, artifacts: &self.artifacts };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let path = self.path("manifest.json");
        std::fs::write(&path, text)
            .with_context(|| format!("writing {}", path.display()))?;
        self.artifacts.clear();
        Ok(())
    }
}

/// Write a small CSV (no quoting; values must be separator-free).
pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
