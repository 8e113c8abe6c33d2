//! Output directories that either complete with a manifest or leave nothing
//! behind.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Files written by one command. Dropping an unfinished set deletes every
/// file it wrote, and the directory too if this command created it.
pub struct OutputSet {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
    finished: bool,
}

impl OutputSet {
    pub fn create(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(OutputSet {
            dir: dir.to_path_buf(),
            created_dir,
            files: Vec::new(),
            finished: false,
        })
    }

    /// Registers `name` for cleanup and returns its full path.
    pub fn path(&mut self, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        if !self.files.contains(&path) {
            self.files.push(path.clone());
        }
        path
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Writes the manifest (every file with its SHA-256) and keeps the
    /// outputs.
    pub fn finish(mut self, command: &str, config_text: Option<&str>, seed: Option<u64>) -> Result<PathBuf> {
        let mut files = Vec::new();
        let mut names: Vec<&PathBuf> = self.files.iter().collect();
        names.sort();
        for path in names {
            let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
            let name = path.strip_prefix(&self.dir).unwrap_or(path).display().to_string();
            files.push(json!({ "path": name, "sha256": sha256_hex(&bytes), "bytes": bytes.len() }));
        }
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "config_sha256": config_text.map(|t| sha256_hex(t.as_bytes())),
            "config": config_text,
            "files": files,
        });
        let path = self.path(MANIFEST);
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        self.finished = true;
        Ok(path)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if self.finished {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}
