//! Run manifest and the single writer through which every output file goes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::hex;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub kind: FileKind,
    /// Plot figure the file belongs to, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<String>,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileKind {
    Config,
    Branch,
    Summary,
    Profile,
    Report,
    Arc,
    Loop,
    Plot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    /// Exit code the run ended with.
    pub code: i32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config_hash: String,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
    pub files: Vec<FileEntry>,
    pub metrics: BTreeMap<String, Value>,
}

pub fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Writes files into the output directory and indexes them.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Outputs {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    /// Writing the same name twice replaces the earlier entry.
    pub fn write(&mut self, name: &str, kind: FileKind, figure: Option<&str>, bytes: &[u8]) -> std::io::Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        let entry = FileEntry {
            path: name.to_string(),
            kind,
            figure: figure.map(str::to_string),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        };
        match self.files.iter_mut().find(|f| f.path == name) {
            Some(f) => *f = entry,
            None => self.files.push(entry),
        }
        Ok(())
    }

    pub fn into_files(self) -> Vec<FileEntry> {
        self.files
    }
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self, String> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        std::fs::write(dir.join(MANIFEST_FILE), text)
    }

    /// Every indexed file exists with the recorded size and hash.
    pub fn verify_files(&self, dir: &Path) -> Result<(), String> {
        for f in &self.files {
            let bytes = std::fs::read(dir.join(&f.path)).map_err(|e| format!("{}: {e}", f.path))?;
            if bytes.len() as u64 != f.bytes || sha256_hex(&bytes) != f.sha256 {
                return Err(format!("{} does not match its recorded hash", f.path));
            }
        }
        Ok(())
    }

    pub fn figure_files<'a>(&'a self, figure: &'a str, kind: FileKind) -> impl Iterator<Item = &'a FileEntry> {
        self.files.iter().filter(move |f| f.kind == kind && f.figure.as_deref() == Some(figure))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_tracks_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::create(dir.path()).unwrap();
        out.write("a.txt", FileKind::Report, None, b"one").unwrap();
        out.write("a.txt", FileKind::Report, None, b"two").unwrap();
        assert_eq!(out.files().len(), 1);
        let m = RunManifest {
            tool: "t".into(),
            version: "0".into(),
            subcommand: "verify".into(),
            config_hash: String::new(),
            seed: 0,
            started: 0.0,
            finished: 0.0,
            status: RunStatus::Complete,
            failure: None,
            files: out.into_files(),
            metrics: BTreeMap::new(),
        };
        m.write(dir.path()).unwrap();
        assert_eq!(RunManifest::read(dir.path()).unwrap(), m);
        m.verify_files(dir.path()).unwrap();
        std::fs::write(dir.path().join("a.txt"), b"three").unwrap();
        assert!(m.verify_files(dir.path()).is_err());
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
