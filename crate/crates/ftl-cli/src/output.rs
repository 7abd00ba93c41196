use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

/// Output files collected in a hidden directory next to the destination.
/// Dropping it without [`Staging::publish`] removes everything written.
pub struct Staging {
    dir: TempDir,
    dest: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Staging {
    pub fn new(dest: &Path) -> Result<Self> {
        let parent = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).with_context(|| format!("cannot create {}", parent.display()))?;
        if dest.exists() && !dest.join(MANIFEST).is_file() {
            bail!(
                "output directory {} exists and does not hold a previous run; refusing to replace it",
                dest.display()
            );
        }
        let dir = tempfile::Builder::new()
            .prefix(".ftl-staging-")
            .tempdir_in(&parent)
            .with_context(|| format!("cannot create a staging directory in {}", parent.display()))?;
        Ok(Self {
            dir,
            dest: dest.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.path().join(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.artifacts.push(Artifact {
            file: name.into(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes the manifest, then moves the directory into place, replacing
    /// a previous run at the destination.
    pub fn publish(mut self, manifest: impl FnOnce(Vec<Artifact>) -> serde_json::Value) -> Result<PathBuf> {
        let artifacts = std::mem::take(&mut self.artifacts);
        let value = manifest(artifacts);
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        fs::write(self.dir.path().join(MANIFEST), text)?;
        if self.dest.exists() {
            fs::remove_dir_all(&self.dest)
                .with_context(|| format!("cannot replace previous run in {}", self.dest.display()))?;
        }
        let staged = self.dir.keep();
        fs::rename(&staged, &self.dest).with_context(|| format!("cannot move output into {}", self.dest.display()))?;
        Ok(self.dest)
    }
}

/// Comma-separated table with a header row.
pub struct Csv {
    buf: Vec<u8>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = Vec::new();
        writeln!(buf, "{}", header.join(",")).expect("write to memory");
        Self { buf }
    }

    pub fn row(&mut self, cells: &[&dyn std::fmt::Display]) {
        let line: Vec<String> = cells.iter().map(|c| c.to_string()).collect();
        writeln!(self.buf, "{}", line.join(",")).expect("write to memory");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dropped_staging_leaves_nothing() {
        let root = tempfile::tempdir().unwrap();
        let dest = root.path().join("run");
        {
            let mut s = Staging::new(&dest).unwrap();
            s.write("a.csv", b"x\n1\n").unwrap();
        }
        assert!(!dest.exists());
        assert_eq!(fs::read_dir(root.path()).unwrap().count(), 0);
    }

    #[test]
    fn publish_replaces_previous_run_only() {
        let root = tempfile::tempdir().unwrap();
        let dest = root.path().join("run");
        for body in [&b"1\n"[..], &b"2\n"[..]] {
            let mut s = Staging::new(&dest).unwrap();
            s.write("a.csv", body).unwrap();
            s.publish(|a| serde_json::json!({ "artifacts": a })).unwrap();
        }
        assert_eq!(fs::read(dest.join("a.csv")).unwrap(), b"2\n");
        let foreign = root.path().join("foreign");
        fs::create_dir(&foreign).unwrap();
        assert!(Staging::new(&foreign).is_err());
    }

    #[test]
    fn csv_rows() {
        let mut c = Csv::new(&["t", "v"]);
        c.row(&[&0.5, &3]);
        assert_eq!(c.into_bytes(), b"t,v\n0.5,3\n");
    }
}
