//! Output files are written to a scratch directory next to `--out` and only
//! moved into place once the whole command has succeeded.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

use crate::settings::Settings;

pub const MANIFEST: &str = "manifest.json";

pub struct Staging {
    out: PathBuf,
    dir: TempDir,
    written: BTreeMap<String, String>,
}

impl Staging {
    pub fn new(out: &Path) -> Result<Staging> {
        let parent = match out.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        std::fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
        let dir = tempfile::Builder::new()
            .prefix(".craft-staging-")
            .tempdir_in(&parent)
            .with_context(|| format!("creating a staging directory in {}", parent.display()))?;
        Ok(Staging { out: out.to_path_buf(), dir, written: BTreeMap::new() })
    }

    pub fn write(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.path().join(name);
        std::fs::write(&path, content).with_context(|| format!("writing {name}"))?;
        self.written.insert(name.to_string(), sha256(content.as_bytes()));
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = craft_core::canonical::to_string(value)?;
        self.write(name, &text)
    }

    /// Writes the manifest and moves every file into the output directory.
    pub fn commit(mut self, command: &str, settings: &Settings, inputs: &[&Path]) -> Result<Vec<PathBuf>> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: settings.seed,
            settings,
            inputs: inputs
                .iter()
                .map(|p| Ok((p.display().to_string(), sha256(&std::fs::read(p)?))))
                .collect::<std::io::Result<_>>()
                .context("hashing inputs")?,
            outputs: self.written.clone(),
        };
        self.write_json(MANIFEST, &manifest)?;
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let mut moved = Vec::new();
        for name in self.written.keys() {
            let target = self.out.join(name);
            std::fs::rename(self.dir.path().join(name), &target)
                .with_context(|| format!("moving {name} into {}", self.out.display()))?;
            moved.push(target);
        }
        Ok(moved)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    seed: u64,
    settings: &'a Settings,
    /// Path as given on the command line → SHA-256 of its content.
    inputs: BTreeMap<String, String>,
    /// File name → SHA-256; the manifest itself is not listed.
    outputs: BTreeMap<String, String>,
}

pub fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dropped_staging_leaves_nothing() {
        let root = tempfile::tempdir().unwrap();
        let out = root.path().join("out");
        {
            let mut s = Staging::new(&out).unwrap();
            s.write("a.txt", "x").unwrap();
        }
        assert!(!out.exists());
        assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 0);
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
