//! Reproducibility record written next to every command's outputs.

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn file_hash(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).with_context(|| format!("reading {}", path.display()))?))
}

#[derive(Debug, Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Document {
    tool: &'static str,
    version: &'static str,
    command: String,
    argv: Vec<String>,
    config: Value,
    /// SHA-256 of `config` serialized compactly.
    config_sha256: String,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
}

pub struct Manifest {
    command: String,
    config: Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(command: &str, config: impl Serialize) -> Result<Self> {
        Ok(Manifest {
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }

    /// Writes `<first output>.manifest.json`; a no-op without outputs.
    pub fn write(self) -> Result<Option<PathBuf>> {
        let Some(first) = self.outputs.first() else {
            return Ok(None);
        };
        let mut name = first.as_os_str().to_owned();
        name.push(".manifest.json");
        let path = PathBuf::from(name);
        let entries = |v: &[PathBuf]| -> Result<Vec<FileEntry>> {
            v.iter()
                .map(|p| {
                    Ok(FileEntry {
                        path: p.display().to_string(),
                        sha256: file_hash(p)?,
                    })
                })
                .collect()
        };
        let doc = Document {
            tool: "foamsim",
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: sha256_hex(&serde_json::to_vec(&self.config)?),
            command: self.command,
            argv: std::env::args().collect(),
            config: self.config,
            inputs: entries(&self.inputs)?,
            outputs: entries(&self.outputs)?,
        };
        fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(Some(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
