use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    /// Hex sha256 over the file, or over the sorted file digests of a directory.
    pub sha256: String,
}

/// `run.json`: what ran, with which parameters, on which inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputDigest>,
    /// Digest over all input digests, in order.
    pub content_hash: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seeds: Vec<u64>, inputs: &[PathBuf]) -> Result<Self> {
        let (inputs, content_hash) = hash_inputs(inputs)?;
        Ok(Self {
            tool: "xmodal".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            seeds,
            inputs,
            content_hash,
            outputs: Vec::new(),
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Content-addressed like a git blob: `sha256("blob <len>\0" ++ bytes)`.
fn blob_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()));
    h.update(&bytes);
    Ok(hex(&h.finalize()))
}

fn files_under(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            files_under(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

fn tree_digest(dir: &Path) -> Result<String> {
    let mut files = Vec::new();
    files_under(dir, &mut files)?;
    let mut h = Sha256::new();
    for file in files {
        let rel = file.strip_prefix(dir).unwrap_or(&file);
        h.update(format!("{} {}\n", blob_digest(&file)?, rel.display()));
    }
    Ok(hex(&h.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Per-input digests plus one combined digest.
pub fn hash_inputs(paths: &[PathBuf]) -> Result<(Vec<InputDigest>, String)> {
    let mut digests = Vec::with_capacity(paths.len());
    let mut h = Sha256::new();
    for path in paths {
        let sha256 = if path.is_dir() {
            tree_digest(path)?
        } else {
            blob_digest(path)?
        };
        h.update(format!("{sha256}\n"));
        digests.push(InputDigest {
            path: path.display().to_string(),
            sha256,
        });
    }
    Ok((digests, hex(&h.finalize())))
}
