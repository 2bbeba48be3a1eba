use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version tag carried by every JSON document the tool writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    /// Input path relative to the corpus root.
    pub key: String,
    /// Output path relative to the output root.
    pub output: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub key: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub images: Vec<ImageRecord>,
    pub skipped: Vec<SkippedFile>,
    /// Annotation file written, or `"none"`.
    pub annotations: String,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn new(command: Vec<String>, config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            command,
            config,
            seed,
            images: Vec::new(),
            skipped: Vec::new(),
            annotations: "none".to_owned(),
            duration_secs: 0.0,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        serde_json::from_str(&text).map_err(Error::json(path))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::json(path))?;
    text.push('\n');
    crate::imageio::write_file(path, text.as_bytes())
}
