//! Run-directory bookkeeping: artifact writes, input hashing, and the
//! closing manifest. Nothing here reads the clock, so reruns with the same
//! inputs and seed produce byte-identical trees.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

pub struct OutDir {
    root: PathBuf,
    artifacts: Vec<String>,
    inputs: BTreeMap<String, String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), artifacts: Vec::new(), inputs: BTreeMap::new() })
    }

    /// Hash an input file into the manifest record.
    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let bytes =
            fs::read(path).with_context(|| format!("reading input {}", path.display()))?;
        let digest = Sha256::digest(&bytes);
        self.inputs.insert(path.display().to_string(), format!("{digest:x}"));
        Ok(())
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.write(name, &body)
    }

    /// Write the manifest and hand back the run directory. Must be the last
    /// write of a command.
    pub fn finish(mut self, command: &str, config: serde_json::Value) -> Result<PathBuf> {
        self.artifacts.sort();
        let manifest = serde_json::json!({
            "command": command,
            "config": config,
            "inputs": self.inputs,
            "artifacts": self.artifacts,
        });
        let mut body = serde_json::to_string_pretty(&manifest)?;
        body.push('\n');
        fs::write(self.root.join("manifest.json"), body)?;
        Ok(self.root)
    }
}

/// Minimal CSV assembly for the numeric tables this tool writes; none of
/// the fields can contain separators or quotes.
pub struct Csv {
    body: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        let mut body = String::from(header);
        body.push('\n');
        Self { body }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.body.push_str(&fields.join(","));
        self.body.push('\n');
    }

    pub fn into_string(self) -> String {
        self.body
    }
}

/// Shortest round-trip float formatting; keeps artifacts stable across
/// runs and readable in diffs.
pub fn fnum(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x}")
    }
}
