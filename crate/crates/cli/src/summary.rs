//! File access that records content hashes, and the per-stage JSON summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        write!(out, "{b:02x}").unwrap();
    }
    out
}

#[derive(Debug, Serialize)]
pub struct StageSummary {
    pub stage: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub params: BTreeMap<String, Value>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub counts: BTreeMap<String, Value>,
}

/// Tracks one stage's reads, writes and reported numbers.
#[derive(Debug)]
pub struct Stage {
    summary: StageSummary,
}

impl Stage {
    pub fn new(stage: &str) -> Self {
        Self {
            summary: StageSummary {
                stage: stage.to_owned(),
                relation: None,
                seed: None,
                params: BTreeMap::new(),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                counts: BTreeMap::new(),
            },
        }
    }

    pub fn relation(&mut self, r: &str) -> &mut Self {
        self.summary.relation = Some(r.to_owned());
        self
    }

    pub fn seed(&mut self, s: u64) -> &mut Self {
        self.summary.seed = Some(s);
        self
    }

    pub fn param(&mut self, k: &str, v: impl Serialize) -> &mut Self {
        self.summary.params.insert(k.to_owned(), serde_json::to_value(v).expect("serializable"));
        self
    }

    pub fn count(&mut self, k: &str, v: impl Serialize) -> &mut Self {
        self.summary.counts.insert(k.to_owned(), serde_json::to_value(v).expect("serializable"));
        self
    }

    pub fn read(&mut self, what: &str, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path).with_context(|| format!("cannot read {what} file {}", path.display()))?;
        self.summary.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        String::from_utf8(bytes).with_context(|| format!("{what} file {} is not UTF-8", path.display()))
    }

    pub fn write(&mut self, path: &Path, contents: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        }
        std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.summary.outputs.insert(path.display().to_string(), sha256_hex(contents));
        Ok(())
    }

    /// Writes the summary as pretty JSON to `path`.
    pub fn finish(self, path: &Path) -> Result<StageSummary> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        }
        let mut text = serde_json::to_string_pretty(&self.summary)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("cannot write summary {}", path.display()))?;
        Ok(self.summary)
    }
}

/// `<out>.summary.json` next to `out`.
pub fn default_summary_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".summary.json");
    out.with_file_name(name)
}
