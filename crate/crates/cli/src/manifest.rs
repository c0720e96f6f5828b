//! Run manifests: enough to re-run a command and check its outputs.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::table::write_bytes;

pub const FILE_NAME: &str = "manifest.json";

/// Written next to every command's outputs. Field order is the on-disk key
/// order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    /// The command-line arguments, sufficient to re-run the command.
    pub args: serde_json::Value,
    /// Every resolved configuration the command used.
    pub config: serde_json::Value,
    /// Outputs reproduced bit-exactly by a re-run.
    pub outputs: Vec<String>,
    /// Outputs that legitimately vary between runs (wall-clock timings).
    pub volatile_outputs: Vec<String>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_bytes(&dir.join(FILE_NAME), &bytes)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
