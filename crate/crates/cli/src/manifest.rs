//! `manifest.json`: which stage produced which file from which inputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageRecord {
    pub command: String,
    pub config_digest: String,
    /// Path → SHA-256. Paths inside the output directory are relative to it.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub seed: u64,
    pub config_digest: String,
    /// Only present when `SOURCE_DATE_EPOCH` is set, keeping runs byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_date_epoch: Option<u64>,
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    pub fn new(seed: u64, config_digest: &str) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_digest: config_digest.to_string(),
            source_date_epoch: source_date_epoch(),
            stages: BTreeMap::new(),
        }
    }

    /// Loads the manifest in `out`, or starts a fresh one.
    pub fn open(out: &Path, seed: u64, config_digest: &str) -> Result<Self, CliError> {
        let path = out.join(MANIFEST_FILE);
        let mut m = if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?
        } else {
            Self::new(seed, config_digest)
        };
        m.tool_version = env!("CARGO_PKG_VERSION").to_string();
        m.seed = seed;
        m.config_digest = config_digest.to_string();
        m.source_date_epoch = source_date_epoch();
        Ok(m)
    }

    pub fn save(&self, out: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        write_file(&out.join(MANIFEST_FILE), text.as_bytes())
    }

    /// Fails unless `stage` was recorded and its outputs are unchanged on disk.
    pub fn require(&self, out: &Path, stage: &str, command: &str) -> Result<&StageRecord, CliError> {
        let rec = self.stages.get(stage).ok_or_else(|| CliError::Dependency {
            artifact: stage.to_string(),
            command: command.to_string(),
        })?;
        for (rel, digest) in &rec.outputs {
            let path = out.join(rel);
            let bytes = std::fs::read(&path).map_err(|_| CliError::Dependency {
                artifact: rel.clone(),
                command: command.to_string(),
            })?;
            if sdoh_core::sha256_hex(bytes) != *digest {
                return Err(CliError::Stale { artifact: rel.clone(), command: command.to_string() });
            }
        }
        Ok(rec)
    }

    /// Every output path across stages, for reachability checks.
    pub fn all_outputs(&self) -> Vec<PathBuf> {
        self.stages.values().flat_map(|s| s.outputs.keys().map(PathBuf::from)).collect()
    }
}

fn source_date_epoch() -> Option<u64> {
    std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse().ok())
}

/// Collects the files one stage writes, digesting them as they go.
pub struct StageWriter<'a> {
    out: &'a Path,
    record: StageRecord,
}

impl<'a> StageWriter<'a> {
    pub fn new(out: &'a Path, command: &str, config_digest: &str) -> Self {
        Self {
            out,
            record: StageRecord { command: command.into(), config_digest: config_digest.into(), ..Default::default() },
        }
    }

    /// Records an input file by digest; `key` is how it is named in the manifest.
    pub fn input_file(&mut self, key: impl Into<String>, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.record.inputs.insert(key.into(), sdoh_core::sha256_hex(bytes));
        Ok(())
    }

    pub fn input_digest(&mut self, key: impl Into<String>, digest: String) {
        self.record.inputs.insert(key.into(), digest);
    }

    /// Writes `bytes` to `<out>/<rel>` and records it.
    pub fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        let bytes = bytes.as_ref();
        write_file(&self.out.join(rel), bytes)?;
        self.record.outputs.insert(rel.to_string(), sdoh_core::sha256_hex(bytes));
        Ok(())
    }

    /// Records a file some other routine already wrote under `out`.
    pub fn adopt(&mut self, rel: &str) -> Result<(), CliError> {
        let path = self.out.join(rel);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        self.record.outputs.insert(rel.to_string(), sdoh_core::sha256_hex(bytes));
        Ok(())
    }

    pub fn finish(self) -> StageRecord {
        self.record
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}
