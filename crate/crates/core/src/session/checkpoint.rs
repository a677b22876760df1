use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cost::TOKENS_PER_MILLION;
use crate::error::{Error, Result};
use crate::routing::{RoutingConfig, RoutingState};

/// Durable length and content digest of one append-only log.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogMark {
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogMarks {
    pub trace: LogMark,
    pub decisions: LogMark,
    pub entropy: LogMark,
    pub cost: LogMark,
}

/// Running totals of the metered cost. `picos` is exact: token counts times
/// integer micro-dollar-per-million prices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeterState {
    pub picos: u128,
    pub inferences: u64,
    pub support_inferences: u64,
    pub total_tokens: u64,
}

impl MeterState {
    pub fn exact_micros(&self) -> BigRational {
        BigRational::new(BigInt::from(self.picos), BigInt::from(TOKENS_PER_MILLION))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCheckpoint {
    pub session_id: String,
    pub routing_state: RoutingState,
    /// Number of inference records durably logged.
    pub inference_log_offset: u64,
    pub logs: LogMarks,
    pub cost_accumulator: MeterState,
    pub config_hash: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub finished: bool,
}

pub fn config_hash(config: &RoutingConfig) -> String {
    let canonical = serde_json::to_vec(config).expect("routing config serializes");
    hex::encode(Sha256::digest(&canonical))
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

impl SessionCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("checkpoint serializes");
        bytes.push(b'\n');
        write_atomic(path, &bytes).map_err(|source| Error::CheckpointWrite {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut text = String::new();
        File::open(path)
            .map_err(|e| Error::CorruptCheckpoint(format!("{}: {e}", path.display())))?
            .read_to_string(&mut text)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::CorruptCheckpoint(format!("{}: {e}", path.display())))
    }
}

/// File names inside a session directory.
#[derive(Debug, Clone)]
pub struct SessionLayout {
    root: PathBuf,
}

impl SessionLayout {
    pub const CONFIG: &'static str = "config.json";
    pub const TRACE: &'static str = "trace.jsonl";
    pub const DECISIONS: &'static str = "decisions.jsonl";
    pub const ENTROPY: &'static str = "entropy.jsonl";
    pub const COST: &'static str = "cost.jsonl";
    pub const CHECKPOINT: &'static str = "checkpoint.json";
    pub const CHECKPOINT_DIR: &'static str = "checkpoints";

    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> PathBuf {
        self.root.join(Self::CONFIG)
    }

    pub fn trace(&self) -> PathBuf {
        self.root.join(Self::TRACE)
    }

    pub fn decisions(&self) -> PathBuf {
        self.root.join(Self::DECISIONS)
    }

    pub fn entropy(&self) -> PathBuf {
        self.root.join(Self::ENTROPY)
    }

    pub fn cost(&self) -> PathBuf {
        self.root.join(Self::COST)
    }

    /// Latest checkpoint.
    pub fn checkpoint(&self) -> PathBuf {
        self.root.join(Self::CHECKPOINT)
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.root.join(Self::CHECKPOINT_DIR)
    }

    /// Historical checkpoint covering `steps` inferences.
    pub fn checkpoint_at(&self, steps: u64) -> PathBuf {
        self.checkpoint_dir().join(format!("step-{steps:08}.json"))
    }

    /// Historical checkpoints in step order.
    pub fn list_checkpoints(&self) -> Result<Vec<PathBuf>> {
        let dir = self.checkpoint_dir();
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        Ok(paths)
    }
}
