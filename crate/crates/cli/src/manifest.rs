//! Run manifest and output-directory lock.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::{usage, CmdResult, Context};

pub const LOCK_FILE: &str = ".nnrs.lock";

/// sha256 of a file, hex encoded. A missing file is a usage error.
pub fn file_sha256(path: &Path) -> CmdResult<String> {
    let mut f = File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut h = Sha256::new();
    io::copy(&mut f, &mut h).or_runtime(format!("reading {}", path.display()))?;
    Ok(hex::encode(h.finalize()))
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Digest of the config and input hashes; also stored in the checkpoint.
    pub id: String,
    pub code_version: String,
    pub seed: u64,
    pub config: String,
    /// Input path to sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output name to path.
    pub outputs: BTreeMap<String, String>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    /// `running`, `complete`, `stopped` or `failed`.
    pub status: String,
    pub epochs_done: usize,
}

impl RunManifest {
    /// `config` is the canonical config text without the output directory,
    /// so the id depends only on what the run computes.
    pub fn new(config: String, seed: u64, inputs: BTreeMap<String, String>) -> Self {
        let mut h = Sha256::new();
        h.update(config.as_bytes());
        for digest in inputs.values() {
            h.update(digest.as_bytes());
        }
        let id = hex::encode(&h.finalize()[..8]);
        Self {
            id,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            inputs,
            outputs: BTreeMap::new(),
            started_unix: unix_now(),
            finished_unix: None,
            status: "running".into(),
            epochs_done: 0,
        }
    }

    pub fn save(&self, path: &Path) -> CmdResult {
        let text = serde_json::to_string_pretty(self).or_runtime("encoding manifest")?;
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> CmdResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CmdResult {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).or_runtime(format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).or_runtime(format!("renaming onto {}", path.display()))
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> CmdResult<Self> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(usage(format!(
                "{} is in use by another run (remove {} if that run is gone)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(crate::failure::runtime(e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
