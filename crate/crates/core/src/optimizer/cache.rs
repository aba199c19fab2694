//! Content-addressed store of steady-state results shared by concurrent jobs.

use std::io::Write;
use std::path::{Path, PathBuf};

use dashmap::DashMap;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::circuit::CircuitParams;
use crate::dynamics::{DriveConfig, ModelSpec, SteadyOptions, SteadyStateResult};
use crate::error::Result;

/// In-memory map, optionally mirrored to one JSON file per key in a directory.
///
/// Concurrent inserts of the same key are allowed; the last writer wins, which
/// is harmless because equal keys come from equal inputs.
#[derive(Debug, Default)]
pub struct ResultCache {
    mem: DashMap<String, SteadyStateResult>,
    dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct KeyInput<'a> {
    version: &'a str,
    params: &'a CircuitParams,
    model: &'a ModelSpec,
    drive: &'a DriveConfig,
    opts: &'a SteadyOptions,
}

pub fn cache_key(params: &CircuitParams, model: &ModelSpec, drive: &DriveConfig, opts: &SteadyOptions) -> String {
    let input = KeyInput { version: env!("CARGO_PKG_VERSION"), params, model, drive, opts };
    let bytes = serde_json::to_vec(&input).expect("key input serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl ResultCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Cache persisted under `dir`; existing entries are loaded lazily.
    pub fn on_disk(dir: impl AsRef<Path>) -> Result<Self> {
        std::fs::create_dir_all(dir.as_ref())?;
        Ok(Self { mem: DashMap::new(), dir: Some(dir.as_ref().to_path_buf()) })
    }

    pub fn len(&self) -> usize {
        self.mem.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mem.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<SteadyStateResult> {
        if let Some(v) = self.mem.get(key) {
            return Some(*v);
        }
        let path = self.dir.as_ref()?.join(format!("{key}.json"));
        let text = std::fs::read(path).ok()?;
        let v: SteadyStateResult = serde_json::from_slice(&text).ok()?;
        self.mem.insert(key.to_string(), v);
        Some(v)
    }

    pub fn insert(&self, key: &str, v: SteadyStateResult) -> Result<()> {
        self.mem.insert(key.to_string(), v);
        if let Some(dir) = &self.dir {
            // write-then-rename so readers never see a partial file
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(&serde_json::to_vec(&v)?)?;
            tmp.persist(dir.join(format!("{key}.json"))).map_err(|e| e.error)?;
        }
        Ok(())
    }
}
