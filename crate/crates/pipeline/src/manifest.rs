//! Run manifest: resolved config, input digests, tool version, and per-stage
//! output digests and warnings. Timings are kept out so reruns compare
//! byte for byte.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StageRecord {
    /// Output files relative to the stage directory, with SHA-256 digests.
    pub outputs: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// SHA-256 of every configured input, keyed by its config entry.
    pub inputs: BTreeMap<String, InputDigest>,
    pub stages: BTreeMap<String, StageRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut h = Sha256::new();
    io::copy(&mut f, &mut h)?;
    Ok(format!("{:x}", h.finalize()))
}

/// Digests of every regular file below `dir`, keyed by `/`-joined relative
/// path.
pub fn digest_tree(dir: &Path) -> Result<BTreeMap<String, String>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
        for e in fs::read_dir(dir)? {
            let p = e?.path();
            if p.is_dir() {
                walk(root, &p, out)?;
            } else {
                let rel: Vec<String> = p
                    .strip_prefix(root)?
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect();
                out.insert(rel.join("/"), sha256_file(&p)?);
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out)?;
    Ok(out)
}

impl RunManifest {
    pub fn new(cfg: &PipelineConfig) -> Result<Self> {
        let mut inputs = BTreeMap::new();
        for (key, p) in cfg.input_files() {
            let full = cfg.resolve(&p);
            if full.is_file() {
                inputs.insert(
                    key,
                    InputDigest {
                        path: p.display().to_string(),
                        sha256: sha256_file(&full)?,
                    },
                );
            }
        }
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            config: serde_json::to_value(cfg)?,
            inputs,
            stages: BTreeMap::new(),
        })
    }

    /// Manifest for `cfg` that keeps the stage records of an earlier run in
    /// the same output directory.
    pub fn open(cfg: &PipelineConfig, root: &Path) -> Result<Self> {
        let mut m = Self::new(cfg)?;
        let path = root.join(FILE_NAME);
        if path.is_file() {
            let text = fs::read_to_string(&path)?;
            if let Ok(old) = serde_json::from_str::<RunManifest>(&text) {
                m.stages = old.stages;
            }
        }
        Ok(m)
    }

    pub fn write(&self, root: &Path) -> Result<()> {
        crate::formats::write_json(&root.join(FILE_NAME), self)
    }
}
