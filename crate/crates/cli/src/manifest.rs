//! Output bookkeeping and the per-run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

impl FileDigest {
    pub fn of_file(path: &Path) -> anyhow::Result<Self> {
        let data = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        Ok(Self::of_bytes(path, &data))
    }

    pub fn of_bytes(path: &Path, data: &[u8]) -> Self {
        Self {
            path: path.to_owned(),
            bytes: data.len() as u64,
            sha256: sha256_hex(data),
        }
    }
}

/// Records everything a run reads and writes. Artifacts go into one
/// directory; the manifest itself is named after the command.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_clock_seconds: f64,
    pub artifact_versions: BTreeMap<String, u32>,
    /// Extra timing detail (grid-search groups and the like).
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub timings: serde_json::Value,
}

pub struct Run {
    out_dir: PathBuf,
    started: Instant,
    manifest: RunManifest,
}

impl Run {
    pub fn start(command: &str, out_dir: &Path, config: &impl Serialize) -> anyhow::Result<Self> {
        std::fs::create_dir_all(out_dir)
            .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
        Ok(Self {
            out_dir: out_dir.to_owned(),
            started: Instant::now(),
            manifest: RunManifest {
                schema_version: MANIFEST_SCHEMA_VERSION,
                command: command.to_owned(),
                config: serde_json::to_value(config)?,
                seeds: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                wall_clock_seconds: 0.0,
                artifact_versions: BTreeMap::new(),
                timings: serde_json::Value::Null,
            },
        })
    }

    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        self.manifest.inputs.push(FileDigest::of_file(path)?);
        Ok(())
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.manifest.seeds.insert(name.to_owned(), value);
    }

    pub fn version(&mut self, artifact: &str, version: u32) {
        self.manifest.artifact_versions.insert(artifact.to_owned(), version);
    }

    pub fn timings(&mut self, value: serde_json::Value) {
        self.manifest.timings = value;
    }

    pub fn write(&mut self, name: &str, data: &[u8]) -> anyhow::Result<PathBuf> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, data).with_context(|| format!("cannot write {}", path.display()))?;
        self.manifest.outputs.push(FileDigest::of_bytes(&path, data));
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> anyhow::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn manifest_path(out_dir: &Path, command: &str) -> PathBuf {
        out_dir.join(format!("{command}.manifest.json"))
    }

    pub fn finish(mut self) -> anyhow::Result<PathBuf> {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let path = Self::manifest_path(&self.out_dir, &self.manifest.command);
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
