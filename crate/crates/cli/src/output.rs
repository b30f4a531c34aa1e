// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Output bundles. Files are buffered and only written, together with the
//! manifest entry that lists them, once a command has succeeded.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub runs: Vec<ManifestRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub timestamp: String,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Option<Self>, Failure> {
        let path = dir.join(MANIFEST);
        if !path.is_file() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Failure::io(&path, e))?;
        toml::from_str(&text)
            .map(Some)
            .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
    }

    /// Every file named by some run, in first-seen order.
    pub fn outputs(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for run in &self.runs {
            for o in &run.outputs {
                if !seen.contains(&o.as_str()) {
                    seen.push(o.as_str());
                }
            }
        }
        seen
    }

    pub fn lists(&self, name: &str) -> bool {
        self.runs.iter().any(|r| r.outputs.iter().any(|o| o == name))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub struct Bundle {
    dir: PathBuf,
    run: ManifestRun,
    files: Vec<(String, Vec<u8>)>,
}

impl Bundle {
    pub fn new(dir: PathBuf, command: String) -> Self {
        Self {
            dir,
            run: ManifestRun {
                command,
                config_hash: None,
                model_hash: None,
                seed: None,
                timestamp: String::new(),
                outputs: Vec::new(),
            },
            files: Vec::new(),
        }
    }

    pub fn hashes(mut self, config: &str, model: &[u8]) -> Self {
        self.run.config_hash = Some(sha256_hex(config.as_bytes()));
        self.run.model_hash = Some(sha256_hex(model));
        self
    }

    pub fn seed(mut self, seed: Option<u64>) -> Self {
        self.run.seed = seed;
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn add(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.files.retain(|(n, _)| n != name);
        self.files.push((name.to_string(), contents.into()));
    }

    /// Writes the files and replaces any earlier manifest entry for the same
    /// command.
    pub fn commit(mut self) -> Result<Vec<PathBuf>, Failure> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Failure::io(&self.dir, e))?;
        let mut manifest = Manifest::load(&self.dir)?.unwrap_or_default();
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| Failure::io(&path, e))?;
            written.push(path);
        }
        self.run.outputs = self.files.iter().map(|(n, _)| n.clone()).collect();
        self.run.timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        manifest.runs.retain(|r| r.command != self.run.command);
        manifest.runs.push(self.run);
        let path = self.dir.join(MANIFEST);
        let text = toml::to_string(&manifest).expect("manifest serializes");
        std::fs::write(&path, text).map_err(|e| Failure::io(&path, e))?;
        Ok(written)
    }
}
