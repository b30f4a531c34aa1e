// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration. Relative paths are resolved against the directory of
//! the config file.

use std::path::{Path, PathBuf};

use hilbert_mfg::consistency::PicardOptions;
use hilbert_mfg::tree::DEFAULT_NODE_CAP;
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const OUTPUT_ENV: &str = "HMFG_OUTPUT_DIR";
const DEFAULT_OUTPUT: &str = "hmfg-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: PathBuf,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tree: TreeConfig,
    #[serde(default)]
    pub picard: PicardConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_steps: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_steps: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeConfig {
    pub node_cap: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            node_cap: DEFAULT_NODE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        let d = PicardOptions::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            damping: d.damping,
        }
    }
}

impl PicardConfig {
    pub fn options(&self) -> PicardOptions {
        PicardOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            damping: self.damping,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub ns: Vec<usize>,
    pub n_mc: usize,
    pub seed: Option<u64>,
    pub deviation: String,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            ns: vec![4, 8, 16, 32, 64, 128, 256],
            n_mc: 400,
            seed: None,
            deviation: "zero".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    pub emit_plots: bool,
}

impl RunConfig {
    /// Config for a bare `--model` invocation.
    pub fn for_model(model: PathBuf) -> Self {
        Self {
            model,
            grid: GridConfig::default(),
            tree: TreeConfig::default(),
            picard: PicardConfig::default(),
            simulate: SimulateConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Failure::Validation(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.model = base.join(&cfg.model);
        if let Some(dir) = &cfg.output.directory {
            cfg.output.directory = Some(base.join(dir));
        }
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), Failure> {
        let bad = |m: String| Err(Failure::Validation(format!("config: {m}")));
        if !self.model.is_file() {
            return bad(format!("model file {} does not exist", self.model.display()));
        }
        if self.grid.n_steps == 0 {
            return bad("grid.n_steps must be at least 1".into());
        }
        if self.tree.node_cap == 0 {
            return bad("tree.node_cap must be at least 1".into());
        }
        if !(self.picard.tol > 0.0) {
            return bad("picard.tol must be positive".into());
        }
        if self.picard.max_iter == 0 {
            return bad("picard.max_iter must be at least 1".into());
        }
        if !(self.picard.damping > 0.0 && self.picard.damping <= 1.0) {
            return bad("picard.damping must lie in (0, 1]".into());
        }
        if self.simulate.n_mc == 0 {
            return bad("simulate.n_mc must be at least 1".into());
        }
        if self.simulate.ns.is_empty() || self.simulate.ns.contains(&0) {
            return bad("simulate.ns must be a nonempty list of positive sizes".into());
        }
        if self.simulate.ns.windows(2).any(|w| w[0] >= w[1]) {
            return bad("simulate.ns must be strictly increasing".into());
        }
        Ok(())
    }

    /// Flag, then config, then environment, then `hmfg-out`.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = &self.output.directory {
            return p.clone();
        }
        match std::env::var_os(OUTPUT_ENV) {
            Some(p) if !p.is_empty() => PathBuf::from(p),
            _ => PathBuf::from(DEFAULT_OUTPUT),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
