//! Run configuration shared by the subcommands.
//!
//! Values resolve as command-line flag, then config file, then default.

use std::path::{Path, PathBuf};

use facepolicy_core::diffusion::PredictionMode;
use facepolicy_core::synth::SynthConfig;
use facepolicy_core::training::TrainConfig;
use facepolicy_core::PolicyConfig;
use serde::{Deserialize, Serialize};

use crate::error::{read_json, Result};

/// Environment variable consulted when no seed flag is given.
pub const SEED_ENV: &str = "FACEPOLICY_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub checkpoint: PathBuf,
    /// Line-delimited JSON training log.
    pub log: PathBuf,
    pub synth: SynthConfig,
    pub policy: PolicyConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("data/manifest.json"),
            checkpoint: PathBuf::from("run/policy.fckp"),
            log: PathBuf::from("run/train.jsonl"),
            synth: SynthConfig::default(),
            policy: PolicyConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Defaults, overlaid with `path` if given. Missing fields keep defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => read_json(p),
            None => Ok(Self::default()),
        }
    }
}

/// Training settings given on the command line; `None` defers to the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainOverrides {
    pub manifest: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub max_steps: Option<u64>,
    pub mode: Option<PredictionMode>,
    /// Seeds both weight initialisation and window sampling.
    pub seed: Option<u64>,
}

impl TrainOverrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(p) = &self.manifest {
            cfg.manifest = p.clone();
        }
        if let Some(p) = &self.checkpoint {
            cfg.checkpoint = p.clone();
        }
        if let Some(p) = &self.log {
            cfg.log = p.clone();
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        if let Some(b) = self.batch_size {
            cfg.train.batch_size = b;
        }
        if let Some(lr) = self.learning_rate {
            cfg.train.learning_rate = lr;
        }
        if let Some(m) = self.max_steps {
            cfg.train.max_steps = Some(m);
        }
        if let Some(m) = self.mode {
            cfg.policy.mode = m;
        }
        if let Some(s) = self.seed {
            cfg.train.seed = s;
            cfg.policy.init_seed = s;
        }
    }
}
