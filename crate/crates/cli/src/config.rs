//! Run configuration: a TOML file plus flag overrides. The effective
//! configuration is echoed into the output directory for provenance.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use parslate_core::model::AblationFlags;
use parslate_core::trainer::TrainConfig;

use crate::error::{CmdError, CmdResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub decode: DecodeSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub train_source: PathBuf,
    pub train_target: PathBuf,
    pub train_parses: PathBuf,
    pub dev_source: PathBuf,
    pub dev_target: PathBuf,
    pub dev_parses: PathBuf,
    /// Preprocess output; train/translate input.
    pub data_dir: PathBuf,
    /// Train output; translate input.
    pub model_dir: PathBuf,
    pub max_length: usize,
    pub source_min_count: u64,
    pub target_min_count: u64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            train_source: PathBuf::new(),
            train_target: PathBuf::new(),
            train_parses: PathBuf::new(),
            dev_source: PathBuf::new(),
            dev_target: PathBuf::new(),
            dev_parses: PathBuf::new(),
            data_dir: PathBuf::from("out/data"),
            model_dir: PathBuf::from("out/model"),
            max_length: 50,
            source_min_count: 2,
            target_min_count: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub word_dim: usize,
    pub action_dim: usize,
    pub hidden_dim: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            word_dim: 256,
            action_dim: 128,
            hidden_dim: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub clip_threshold: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub without_buffer: bool,
    pub without_action: bool,
    pub without_stack: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            learning_rate: 1.0,
            clip_threshold: 3.0,
            batch_size: 128,
            max_epochs: 20,
            seed: 1,
            without_buffer: false,
            without_action: false,
            without_stack: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeSection {
    pub beam_width: usize,
    /// Hard word cap; 0 means `2 * source length + 10` per sentence.
    pub max_length_cap: usize,
    pub length_normalize: bool,
    pub joint: bool,
}

impl Default for DecodeSection {
    fn default() -> Self {
        DecodeSection {
            beam_width: 5,
            max_length_cap: 0,
            length_normalize: false,
            joint: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            resamples: 1000,
            seed: 1,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CmdResult<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| CmdError::data(anyhow::anyhow!("parsing {}: {e}", path.display())))?;
        Ok(config)
    }

    pub fn ablation(&self) -> AblationFlags {
        AblationFlags {
            without_buffer: self.train.without_buffer,
            without_action: self.train.without_action,
            without_stack: self.train.without_stack,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            word_dim: self.model.word_dim,
            action_dim: self.model.action_dim,
            hidden_dim: self.model.hidden_dim,
            learning_rate: self.train.learning_rate,
            clip_threshold: self.train.clip_threshold,
            batch_size: self.train.batch_size,
            max_epochs: self.train.max_epochs,
            ablation: self.ablation(),
            seed: self.train.seed,
        }
    }

    /// Writes the effective configuration next to a command's outputs.
    pub fn echo_to(&self, dir: &Path) -> CmdResult {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let text = toml::to_string_pretty(self)
            .map_err(|e| CmdError::data(anyhow::anyhow!("serializing config: {e}")))?;
        let path = dir.join("effective-config.toml");
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
