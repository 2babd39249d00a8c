//! TOML run configuration with documented defaults. Unknown keys are
//! rejected so typos fail loudly instead of silently falling back.

use std::path::Path;

use serde::{Deserialize, Serialize};

use sign2text_core::error::{Error, Result};
use sign2text_core::keypoint::NRule;
use sign2text_core::model::{ModelHyper, TrainConfig};
use sign2text_core::normalize::NormScheme;
use sign2text_core::select::Selector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub preprocess: PreprocessSection,
    pub model: ModelSection,
    pub train: TrainSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessSection {
    pub normalization: String,
    pub selector: String,
    pub l_p: usize,
    /// "mean", "median", or a fixed integer as a string.
    pub n_rule: String,
    pub layout: String,
    pub seed: u64,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        PreprocessSection {
            normalization: "customized".into(),
            selector: "sass".into(),
            l_p: 17,
            n_rule: "mean".into(),
            layout: "identity55".into(),
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub attn_dim: usize,
    pub dropout: f64,
    /// 0 means: derive from the longest training sentence.
    pub max_target_len: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            hidden_dim: 64,
            embed_dim: 32,
            attn_dim: 64,
            dropout: 0.5,
            max_target_len: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub reverse_frames: bool,
    pub early_stop_loss: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            learning_rate: 0.001,
            epochs: 100,
            batch_size: 4,
            seed: 7,
            reverse_frames: false,
            early_stop_loss: None,
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::FileNotFound(format!("{}: {}", path.display(), e)))?;
        toml::from_str(&text)
            .map_err(|e| Error::ConfigInvalid(format!("{}: {}", path.display(), e)))
    }

    pub fn parse_n_rule(&self) -> Result<NRule> {
        match self.preprocess.n_rule.as_str() {
            "mean" => Ok(NRule::Mean),
            "median" => Ok(NRule::Median),
            s => s
                .parse::<usize>()
                .ok()
                .filter(|&n| n >= 2)
                .map(NRule::Fixed)
                .ok_or_else(|| {
                    Error::ConfigInvalid(format!(
                        "n_rule must be 'mean', 'median', or an integer >= 2, got '{s}'"
                    ))
                }),
        }
    }

    pub fn parse_scheme(&self) -> Result<NormScheme> {
        NormScheme::parse(&self.preprocess.normalization)
    }

    pub fn parse_selector(&self) -> Result<Selector> {
        Selector::parse(&self.preprocess.selector)
    }

    pub fn model_hyper(&self, input_dim: usize, vocab_size: usize) -> ModelHyper {
        ModelHyper {
            input_dim,
            hidden_dim: self.model.hidden_dim,
            embed_dim: self.model.embed_dim,
            attn_dim: self.model.attn_dim,
            vocab_size,
            dropout_rate: self.model.dropout,
            max_target_len: self.model.max_target_len,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            seed: self.train.seed,
            reverse_frames: self.train.reverse_frames,
            early_stop_loss: self.train.early_stop_loss,
            ..TrainConfig::default()
        }
    }
}

/// Write the fully-resolved settings next to a command's outputs.
pub fn echo_config<T: Serialize>(path: &Path, resolved: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(resolved)
        .map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}
