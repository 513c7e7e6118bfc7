use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Parallelism;

/// Longest source kept; longer sources lose tokens from the front.
pub const MAX_SOURCE_LEN: usize = 512;
/// Longest target kept; longer targets lose tokens from the back. Also the
/// decoding budget.
pub const MAX_TARGET_LEN: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub model_dim: usize,
    pub ff_dim: usize,
    pub n_heads: usize,
    pub max_source_len: usize,
    pub max_target_len: usize,
    /// Residual-branch dropout during training.
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder_layers: 2,
            decoder_layers: 2,
            model_dim: 64,
            ff_dim: 128,
            n_heads: 4,
            max_source_len: MAX_SOURCE_LEN,
            max_target_len: MAX_TARGET_LEN,
            dropout: 0.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |r: String| Err(Error::invalid("model config", r));
        if self.encoder_layers == 0 || self.decoder_layers == 0 {
            return bad("encoder and decoder need at least one layer".into());
        }
        if self.model_dim == 0 || self.ff_dim == 0 || self.n_heads == 0 {
            return bad("dimensions must be positive".into());
        }
        if !self.model_dim.is_multiple_of(self.n_heads) {
            return bad(format!("model_dim {} is not divisible by n_heads {}", self.model_dim, self.n_heads));
        }
        if !self.model_dim.is_multiple_of(2) {
            return bad("model_dim must be even for sinusoidal positions".into());
        }
        if self.max_source_len != MAX_SOURCE_LEN || self.max_target_len != MAX_TARGET_LEN {
            return bad(format!("length limits are fixed at {MAX_SOURCE_LEN}/{MAX_TARGET_LEN}"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} not in [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.n_heads
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub betas: [f64; 2],
    pub epsilon: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Scheduling of per-example gradients; does not change results.
    pub parallelism: Parallelism,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            epochs: 4,
            weight_decay: 0.01,
            betas: [0.9, 0.999],
            epsilon: 1e-8,
            batch_size: 32,
            seed: 0,
            parallelism: Parallelism::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |r: &str| Err(Error::invalid("train config", r.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.betas.iter().any(|b| !(0.0..1.0).contains(b)) {
            return bad("betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) || self.weight_decay < 0.0 {
            return bad("epsilon must be positive and weight_decay non-negative");
        }
        Ok(())
    }
}
