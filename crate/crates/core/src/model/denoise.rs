use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::{ModelConfig, TrainConfig, MAX_TARGET_LEN};
use super::data::{truncate, Example, Truncate};
use super::train::{train, EpochRecord, TrainOutcome};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::linearize::Marker;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Fraction of each sequence replaced by `MASK`.
    pub mask_fraction: f64,
    /// Mean of the Poisson span-length distribution.
    pub mean_span: f64,
    /// Every `n`-th sequence is held out for validation.
    pub holdout_every: usize,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            mask_fraction: 0.3,
            mean_span: 3.5,
            holdout_every: 20,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mask_fraction) {
            return Err(Error::invalid("noise config", "mask_fraction must lie in [0, 1]"));
        }
        if !(self.mean_span > 0.0) {
            return Err(Error::invalid("noise config", "mean_span must be positive"));
        }
        if self.holdout_every < 2 {
            return Err(Error::invalid("noise config", "holdout_every must be at least 2"));
        }
        Ok(())
    }
}

/// Replaces contiguous spans with `MASK` until `round(fraction * len)`
/// positions are covered. The length is preserved.
pub fn mask_spans(ids: &[u32], fraction: f64, mean_span: f64, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut out = ids.to_vec();
    let n = ids.len();
    let budget = (fraction * n as f64).round() as usize;
    if budget == 0 {
        return out;
    }
    let poisson = Poisson::new(mean_span).expect("positive mean");
    let mut masked = vec![false; n];
    let mut covered = 0;
    while covered < budget {
        let span = (poisson.sample(rng) as usize).clamp(1, budget - covered);
        let start = rng.random_range(0..=n - span);
        for m in masked.iter_mut().skip(start).take(span) {
            if !*m {
                *m = true;
                covered += 1;
            }
        }
    }
    for (o, m) in out.iter_mut().zip(&masked) {
        if *m {
            *o = Marker::Mask.id();
        }
    }
    out
}

/// Denoising pairs: masked input, original target.
pub fn noisy_examples(sequences: &[Vec<u32>], noise: &NoiseConfig) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    sequences
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            let s = truncate(s, MAX_TARGET_LEN, Truncate::Back);
            Example::from_ids(mask_spans(s, noise.mask_fraction, noise.mean_span, &mut rng), s.to_vec())
        })
        .collect()
}

pub fn denoise_pretrain(
    sequences: &[Vec<u32>],
    vocab: &Vocabulary,
    noise: &NoiseConfig,
    model_config: &ModelConfig,
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    noise.validate()?;
    let examples = noisy_examples(sequences, noise);
    if examples.len() < 2 {
        return Err(Error::invalid("denoise_pretrain", "need at least two non-empty sequences"));
    }
    let (mut tr, mut va) = (Vec::new(), Vec::new());
    for (i, ex) in examples.into_iter().enumerate() {
        if i % noise.holdout_every == noise.holdout_every - 1 {
            va.push(ex);
        } else {
            tr.push(ex);
        }
    }
    if va.is_empty() {
        va.push(tr.pop().expect("two examples"));
    }
    train(&tr, &va, vocab, model_config, config, None::<&Checkpoint>, on_epoch)
}
