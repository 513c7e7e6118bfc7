use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::{ModelConfig, TrainConfig};
use super::data::Example;
use super::optim::AdamW;
use super::transformer::{LossSum, Model};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Epoch-end state with the lowest validation loss.
    pub checkpoint: Checkpoint,
    pub best_epoch: usize,
    pub log: Vec<EpochRecord>,
}

/// Token-averaged loss in evaluation mode.
pub fn mean_loss(model: &Model<f32>, examples: &[Example], par: Parallelism) -> Result<f64> {
    let sums = exec::map(par, examples, |ex| {
        let (dec_in, labels) = ex.teacher_forcing();
        model.loss(&ex.source, &dec_in, &labels)
    });
    let mut total = 0.0f64;
    let mut tokens = 0usize;
    for s in sums {
        let LossSum { total: t, tokens: n } = s?;
        total += t as f64;
        tokens += n;
    }
    Ok(if tokens == 0 { 0.0 } else { total / tokens as f64 })
}

/// Teacher-forced training with AdamW and per-epoch selection on validation
/// loss. Starts from `init` when given, otherwise from a seeded random model.
pub fn train(
    train: &[Example],
    validation: &[Example],
    vocab: &Vocabulary,
    model_config: &ModelConfig,
    config: &TrainConfig,
    init: Option<&Checkpoint>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    model_config.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::invalid("train", "train and validation sets must be non-empty"));
    }
    let mut model = match init {
        Some(ck) => {
            if ck.vocab != *vocab {
                return Err(Error::VocabularyMismatch(
                    "initial checkpoint was built with a different vocabulary".into(),
                ));
            }
            if ck.model.config() != model_config {
                return Err(Error::invalid("train", "initial checkpoint has a different model configuration"));
            }
            ck.model.clone()
        }
        None => Model::<f32>::init(model_config, vocab.len(), config.seed)?,
    };
    let n_params = model.params().len();
    let mut opt = AdamW::new(
        model.layout().specs(),
        n_params,
        config.learning_rate,
        config.betas,
        config.epsilon,
        config.weight_decay,
    );
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, usize, Vec<f32>)> = None;
    let mut log = Vec::with_capacity(config.epochs);
    let mut example_counter: u64 = 0;
    let start = Instant::now();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0f64;
        let mut epoch_tokens = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(u64, &Example)> = chunk
                .iter()
                .enumerate()
                .map(|(i, &j)| (example_counter + i as u64, &train[j]))
                .collect();
            example_counter += chunk.len() as u64;
            let current = &model;
            let results = exec::map(config.parallelism, &batch, |&(stream, ex)| {
                let (dec_in, labels) = ex.teacher_forcing();
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(stream);
                current.loss_and_grad(&ex.source, &dec_in, &labels, Some(&mut rng))
            });
            let mut grad = vec![0.0f32; n_params];
            let mut tokens = 0usize;
            for r in results {
                let (loss, g) = r?;
                epoch_loss += loss.total as f64;
                tokens += loss.tokens;
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b;
                }
            }
            epoch_tokens += tokens;
            let scale = 1.0 / tokens.max(1) as f32;
            grad.iter_mut().for_each(|g| *g *= scale);
            opt.step(model.params_mut(), &grad);
        }
        let val_loss = mean_loss(&model, validation, config.parallelism)?;
        let record = EpochRecord {
            epoch,
            train_loss: epoch_loss / epoch_tokens.max(1) as f64,
            val_loss,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        log.push(record);
        if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, model.params().to_vec()));
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    model.params_mut().copy_from_slice(&params);
    Ok(TrainOutcome {
        checkpoint: Checkpoint::new(model, vocab.clone(), Some(config.clone()))?,
        best_epoch,
        log,
    })
}
