use super::checkpoint::Checkpoint;
use super::config::{MAX_SOURCE_LEN, MAX_TARGET_LEN};
use super::data::{truncate, EncodedBatch, Truncate};
use super::ops::Scalar;
use super::transformer::Model;
use crate::error::{Error, Result};
use crate::linearize::{Marker, SourceSequence, TargetSequence};

/// Logits `[batch][position * vocab + token]` for padded batches. Source
/// padding is removed via the mask; target padding is decoded but, being
/// causal, cannot influence earlier positions.
pub fn forward<F: Scalar>(model: &Model<F>, sources: &EncodedBatch, targets: &EncodedBatch) -> Result<Vec<Vec<F>>> {
    if sources.batch_size() != targets.batch_size() {
        return Err(Error::Shape(format!(
            "{} sources but {} targets",
            sources.batch_size(),
            targets.batch_size()
        )));
    }
    (0..sources.batch_size())
        .map(|i| model.logits(sources.row(i), &targets.ids[i]))
        .collect()
}

/// Lowest id wins ties.
pub fn argmax<F: Scalar>(row: &[F]) -> u32 {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best as u32
}

/// Greedy generation from `BOS` until `EOS` or the target budget.
pub fn greedy_decode_ids<F: Scalar>(model: &Model<F>, source: &[u32]) -> Result<Vec<u32>> {
    let source = truncate(source, MAX_SOURCE_LEN, Truncate::Front);
    let mut state = model.start_decoding(source)?;
    let mut out = Vec::new();
    let mut prev = Marker::Bos.id();
    while out.len() < MAX_TARGET_LEN {
        let next = argmax(&state.step(prev)?);
        if next == Marker::Eos.id() {
            break;
        }
        out.push(next);
        prev = next;
    }
    Ok(out)
}

pub fn greedy_decode(source: &SourceSequence, checkpoint: &Checkpoint) -> Result<TargetSequence> {
    let ids = checkpoint.vocab.encode(source.tokens());
    let out = greedy_decode_ids(&checkpoint.model, &ids)?;
    Ok(TargetSequence {
        tokens: checkpoint.vocab.decode(&out),
    })
}
