use serde::{Deserialize, Serialize};

use super::config::{MAX_SOURCE_LEN, MAX_TARGET_LEN};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::linearize::{Marker, SourceSequence, TargetSequence, Token};

/// Which end of an over-long sequence is cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncate {
    /// Keep the last `max_len` tokens (sources: the most recent context).
    Front,
    /// Keep the first `max_len` tokens (targets).
    Back,
}

/// Right-padded id matrix with its attention mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedBatch {
    pub ids: Vec<Vec<u32>>,
    pub mask: Vec<Vec<bool>>,
}

impl EncodedBatch {
    pub fn batch_size(&self) -> usize {
        self.ids.len()
    }

    pub fn width(&self) -> usize {
        self.ids.first().map_or(0, Vec::len)
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.mask.iter().map(|m| m.iter().filter(|&&b| b).count()).collect()
    }

    /// Row `i` without its padding.
    pub fn row(&self, i: usize) -> &[u32] {
        let n = self.mask[i].iter().filter(|&&b| b).count();
        &self.ids[i][..n]
    }
}

pub fn truncate(ids: &[u32], max_len: usize, side: Truncate) -> &[u32] {
    if ids.len() <= max_len {
        return ids;
    }
    match side {
        Truncate::Front => &ids[ids.len() - max_len..],
        Truncate::Back => &ids[..max_len],
    }
}

pub fn encode_batch(sequences: &[&[Token]], vocab: &Vocabulary, max_len: usize, side: Truncate) -> Result<EncodedBatch> {
    if max_len == 0 {
        return Err(Error::invalid("encode_batch", "max_len must be positive"));
    }
    let rows: Vec<Vec<u32>> = sequences
        .iter()
        .map(|s| truncate(&vocab.encode(s), max_len, side).to_vec())
        .collect();
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut ids = Vec::with_capacity(rows.len());
    let mut mask = Vec::with_capacity(rows.len());
    for mut r in rows {
        let n = r.len();
        r.resize(width, Marker::Pad.id());
        ids.push(r);
        mask.push((0..width).map(|j| j < n).collect());
    }
    Ok(EncodedBatch { ids, mask })
}

/// One supervised pair in id form, already truncated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Example {
    pub source: Vec<u32>,
    pub target: Vec<u32>,
}

impl Example {
    pub fn encode(source: &SourceSequence, target: &TargetSequence, vocab: &Vocabulary) -> Self {
        Example::from_ids(vocab.encode(source.tokens()), vocab.encode(&target.tokens))
    }

    pub fn from_ids(source: Vec<u32>, target: Vec<u32>) -> Self {
        Example {
            source: truncate(&source, MAX_SOURCE_LEN, Truncate::Front).to_vec(),
            target: truncate(&target, MAX_TARGET_LEN, Truncate::Back).to_vec(),
        }
    }

    /// `(BOS + target, target + EOS)`.
    pub fn teacher_forcing(&self) -> (Vec<u32>, Vec<u32>) {
        let mut dec_in = Vec::with_capacity(self.target.len() + 1);
        dec_in.push(Marker::Bos.id());
        dec_in.extend(&self.target);
        let mut labels = self.target.clone();
        labels.push(Marker::Eos.id());
        (dec_in, labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_words(["a", "b", "c"].map(String::from)).unwrap()
    }

    #[test]
    fn pads_right_and_masks() {
        let v = vocab();
        let a = [Token::word("a"), Token::word("b")];
        let b = [Token::word("c")];
        let batch = encode_batch(&[&a, &b], &v, 8, Truncate::Front).unwrap();
        assert_eq!(batch.ids, vec![vec![10, 11], vec![12, 0]]);
        assert_eq!(batch.mask, vec![vec![true, true], vec![true, false]]);
        assert_eq!(batch.row(1), &[12]);
    }

    #[test]
    fn truncation_sides() {
        let ids: Vec<u32> = (0..10).collect();
        assert_eq!(truncate(&ids, 3, Truncate::Front), &[7, 8, 9]);
        assert_eq!(truncate(&ids, 3, Truncate::Back), &[0, 1, 2]);
    }

    #[test]
    fn example_limits() {
        let ex = Example::from_ids((0..513).collect(), (0..257).collect());
        assert_eq!(ex.source.len(), 512);
        assert_eq!(ex.source[0], 1);
        assert_eq!(ex.target.len(), 256);
        assert_eq!(*ex.target.last().unwrap(), 255);
    }

    #[test]
    fn teacher_forcing_shifts() {
        let ex = Example::from_ids(vec![10], vec![6, 11]);
        let (i, l) = ex.teacher_forcing();
        assert_eq!(i, vec![1, 6, 11]);
        assert_eq!(l, vec![6, 11, 2]);
    }
}
