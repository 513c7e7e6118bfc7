use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linearize::{tokenize, Marker, Token};
use crate::types::Corpus;

/// Token/id bijection. Ids 0-9 are the reserved markers; words follow in
/// sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

const RESERVED: u32 = Marker::ALL.len() as u32;

impl Vocabulary {
    pub fn from_words(words: impl IntoIterator<Item = String>) -> Result<Self> {
        let set: BTreeSet<String> = words.into_iter().collect();
        let words: Vec<String> = set.into_iter().collect();
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() || w.contains(char::is_whitespace) {
                return Err(Error::invalid("vocabulary", format!("{w:?} is not a token")));
            }
            index.insert(w.clone(), RESERVED + i as u32);
        }
        Ok(Vocabulary { words, index })
    }

    /// Every word of every utterance, name and value in `corpora`.
    pub fn build<'a>(corpora: impl IntoIterator<Item = &'a Corpus>) -> Self {
        let mut words = BTreeSet::new();
        for corpus in corpora {
            for d in corpus.ontology().domains() {
                words.extend(d.name.split(' ').map(str::to_string));
                for s in &d.slots {
                    words.extend(s.name.split(' ').map(str::to_string));
                    for v in &s.values {
                        words.extend(v.split(' ').map(str::to_string));
                    }
                }
            }
            for dialogue in corpus.dialogues() {
                for turn in &dialogue.turns {
                    words.extend(tokenize(&turn.user));
                    if let Some(sys) = &turn.system {
                        words.extend(tokenize(sys));
                    }
                    for t in turn.state.iter() {
                        for field in [t.domain(), t.slot(), t.value()] {
                            words.extend(field.split(' ').map(str::to_string));
                        }
                    }
                }
            }
        }
        Vocabulary::from_words(words).expect("corpus tokens are whitespace-free")
    }

    pub fn len(&self) -> usize {
        RESERVED as usize + self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &Token) -> u32 {
        match token {
            Token::Marker(m) => m.id(),
            Token::Word(w) => self.index.get(w).copied().unwrap_or(Marker::Unk.id()),
        }
    }

    pub fn token(&self, id: u32) -> Option<Token> {
        match Marker::from_id(id) {
            Some(m) => Some(Token::Marker(m)),
            None => self.words.get((id - RESERVED) as usize).map(|w| Token::Word(w.clone())),
        }
    }

    pub fn encode(&self, tokens: &[Token]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Ids outside the vocabulary decode to `UNK`.
    pub fn decode(&self, ids: &[u32]) -> Vec<Token> {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or(Token::Marker(Marker::Unk)))
            .collect()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Hex SHA-256 over the id-ordered token list.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for m in Marker::ALL {
            h.update(m.spelling().as_bytes());
            h.update([0]);
        }
        for w in &self.words {
            h.update(w.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }
}

/// Serialized as the full id-ordered token list, reserved spellings first.
impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let all: Vec<&str> = Marker::ALL
            .iter()
            .map(|m| m.spelling())
            .chain(self.words.iter().map(String::as_str))
            .collect();
        all.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let all = Vec::<String>::deserialize(deserializer)?;
        if all.len() < RESERVED as usize {
            return Err(D::Error::custom("vocabulary is missing reserved tokens"));
        }
        for (m, s) in Marker::ALL.iter().zip(&all) {
            if m.spelling() != s {
                return Err(D::Error::custom(format!("reserved id {} must be {:?}", m.id(), m.spelling())));
            }
        }
        let words = all[RESERVED as usize..].to_vec();
        let n = words.len();
        let vocab = Vocabulary::from_words(words).map_err(D::Error::custom)?;
        if vocab.words.len() != n || all[RESERVED as usize..] != vocab.words[..] {
            return Err(D::Error::custom("vocabulary words must be unique and sorted"));
        }
        Ok(vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_ids_are_fixed() {
        let v = Vocabulary::from_words(["b".to_string(), "a".to_string()]).unwrap();
        assert_eq!(v.id(&Token::Marker(Marker::Pad)), 0);
        assert_eq!(v.id(&Token::Marker(Marker::Mask)), 9);
        assert_eq!(v.id(&Token::word("a")), 10);
        assert_eq!(v.id(&Token::word("b")), 11);
        assert_eq!(v.len(), 12);
    }

    #[test]
    fn oov_maps_to_unk() {
        let v = Vocabulary::from_words(["a".to_string()]).unwrap();
        assert_eq!(v.id(&Token::word("zzz")), Marker::Unk.id());
    }

    #[test]
    fn word_spelled_like_marker_gets_its_own_id() {
        let v = Vocabulary::from_words(["<dom>".to_string()]).unwrap();
        assert_ne!(v.id(&Token::word("<dom>")), Marker::Dom.id());
    }

    #[test]
    fn bijection_and_json_round_trip() {
        let v = Vocabulary::from_words(["x", "y", "z"].map(String::from)).unwrap();
        for id in 0..v.len() as u32 {
            assert_eq!(v.id(&v.token(id).unwrap()), id);
        }
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.fingerprint(), v.fingerprint());
    }
}
