use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Corpus, Dialogue, DialogueState, DomainSchema, Ontology, SlotSchema, Split, StateTriplet, Turn};

/// A token-to-token bijection between two pseudo-languages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconMap {
    forward: HashMap<String, String>,
    backward: HashMap<String, String>,
}

impl LexiconMap {
    pub fn new(pairs: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut forward = HashMap::new();
        let mut backward = HashMap::new();
        for (src, dst) in pairs {
            if src.is_empty() || dst.is_empty() || src.contains(char::is_whitespace) || dst.contains(char::is_whitespace) {
                return Err(Error::invalid("lexicon", format!("{src:?} -> {dst:?} is not a single token")));
            }
            if forward.insert(src.clone(), dst.clone()).is_some() {
                return Err(Error::invalid("lexicon", format!("{src:?} is mapped twice")));
            }
            if backward.insert(dst.clone(), src).is_some() {
                return Err(Error::invalid("lexicon", format!("{dst:?} is the image of two tokens")));
            }
        }
        Ok(LexiconMap { forward, backward })
    }

    pub fn identity<S: AsRef<str>>(tokens: impl IntoIterator<Item = S>) -> Self {
        let pairs = tokens
            .into_iter()
            .map(|t| (t.as_ref().to_string(), t.as_ref().to_string()))
            .collect::<Vec<_>>();
        LexiconMap::new(pairs).expect("identity map is a bijection")
    }

    pub fn inverse(&self) -> LexiconMap {
        LexiconMap {
            forward: self.backward.clone(),
            backward: self.forward.clone(),
        }
    }

    pub fn forward(&self, token: &str) -> Option<&str> {
        self.forward.get(token).map(String::as_str)
    }

    pub fn backward(&self, token: &str) -> Option<&str> {
        self.backward.get(token).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Maps every whitespace-separated token of `text`.
    pub fn map_text(&self, text: &str) -> Result<String> {
        text.split_whitespace()
            .map(|t| self.forward(t).ok_or_else(|| Error::TokenNotInLexicon(t.to_string())))
            .collect::<Result<Vec<_>>>()
            .map(|v| v.join(" "))
    }
}

impl Serialize for LexiconMap {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.forward.iter().collect::<BTreeMap<_, _>>().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LexiconMap {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let pairs = BTreeMap::<String, String>::deserialize(deserializer)?;
        LexiconMap::new(pairs).map_err(serde::de::Error::custom)
    }
}

/// Maps each token to a distinct two-character CJK pseudo-word.
pub fn build_pseudo_lexicon(tokens: impl IntoIterator<Item = String>, seed: u64) -> Result<LexiconMap> {
    let mut sorted: Vec<String> = tokens.into_iter().collect();
    sorted.sort();
    sorted.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c65_7869_636f_6e00);
    let mut used = HashSet::new();
    let mut pairs = Vec::with_capacity(sorted.len());
    for tok in sorted {
        let word = loop {
            let w: String = (0..2)
                .map(|_| char::from_u32(rng.random_range(0x4E00..0x9FA6)).expect("CJK unified ideograph"))
                .collect();
            if used.insert(w.clone()) {
                break w;
            }
        };
        pairs.push((tok, word));
    }
    LexiconMap::new(pairs)
}

fn map_dialogue(d: &Dialogue, lex: &LexiconMap) -> Result<Dialogue> {
    let turns = d
        .turns
        .iter()
        .map(|t| {
            let state = t
                .state
                .iter()
                .map(|s| StateTriplet::new(&lex.map_text(s.domain())?, &lex.map_text(s.slot())?, &lex.map_text(s.value())?))
                .collect::<Result<DialogueState>>()?;
            let system = t.system.as_deref().map(|s| lex.map_text(s)).transpose()?;
            Turn::new(&lex.map_text(&t.user)?, system.as_deref(), state)
        })
        .collect::<Result<_>>()?;
    Ok(Dialogue {
        id: d.id.clone(),
        turns,
    })
}

/// Token-wise translation of every utterance, name and value. Ids and
/// structure are unchanged.
pub fn translate_corpus(corpus: &Corpus, lexicon: &LexiconMap, new_tag: &str) -> Result<Corpus> {
    let domains = corpus
        .ontology()
        .domains()
        .iter()
        .map(|d| {
            Ok(DomainSchema {
                name: lexicon.map_text(&d.name)?,
                slots: d
                    .slots
                    .iter()
                    .map(|s| {
                        Ok(SlotSchema {
                            name: lexicon.map_text(&s.name)?,
                            values: s.values.iter().map(|v| lexicon.map_text(v)).collect::<Result<_>>()?,
                        })
                    })
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let split = |s: Split| corpus.split(s).iter().map(|d| map_dialogue(d, lexicon)).collect::<Result<Vec<_>>>();
    Corpus::new(
        corpus.name(),
        new_tag,
        Ontology::new(domains)?,
        split(Split::Train)?,
        split(Split::Validation)?,
        split(Split::Test)?,
    )
}
