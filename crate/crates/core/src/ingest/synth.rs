//! Templated slot-filling dialogues over a randomly sampled ontology.
//!
//! Each user turn names the domain, slot and value it introduces, e.g.
//! `i want a <domain> with <slot> <value>`, and the gold state only grows
//! across turns. Names and value sub-tokens are pronounceable pseudo-words;
//! values are one to three sub-tokens drawn from a shared pool, so similar
//! values recur across slots.

use std::collections::{BTreeSet, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::lexicon::{build_pseudo_lexicon, translate_corpus, LexiconMap};
use crate::error::{Error, Result};
use crate::types::{Corpus, Dialogue, DialogueState, DomainSchema, Ontology, SlotSchema, Split, StateTriplet, Turn};

/// Template vocabulary shared by every synthetic corpus of one language.
pub const FUNCTION_WORDS: &[&str] = &[
    "i", "want", "a", "with", "and", "also", "the", "should", "be", "need", "looking", "for", "where", "is", "okay",
    "noted", "anything", "else", "sure", "what", "do", "you", "found", "that", "all", "thanks", "please", "set", "to",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub name: String,
    pub seed: u64,
    pub n_dialogues: SplitSizes,
    pub n_domains: usize,
    pub slots_per_domain: usize,
    pub values_per_slot: usize,
    /// Inclusive `[min, max]` number of turns per dialogue.
    pub turns_range: [usize; 2],
    /// Size of the pool of value sub-tokens.
    pub lexicon_size: usize,
    pub language_tag: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            name: "synthetic".into(),
            seed: 1,
            n_dialogues: SplitSizes {
                train: 500,
                validation: 50,
                test: 100,
            },
            n_domains: 3,
            slots_per_domain: 3,
            values_per_slot: 6,
            turns_range: [1, 4],
            lexicon_size: 40,
            language_tag: "en".into(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_dialogues.train", self.n_dialogues.train),
            ("n_dialogues.validation", self.n_dialogues.validation),
            ("n_dialogues.test", self.n_dialogues.test),
            ("n_domains", self.n_domains),
            ("slots_per_domain", self.slots_per_domain),
            ("values_per_slot", self.values_per_slot),
            ("turns_range.min", self.turns_range[0]),
            ("lexicon_size", self.lexicon_size),
        ];
        for (name, n) in counts {
            if n == 0 {
                return Err(Error::invalid("synth config", format!("{name} must be at least 1")));
            }
        }
        if self.turns_range[0] > self.turns_range[1] {
            return Err(Error::invalid("synth config", "turns_range min exceeds max"));
        }
        if self.language_tag.is_empty() {
            return Err(Error::invalid("synth config", "language_tag must be non-empty"));
        }
        Ok(())
    }
}

const CONSONANTS: &[char] = &['b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z'];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];

/// Hands out distinct pseudo-words.
struct WordSource {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl WordSource {
    fn new(seed: u64, reserved: impl IntoIterator<Item = String>) -> Self {
        let mut used: HashSet<String> = reserved.into_iter().collect();
        used.extend(FUNCTION_WORDS.iter().map(|w| w.to_string()));
        WordSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            used,
        }
    }

    fn fresh(&mut self, syllables: usize) -> String {
        loop {
            let mut w = String::new();
            for _ in 0..syllables {
                w.push(*CONSONANTS.choose(&mut self.rng).unwrap());
                w.push(*VOWELS.choose(&mut self.rng).unwrap());
            }
            if self.rng.random_bool(0.5) {
                w.push(*CONSONANTS.choose(&mut self.rng).unwrap());
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

fn sample_ontology(config: &SynthConfig, words: &mut WordSource) -> Result<Ontology> {
    let pool: Vec<String> = (0..config.lexicon_size).map(|_| words.fresh(2)).collect();
    let mut domains = Vec::with_capacity(config.n_domains);
    for _ in 0..config.n_domains {
        let name = words.fresh(3);
        let mut slots = Vec::with_capacity(config.slots_per_domain);
        for _ in 0..config.slots_per_domain {
            let slot = words.fresh(2);
            let mut values = BTreeSet::new();
            let mut attempts = 0;
            while values.len() < config.values_per_slot && attempts < 1000 * config.values_per_slot {
                attempts += 1;
                let len = words.rng.random_range(1..=3usize).min(pool.len());
                let parts: Vec<&str> = pool.choose_multiple(&mut words.rng, len).map(String::as_str).collect();
                values.insert(parts.join(" "));
            }
            let mut values: Vec<String> = values.into_iter().collect();
            values.shuffle(&mut words.rng);
            slots.push(SlotSchema { name: slot, values });
        }
        domains.push(DomainSchema { name, slots });
    }
    Ontology::new(domains)
}

fn sub_seed(seed: u64, split: Split, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(split.name().as_bytes());
    h.update((index as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn user_utterance(rng: &mut ChaCha8Rng, domain: &str, items: &[(&str, &str)]) -> String {
    let (slot, value) = items[0];
    let mut text = match rng.random_range(0..4) {
        0 => format!("i want a {domain} with {slot} {value}"),
        1 => format!("i need a {domain} where {slot} is {value}"),
        2 => format!("also the {domain} {slot} should be {value}"),
        _ => format!("please set {domain} {slot} to {value}"),
    };
    for (slot, value) in &items[1..] {
        text.push_str(&format!(" and {slot} {value}"));
    }
    text
}

fn system_response(rng: &mut ChaCha8Rng, domain: &str) -> String {
    match rng.random_range(0..3) {
        0 => format!("okay {domain} noted anything else"),
        1 => "sure what else do you need".to_string(),
        _ => format!("i found a {domain} for you"),
    }
}

fn sample_dialogue(config: &SynthConfig, ontology: &Ontology, split: Split, index: usize) -> Result<Dialogue> {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(config.seed, split, index));
    let n_turns = rng.random_range(config.turns_range[0]..=config.turns_range[1]);
    let n_active = rng.random_range(1..=ontology.domains().len().min(2));
    let active: Vec<&DomainSchema> = ontology.domains().choose_multiple(&mut rng, n_active).collect();

    let mut state = DialogueState::new();
    let mut turns = Vec::with_capacity(n_turns);
    for ti in 0..n_turns {
        let open: Vec<&DomainSchema> = active
            .iter()
            .copied()
            .filter(|d| d.slots.iter().any(|s| state.get(&d.name, &s.name).is_none()))
            .collect();
        let user = match open.choose(&mut rng) {
            Some(domain) => {
                let mut free: Vec<&SlotSchema> =
                    domain.slots.iter().filter(|s| state.get(&domain.name, &s.name).is_none()).collect();
                free.shuffle(&mut rng);
                let k = rng.random_range(1..=free.len().min(2));
                let mut items = Vec::with_capacity(k);
                for slot in &free[..k] {
                    let value = slot.values.choose(&mut rng).expect("values_per_slot >= 1");
                    state.insert(StateTriplet::new(&domain.name, &slot.name, value)?);
                    items.push((slot.name.as_str(), value.as_str()));
                }
                user_utterance(&mut rng, &domain.name, &items)
            }
            None => "thanks that is all".to_string(),
        };
        let system = if ti + 1 < n_turns {
            let d = active.choose(&mut rng).unwrap();
            Some(system_response(&mut rng, &d.name))
        } else {
            None
        };
        turns.push(Turn::new(&user, system.as_deref(), state.clone())?);
    }
    Ok(Dialogue {
        id: format!("{}-{}-{index:05}", config.name, split.name()),
        turns,
    })
}

fn generate(config: &SynthConfig, reserved: impl IntoIterator<Item = String>) -> Result<Corpus> {
    config.validate()?;
    let mut words = WordSource::new(config.seed, reserved);
    let ontology = sample_ontology(config, &mut words)?;
    let split = |split: Split, n: usize| {
        (0..n)
            .map(|i| sample_dialogue(config, &ontology, split, i))
            .collect::<Result<Vec<_>>>()
    };
    let train = split(Split::Train, config.n_dialogues.train)?;
    let validation = split(Split::Validation, config.n_dialogues.validation)?;
    let test = split(Split::Test, config.n_dialogues.test)?;
    Corpus::new(&config.name, &config.language_tag, ontology, train, validation, test)
}

/// Deterministic for a fixed config.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Corpus> {
    generate(config, std::iter::empty())
}

/// Like [`generate_synthetic`], but no domain, slot or value word of `other`
/// is reused: the result is a cross-ontology counterpart of `other`.
pub fn generate_synthetic_avoiding(config: &SynthConfig, other: &Corpus) -> Result<Corpus> {
    let mut reserved = Vec::new();
    for d in other.ontology().domains() {
        reserved.extend(d.name.split(' ').map(str::to_string));
        for s in &d.slots {
            reserved.extend(s.name.split(' ').map(str::to_string));
            for v in &s.values {
                reserved.extend(v.split(' ').map(str::to_string));
            }
        }
    }
    generate(config, reserved)
}

/// The four corpora of an experiment suite.
///
/// `A` and `B` have disjoint ontologies; `*-src`/`*-tgt` differ only by a
/// bijective lexicon. `B-tgt` is the evaluation target and is in the same
/// language as `A-src`:
///
/// | role  | language | ontology |
/// |-------|----------|----------|
/// | A-src | primary  | A        |
/// | A-tgt | twin     | A        |
/// | B-src | twin     | B        |
/// | B-tgt | primary  | B        |
#[derive(Debug, Clone)]
pub struct StandardCorpora {
    pub a_src: Corpus,
    pub a_tgt: Corpus,
    pub b_src: Corpus,
    pub b_tgt: Corpus,
    /// Primary-language to twin-language lexicon.
    pub lexicon: LexiconMap,
}

pub fn standard_corpora(config: &SynthConfig, twin_language: &str) -> Result<StandardCorpora> {
    let a_cfg = SynthConfig {
        name: "A-src".into(),
        ..config.clone()
    };
    let b_cfg = SynthConfig {
        name: "B-tgt".into(),
        seed: config.seed.wrapping_add(1),
        ..config.clone()
    };
    let a_src = generate_synthetic(&a_cfg)?;
    let b_tgt = generate_synthetic_avoiding(&b_cfg, &a_src)?;
    let mut tokens = super::corpus_tokens(&a_src);
    tokens.extend(super::corpus_tokens(&b_tgt));
    let lexicon = build_pseudo_lexicon(tokens, config.seed)?;
    let a_tgt = translate_corpus(&a_src, &lexicon, twin_language)?.with_name("A-tgt");
    let b_src = translate_corpus(&b_tgt, &lexicon, twin_language)?.with_name("B-src");
    Ok(StandardCorpora {
        a_src,
        a_tgt,
        b_src,
        b_tgt,
        lexicon,
    })
}
