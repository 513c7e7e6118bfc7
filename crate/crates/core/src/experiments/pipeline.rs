use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::regime::Role;
use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::fuzzy::{repair_state, MatchConfig, RepairCounts};
use crate::ingest::{corpus_to_json, load_corpus, read_utf8, save_corpus, write_file};
use crate::linearize::{linearize_context, linearize_state, parse_state, ParseReport, SourceSequence, TargetSequence};
use crate::metrics::EvalReport;
use crate::model::{greedy_decode, Checkpoint, Example, Vocabulary};
use crate::types::{Corpus, DialogueState, Ontology, Split};

/// Corpora indexed by role.
#[derive(Debug, Clone, Default)]
pub struct CorpusSet {
    corpora: BTreeMap<Role, Corpus>,
}

impl CorpusSet {
    pub fn new() -> Self {
        CorpusSet::default()
    }

    pub fn insert(&mut self, role: Role, corpus: Corpus) {
        self.corpora.insert(role, corpus);
    }

    pub fn get(&self, role: Role) -> Result<&Corpus> {
        self.corpora.get(&role).ok_or_else(|| Error::MissingRole(role.name().to_string()))
    }

    pub fn roles(&self) -> impl Iterator<Item = Role> + '_ {
        self.corpora.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Role, &Corpus)> {
        self.corpora.iter().map(|(r, c)| (*r, c))
    }

    /// Reads `<role>.json` for every role present in `dir`.
    pub fn load_dir(dir: &Path) -> Result<(Self, BTreeMap<Role, PathBuf>)> {
        let mut set = CorpusSet::new();
        let mut paths = BTreeMap::new();
        for role in Role::ALL {
            let path = dir.join(role.file_name());
            if path.exists() {
                set.insert(role, load_corpus(&path)?);
                paths.insert(role, path);
            }
        }
        if set.corpora.is_empty() {
            return Err(Error::invalid(
                "corpora",
                format!("no role files (A-src.json, ..., B-tgt.json) in {}", dir.display()),
            ));
        }
        Ok((set, paths))
    }

    pub fn save_dir(&self, dir: &Path) -> Result<BTreeMap<Role, PathBuf>> {
        let mut paths = BTreeMap::new();
        for (role, corpus) in self.iter() {
            let path = dir.join(role.file_name());
            save_corpus(corpus, &path)?;
            paths.insert(role, path);
        }
        Ok(paths)
    }

    /// Shared vocabulary over every corpus in the set.
    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::build(self.corpora.values())
    }
}

/// Hex SHA-256 of the corpus in canonical JSON form.
pub fn corpus_hash(corpus: &Corpus) -> Result<String> {
    Ok(hex::encode(Sha256::digest(corpus_to_json(corpus)?.as_bytes())))
}

/// Addresses one turn of one dialogue.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TurnRef {
    pub dialogue: String,
    pub turn: usize,
}

/// A linearized turn: context, gold state and its target sequence.
#[derive(Debug, Clone)]
pub struct TurnInput {
    pub at: TurnRef,
    pub source: SourceSequence,
    pub gold: DialogueState,
    pub target: TargetSequence,
}

pub fn turn_inputs(corpus: &Corpus, split: Split) -> Result<Vec<TurnInput>> {
    let mut out = Vec::with_capacity(corpus.n_turns(split));
    for d in corpus.split(split) {
        for t in 0..d.turns.len() {
            let source = linearize_context(&d.turns[..=t])?;
            let gold = d.turns[t].state.clone();
            let target = linearize_state(&gold, corpus.ontology())?;
            out.push(TurnInput {
                at: TurnRef {
                    dialogue: d.id.clone(),
                    turn: t,
                },
                source,
                gold,
                target,
            });
        }
    }
    Ok(out)
}

pub fn corpus_examples(corpus: &Corpus, split: Split, vocab: &Vocabulary) -> Result<Vec<Example>> {
    Ok(turn_inputs(corpus, split)?
        .iter()
        .map(|t| Example::encode(&t.source, &t.target, vocab))
        .collect())
}

/// Order-independent digest of a multiset of examples.
pub fn multiset_hash(examples: &[Example]) -> String {
    let mut digests: Vec<[u8; 32]> = examples
        .iter()
        .map(|ex| {
            let mut h = Sha256::new();
            for id in &ex.source {
                h.update(id.to_le_bytes());
            }
            h.update(u32::MAX.to_le_bytes());
            for id in &ex.target {
                h.update(id.to_le_bytes());
            }
            h.finalize().into()
        })
        .collect();
    digests.sort_unstable();
    let mut h = Sha256::new();
    for d in &digests {
        h.update(d);
    }
    hex::encode(h.finalize())
}

/// Mixed training data of several corpora.
#[derive(Debug, Clone)]
pub struct Stream {
    pub examples: Vec<Example>,
    pub counts: BTreeMap<Role, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub examples: usize,
    pub per_role: BTreeMap<Role, usize>,
    pub multiset_sha256: String,
}

impl Stream {
    pub fn summary(&self) -> StreamSummary {
        StreamSummary {
            examples: self.examples.len(),
            per_role: self.counts.clone(),
            multiset_sha256: multiset_hash(&self.examples),
        }
    }
}

/// Uniform shuffle of the concatenated `split` examples of `roles`.
pub fn mixed_stream(corpora: &CorpusSet, roles: &[Role], split: Split, vocab: &Vocabulary, seed: u64) -> Result<Stream> {
    let mut examples = Vec::new();
    let mut counts = BTreeMap::new();
    for &role in roles {
        let ex = corpus_examples(corpora.get(role)?, split, vocab)?;
        counts.insert(role, ex.len());
        examples.extend(ex);
    }
    examples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Stream { examples, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub dialogue: String,
    pub turn: usize,
    /// Decoded sequence as rendered text.
    pub output: String,
    pub state: DialogueState,
    pub parse: ParseReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair: Option<RepairCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub corpus: String,
    pub split: Split,
    pub repaired: bool,
    pub turns: Vec<PredictionRecord>,
}

impl Predictions {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&read_utf8(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_file(path, text)
    }

    pub fn states(&self) -> Vec<DialogueState> {
        self.turns.iter().map(|t| t.state.clone()).collect()
    }

    pub fn parse_drops(&self) -> usize {
        self.turns.iter().map(|t| t.parse.dropped).sum()
    }
}

/// Greedy-decodes every turn of `split` and parses the output.
pub fn predict(checkpoint: &Checkpoint, corpus: &Corpus, split: Split, par: Parallelism) -> Result<Predictions> {
    let inputs = turn_inputs(corpus, split)?;
    let decoded = exec::map(par, &inputs, |t| greedy_decode(&t.source, checkpoint));
    let mut turns = Vec::with_capacity(inputs.len());
    for (t, out) in inputs.iter().zip(decoded) {
        let out = out?;
        let parsed = parse_state(&out.tokens, corpus.ontology());
        turns.push(PredictionRecord {
            dialogue: t.at.dialogue.clone(),
            turn: t.at.turn,
            output: out.to_string(),
            state: parsed.state,
            parse: parsed.report,
            repair: None,
        });
    }
    Ok(Predictions {
        corpus: corpus.name().to_string(),
        split,
        repaired: false,
        turns,
    })
}

pub fn repair_predictions(preds: &Predictions, ontology: &Ontology, config: &MatchConfig) -> Result<Predictions> {
    config.validate()?;
    let turns = preds
        .turns
        .iter()
        .map(|t| {
            let r = repair_state(&t.state, ontology, config);
            PredictionRecord {
                state: r.state,
                repair: Some(r.counts),
                ..t.clone()
            }
        })
        .collect();
    Ok(Predictions {
        repaired: true,
        turns,
        ..preds.clone()
    })
}

/// Scores predictions against the gold states of `corpus`, turn by turn.
pub fn evaluate(preds: &Predictions, corpus: &Corpus, par: Parallelism) -> Result<EvalReport> {
    let gold = turn_inputs(corpus, preds.split)?;
    if gold.len() != preds.turns.len() {
        return Err(Error::LengthMismatch {
            pred: preds.turns.len(),
            gold: gold.len(),
        });
    }
    for (g, p) in gold.iter().zip(&preds.turns) {
        if g.at.dialogue != p.dialogue || g.at.turn != p.turn {
            return Err(Error::invalid(
                "predictions",
                format!(
                    "prediction for {} turn {} is aligned with gold {} turn {}",
                    p.dialogue, p.turn, g.at.dialogue, g.at.turn
                ),
            ));
        }
    }
    let gold: Vec<DialogueState> = gold.into_iter().map(|g| g.gold).collect();
    EvalReport::compute_with(&preds.states(), &gold, preds.parse_drops(), par)
}
