//! Corpus files, synthetic corpora and lexicon translation.
//!
//! File layout (UTF-8 JSON):
//!
//! ```text
//! { "name": ..., "language": ...,
//!   "ontology": { domain: { slot: [values...] } },
//!   "train" | "validation" | "test": [
//!     { "id": ..., "turns": [ { "user": ..., "system": ..., "state": [[d, s, v], ...] } ] } ] }
//! ```
//!
//! `system` may be omitted. Saved files list each turn's state in ontology
//! order, so load followed by save is a canonical form.

mod lexicon;
mod synth;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use lexicon::{build_pseudo_lexicon, translate_corpus, LexiconMap};
pub use synth::{generate_synthetic, generate_synthetic_avoiding, standard_corpora, SplitSizes, StandardCorpora, SynthConfig, FUNCTION_WORDS};

use crate::error::{Error, Result};
use crate::types::{canonical_order, Corpus, Dialogue, DialogueState, Ontology, Split, StateTriplet, Turn};

#[derive(Serialize, Deserialize)]
struct TurnRecord {
    user: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    system: Option<String>,
    state: Vec<[String; 3]>,
}

#[derive(Serialize, Deserialize)]
struct DialogueRecord {
    id: String,
    turns: Vec<TurnRecord>,
}

#[derive(Serialize, Deserialize)]
struct CorpusRecord {
    name: String,
    language: String,
    ontology: Ontology,
    train: Vec<DialogueRecord>,
    validation: Vec<DialogueRecord>,
    test: Vec<DialogueRecord>,
}

fn dialogue_from_record(rec: DialogueRecord) -> Result<Dialogue> {
    let mut turns = Vec::with_capacity(rec.turns.len());
    for (ti, t) in rec.turns.into_iter().enumerate() {
        let context = |e: Error| Error::invalid("corpus", format!("dialogue {:?} turn {ti}: {e}", rec.id));
        let mut state = DialogueState::new();
        for [d, s, v] in &t.state {
            let triplet = StateTriplet::new(d, s, v).map_err(context)?;
            if state.insert(triplet).is_some() {
                return Err(context(Error::invalid("state", format!("({d}, {s}) has more than one value"))));
            }
        }
        turns.push(Turn::new(&t.user, t.system.as_deref(), state).map_err(context)?);
    }
    Ok(Dialogue { id: rec.id, turns })
}

fn dialogue_to_record(d: &Dialogue, ontology: &Ontology) -> Result<DialogueRecord> {
    let turns = d
        .turns
        .iter()
        .map(|t| {
            let state = canonical_order(&t.state, ontology)?
                .into_iter()
                .map(|t| [t.domain().to_string(), t.slot().to_string(), t.value().to_string()])
                .collect();
            Ok(TurnRecord {
                user: t.user.clone(),
                system: t.system.clone(),
                state,
            })
        })
        .collect::<Result<_>>()?;
    Ok(DialogueRecord { id: d.id.clone(), turns })
}

pub fn corpus_from_json(text: &str) -> Result<Corpus> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let rec: CorpusRecord = serde_json::from_str(text)?;
    let convert = |v: Vec<DialogueRecord>| v.into_iter().map(dialogue_from_record).collect::<Result<Vec<_>>>();
    let train = convert(rec.train)?;
    let validation = convert(rec.validation)?;
    let test = convert(rec.test)?;
    Corpus::new(&rec.name, &rec.language, rec.ontology, train, validation, test)
}

pub fn corpus_to_json(corpus: &Corpus) -> Result<String> {
    let convert = |split: Split| {
        corpus
            .split(split)
            .iter()
            .map(|d| dialogue_to_record(d, corpus.ontology()))
            .collect::<Result<Vec<_>>>()
    };
    let rec = CorpusRecord {
        name: corpus.name().to_string(),
        language: corpus.language().to_string(),
        ontology: corpus.ontology().clone(),
        train: convert(Split::Train)?,
        validation: convert(Split::Validation)?,
        test: convert(Split::Test)?,
    };
    let mut s = serde_json::to_string_pretty(&rec).map_err(|e| Error::invalid("corpus", e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub(crate) fn read_utf8(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid("file encoding", format!("{}: not valid UTF-8 ({e})", path.display())))
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    corpus_from_json(&read_utf8(path.as_ref())?)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), corpus_to_json(corpus)?)
}

/// Loads an ontology from either a bare ontology object or a corpus file.
pub fn load_ontology(path: impl AsRef<Path>) -> Result<Ontology> {
    #[derive(Deserialize)]
    struct WithOntology {
        ontology: Ontology,
        #[allow(dead_code)]
        train: serde::de::IgnoredAny,
    }

    let text = read_utf8(path.as_ref())?;
    match serde_json::from_str::<WithOntology>(&text) {
        Ok(corpus) => Ok(corpus.ontology),
        Err(_) => Ok(serde_json::from_str(&text)?),
    }
}

/// Distinct content tokens (utterances, names, values) of a corpus.
pub fn corpus_tokens(corpus: &Corpus) -> HashSet<String> {
    let mut out = HashSet::new();
    for d in corpus.ontology().domains() {
        out.extend(d.name.split(' ').map(str::to_string));
        for s in &d.slots {
            out.extend(s.name.split(' ').map(str::to_string));
            for v in &s.values {
                out.extend(v.split(' ').map(str::to_string));
            }
        }
    }
    for dialogue in corpus.dialogues() {
        for turn in &dialogue.turns {
            out.extend(turn.user.split(' ').map(str::to_string));
            if let Some(sys) = &turn.system {
                out.extend(sys.split(' ').map(str::to_string));
            }
            for t in turn.state.iter() {
                out.extend(t.value().split(' ').map(str::to_string));
            }
        }
    }
    out.remove("");
    out
}
