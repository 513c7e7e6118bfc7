use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::pipeline::{
    corpus_examples, corpus_hash, evaluate, mixed_stream, predict, repair_predictions, CorpusSet, Predictions,
    StreamSummary,
};
use super::regime::{Regime, Role};
use crate::error::{Error, Result};
use crate::fuzzy::MatchConfig;
use crate::linearize::{Marker, Token};
use crate::ingest::{load_corpus, read_utf8, write_file};
use crate::metrics::EvalReport;
use crate::model::{
    denoise_pretrain, train, Checkpoint, EpochRecord, Example, ModelConfig, NoiseConfig, TrainConfig, TrainOutcome,
    Vocabulary,
};
use crate::types::Split;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PretrainObjective {
    /// Ordinary state generation on the pretraining corpora.
    #[default]
    Supervised,
    /// Span-masked reconstruction of the pretraining corpora's sequences.
    Denoise,
}

/// Everything that determines a run besides its corpora.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelConfig,
    /// Joint training and fine-tuning.
    pub train: TrainConfig,
    pub pretrain: TrainConfig,
    pub pretrain_objective: PretrainObjective,
    pub noise: NoiseConfig,
    pub matching: MatchConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.pretrain.validate()?;
        self.noise.validate()?;
        self.matching.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub role: Role,
    pub name: String,
    pub language: String,
    pub sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub checkpoint: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pretrain_checkpoint: Option<PathBuf>,
    pub raw_predictions: PathBuf,
    pub repaired_predictions: PathBuf,
    pub report: PathBuf,
    pub training_log: PathBuf,
}

impl OutputPaths {
    fn under(dir: &Path, pretrain: bool) -> Self {
        OutputPaths {
            checkpoint: dir.join("model.ckpt"),
            pretrain_checkpoint: pretrain.then(|| dir.join("pretrain.ckpt")),
            raw_predictions: dir.join("predictions.raw.json"),
            repaired_predictions: dir.join("predictions.repaired.json"),
            report: dir.join("report.json"),
            training_log: dir.join("training_log.jsonl"),
        }
    }
}

/// Written before training starts; enough to repeat the run exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub regime: Regime,
    pub target: Role,
    pub corpora: Vec<CorpusEntry>,
    pub config: RunConfig,
    pub seed: u64,
    pub vocabulary_sha256: String,
    pub vocabulary: Vocabulary,
    pub pretrain_stream: Option<StreamSummary>,
    pub train_stream: StreamSummary,
    pub started_unix_seconds: u64,
    pub outputs: Option<OutputPaths>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&read_utf8(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text)
}

/// Timing and model-selection facts that vary between otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub regime: Regime,
    pub pretrain_best_epoch: Option<usize>,
    pub best_epoch: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RegimeOutcome {
    pub report: EvalReport,
    pub manifest: RunManifest,
    pub checkpoint: Checkpoint,
    pub raw: Predictions,
    pub repaired: Predictions,
    pub summary: RunSummary,
}

/// Corpora, their on-disk locations (for manifests) and the shared vocabulary.
#[derive(Debug, Clone)]
pub struct RunInputs {
    pub corpora: CorpusSet,
    pub paths: BTreeMap<Role, PathBuf>,
    pub vocab: Vocabulary,
}

impl RunInputs {
    pub fn new(corpora: CorpusSet, paths: BTreeMap<Role, PathBuf>) -> Self {
        let vocab = corpora.vocabulary();
        RunInputs { corpora, paths, vocab }
    }
}

fn check_vocabulary(vocab: &Vocabulary, corpora: &CorpusSet, roles: &[Role]) -> Result<()> {
    for &role in roles {
        let words = Vocabulary::build([corpora.get(role)?]);
        if let Some(w) = words.words().iter().find(|w| vocab.id(&Token::word(w)) == Marker::Unk.id()) {
            return Err(Error::VocabularyMismatch(format!(
                "{role} contains {w:?}, which the shared vocabulary lacks"
            )));
        }
    }
    Ok(())
}

fn target_examples(inputs: &RunInputs, target: Role, split: Split) -> Result<Vec<Example>> {
    corpus_examples(inputs.corpora.get(target)?, split, &inputs.vocab)
}

/// Trains, decodes, repairs and scores one regime. With `out`, the manifest
/// is written first, then checkpoints, both prediction dumps and the report.
pub fn run_regime(regime: Regime, inputs: &RunInputs, config: &RunConfig, out: Option<&Path>) -> Result<RegimeOutcome> {
    config.validate()?;
    let roles = regime.roles();
    for &role in &roles {
        inputs.corpora.get(role)?;
    }
    check_vocabulary(&inputs.vocab, &inputs.corpora, &roles)?;
    let target = regime.target();
    let started = Instant::now();

    let pretrain_stream = if regime.pretrain_roles().is_empty() {
        None
    } else {
        Some(mixed_stream(
            &inputs.corpora,
            regime.pretrain_roles(),
            Split::Train,
            &inputs.vocab,
            config.pretrain.seed,
        )?)
    };
    let train_stream = mixed_stream(&inputs.corpora, regime.joint_roles(), Split::Train, &inputs.vocab, config.train.seed)?;

    let mut corpora = Vec::new();
    for &role in &roles {
        let c = inputs.corpora.get(role)?;
        corpora.push(CorpusEntry {
            role,
            name: c.name().to_string(),
            language: c.language().to_string(),
            sha256: corpus_hash(c)?,
            path: inputs.paths.get(&role).map(|p| std::path::absolute(p).unwrap_or_else(|_| p.clone())),
        });
    }
    let outputs = out.map(|d| OutputPaths::under(d, pretrain_stream.is_some()));
    let manifest = RunManifest {
        tool: "dstkit".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        regime,
        target,
        corpora,
        config: config.clone(),
        seed: config.train.seed,
        vocabulary_sha256: inputs.vocab.fingerprint(),
        vocabulary: inputs.vocab.clone(),
        pretrain_stream: pretrain_stream.as_ref().map(|s| s.summary()),
        train_stream: train_stream.summary(),
        started_unix_seconds: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        outputs: outputs.clone(),
    };
    let mut log_file = match (out, &outputs) {
        (Some(dir), Some(paths)) => {
            manifest.save(&dir.join("manifest.json"))?;
            let f = std::fs::File::create(&paths.training_log).map_err(|e| Error::io(&paths.training_log, e))?;
            Some(std::io::BufWriter::new(f))
        }
        _ => None,
    };
    let mut log = |phase: &str, r: &EpochRecord| {
        if let Some(f) = log_file.as_mut() {
            let mut v = serde_json::to_value(r).expect("record serializes");
            v["phase"] = phase.into();
            let _ = writeln!(f, "{v}");
            let _ = f.flush();
        }
    };

    let target_val = target_examples(inputs, target, Split::Validation)?;
    let mut pretrain_best = None;
    let init = match &pretrain_stream {
        None => None,
        Some(stream) => {
            let outcome = match config.pretrain_objective {
                PretrainObjective::Supervised => {
                    let mut val = Vec::new();
                    for &role in regime.pretrain_roles() {
                        val.extend(corpus_examples(inputs.corpora.get(role)?, Split::Validation, &inputs.vocab)?);
                    }
                    train(&stream.examples, &val, &inputs.vocab, &config.model, &config.pretrain, None, |r| {
                        log("pretrain", r)
                    })?
                }
                PretrainObjective::Denoise => {
                    let seqs: Vec<Vec<u32>> = stream
                        .examples
                        .iter()
                        .flat_map(|e| [e.source.clone(), e.target.clone()])
                        .collect();
                    denoise_pretrain(&seqs, &inputs.vocab, &config.noise, &config.model, &config.pretrain, |r| {
                        log("pretrain", r)
                    })?
                }
            };
            if let Some(p) = outputs.as_ref().and_then(|o| o.pretrain_checkpoint.as_ref()) {
                outcome.checkpoint.save(p)?;
            }
            pretrain_best = Some(outcome.best_epoch);
            Some(outcome.checkpoint)
        }
    };
    let TrainOutcome {
        checkpoint, best_epoch, ..
    } = train(
        &train_stream.examples,
        &target_val,
        &inputs.vocab,
        &config.model,
        &config.train,
        init.as_ref(),
        |r| log("train", r),
    )?;

    let target_corpus = inputs.corpora.get(target)?;
    let par = config.train.parallelism;
    let raw = predict(&checkpoint, target_corpus, Split::Test, par)?;
    let repaired = repair_predictions(&raw, target_corpus.ontology(), &config.matching)?;
    let report = evaluate(&repaired, target_corpus, par)?;
    let summary = RunSummary {
        regime,
        pretrain_best_epoch: pretrain_best,
        best_epoch,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    if let (Some(dir), Some(paths)) = (out, &outputs) {
        checkpoint.save(&paths.checkpoint)?;
        raw.save(&paths.raw_predictions)?;
        repaired.save(&paths.repaired_predictions)?;
        write_json(&paths.report, &report)?;
        write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(RegimeOutcome {
        report,
        manifest,
        checkpoint,
        raw,
        repaired,
        summary,
    })
}

/// Repeats the run described by `manifest`, after checking every corpus
/// against its recorded hash.
pub fn rerun(manifest: &RunManifest, out: Option<&Path>) -> Result<RegimeOutcome> {
    let mut corpora = CorpusSet::new();
    let mut paths = BTreeMap::new();
    for entry in &manifest.corpora {
        let path = entry.path.as_ref().ok_or_else(|| {
            Error::invalid("manifest", format!("corpus {} has no recorded path", entry.role))
        })?;
        let corpus = load_corpus(path)?;
        let hash = corpus_hash(&corpus)?;
        if hash != entry.sha256 {
            return Err(Error::invalid(
                "manifest",
                format!("{} has changed since the run (sha256 {hash})", path.display()),
            ));
        }
        corpora.insert(entry.role, corpus);
        paths.insert(entry.role, path.clone());
    }
    if manifest.vocabulary.fingerprint() != manifest.vocabulary_sha256 {
        return Err(Error::VocabularyMismatch("manifest vocabulary does not match its fingerprint".into()));
    }
    let inputs = RunInputs {
        corpora,
        paths,
        vocab: manifest.vocabulary.clone(),
    };
    run_regime(manifest.regime, &inputs, &manifest.config, out)
}
