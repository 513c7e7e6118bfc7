//! The seven training regimes over four corpora, their artifacts and the
//! suite report.

pub mod pipeline;
pub mod regime;
pub mod run;
pub mod suite;

pub use pipeline::{
    corpus_examples, evaluate, mixed_stream, multiset_hash, predict, repair_predictions, CorpusSet, PredictionRecord,
    Predictions, Stream, StreamSummary, TurnRef,
};
pub use regime::{Regime, Role};
pub use run::{rerun, run_regime, PretrainObjective, RegimeOutcome, RunConfig, RunInputs, RunManifest, RunSummary};
pub use suite::{per_domain_csv, results_csv, run_suite, SuiteConfig, SuiteOutcome, INCOMPLETE_MARKER};
