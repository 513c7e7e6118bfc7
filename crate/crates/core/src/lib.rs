//! Generative dialogue state tracking at desk scale.
//!
//! Dialogue contexts and states are linearized to token sequences, a small
//! encoder-decoder transformer learns to generate states, predictions are
//! parsed back and repaired against the ontology by gestalt string matching,
//! and scored with joint goal accuracy and slot F1. [`experiments`] runs the
//! seven cross-lingual / cross-ontology training regimes over four corpora.

pub mod error;
pub mod exec;
pub mod experiments;
pub mod fuzzy;
pub mod ingest;
pub mod linearize;
pub mod metrics;
pub mod model;
pub mod types;

pub use error::{Error, Result};
