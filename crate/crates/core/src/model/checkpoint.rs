//! Binary checkpoint: `DSTKCKPT`, a little-endian u64 header length, a JSON
//! header, then the parameters as little-endian f32.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, TrainConfig};
use super::transformer::{Layout, Model, ParamSpec};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DSTKCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub vocab: Vocabulary,
    pub train_config: Option<TrainConfig>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    model_config: ModelConfig,
    #[serde(default)]
    train_config: Option<TrainConfig>,
    vocabulary: Vocabulary,
    parameters: Vec<ParamSpec>,
}

impl Checkpoint {
    pub fn new(model: Model<f32>, vocab: Vocabulary, train_config: Option<TrainConfig>) -> Result<Self> {
        if model.vocab_size() != vocab.len() {
            return Err(Error::VocabularyMismatch(format!(
                "model has {} embeddings, vocabulary has {} tokens",
                model.vocab_size(),
                vocab.len()
            )));
        }
        Ok(Checkpoint {
            model,
            vocab,
            train_config,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            version: VERSION,
            model_config: self.model.config().clone(),
            train_config: self.train_config.clone(),
            vocabulary: self.vocab.clone(),
            parameters: self.model.layout().specs().to_vec(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let params = self.model.params();
        let mut out = Vec::with_capacity(16 + json.len() + 4 * params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for p in params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut magic = [0u8; 8];
        bytes.read_exact(&mut magic).map_err(|_| bad("file too short"))?;
        if &magic != MAGIC {
            return Err(bad("not a dstkit checkpoint"));
        }
        let mut len = [0u8; 8];
        bytes.read_exact(&mut len).map_err(|_| bad("truncated header length"))?;
        let len = u64::from_le_bytes(len) as usize;
        if bytes.len() < len {
            return Err(bad("truncated header"));
        }
        let (json, blob) = bytes.split_at(len);
        let header: Header =
            serde_json::from_slice(json).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        if header.version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", header.version)));
        }
        header.model_config.validate()?;
        let layout = Layout::new(&header.model_config, header.vocabulary.len());
        if layout.specs() != header.parameters.as_slice() {
            return Err(bad("parameter manifest does not match the model configuration"));
        }
        if blob.len() != 4 * layout.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter bytes, found {}",
                4 * layout.len(),
                blob.len()
            )));
        }
        let params = blob
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let model = Model::from_params(&header.model_config, header.vocabulary.len(), params)?;
        Checkpoint::new(model, header.vocabulary, header.train_config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::ingest::write_file(path, self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }
}
