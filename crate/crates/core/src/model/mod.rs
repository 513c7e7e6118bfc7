//! Encoder-decoder transformer: vocabulary, kernels, training, decoding and
//! checkpoints.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod decode;
pub mod denoise;
pub mod ops;
pub mod optim;
pub mod train;
pub mod transformer;
pub mod vocab;

pub use checkpoint::Checkpoint;
pub use config::{ModelConfig, TrainConfig, MAX_SOURCE_LEN, MAX_TARGET_LEN};
pub use data::{encode_batch, EncodedBatch, Example, Truncate};
pub use decode::{forward, greedy_decode, greedy_decode_ids};
pub use denoise::{denoise_pretrain, NoiseConfig};
pub use train::{mean_loss, train, EpochRecord, TrainOutcome};
pub use transformer::{Model, ParamSpec};
pub use vocab::Vocabulary;
