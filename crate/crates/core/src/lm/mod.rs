//! LSTM language models: baseline, KB-conditioned (`+c`), numerically
//! grounded (`+g`) and both (`+c+g`), with test-time ablations.

mod backprop;
pub mod checkpoint;
mod config;
mod model;
mod train;

pub use checkpoint::{from_bytes, load_model, load_model_for, save_model, to_bytes};
pub use config::{system_label, Ablation, ModelConfig, Variant};
pub use model::{numeric_feature, DecodeState, LanguageModel, NamedArray, Weights};
pub use train::{train, EpochLog, Trainer, TrainingLog};
