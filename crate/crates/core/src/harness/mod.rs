//! Experiment plumbing: synthetic data, manifests, configs, training, checkpoints, evaluation and sweeps.

mod checkpoint;
mod config;
mod data;
mod eval;
mod kv;
mod manifest;
mod sweep;
mod synth;
mod train;

pub use checkpoint::{sidecar_path, Checkpoint};
pub use config::{
    AugmentConfig, AugmentMode, DatasetConfig, DecodeConfig, ExperimentConfig, ModelShape, TrainConfig,
};
pub use data::{load_utterances, vocab_for, Corpus, Utterance};
pub use eval::{evaluate, evaluate_utterances, DecodedUtterance, EvalReport};
pub use kv::KeyValues;
pub use manifest::{parse_manifest, read_manifest, write_manifest, UtteranceRef};
pub use sweep::{median, sweep, sweep_corpus, SweepParam, SweepRun, SweepTable, BETA_GRID, TAU_GRID};
pub use synth::{split_sizes, symbol_names, symbol_signature, synth_dataset, SynthConfig, SynthOutput};
pub use train::{greedy_error_rate, train, train_corpus, RunFiles, TrainLog, TrainOutcome};
