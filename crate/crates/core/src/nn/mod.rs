//! Reverse-mode autodiff, the two model families and the optimizer.

mod adam;
mod config;
mod las;
mod model;
mod params;
mod tape;
mod transformer;

pub use adam::{adam_step, AdamHyper, AdamState, StepOutcome};
pub use config::{Family, ModelConfig};
pub use model::{decoder_forward, encoder_forward, AsrModel, DecoderOutput, Encoded, EncoderOutput, PaddedBatch};
pub use params::{Gradients, ParamInit, Parameters};
pub use tape::{sigmoid, Tape, Var};
pub use transformer::positional_encoding;
