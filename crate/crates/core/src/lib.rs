//! Desk-scale joint CTC-attention speech recognition with MixSpeech mixup.

pub mod augment;
pub mod decode;
pub mod error;
pub mod features;
pub mod harness;
pub mod losses;
pub mod nn;
pub mod tensor;
pub mod tokens;

pub use error::{Error, Result};
