//! Training-input augmentation: MixSpeech pairing, tri-mixup, SpecAugment
//! masking and SNR-calibrated white noise.
//!
//! Every function takes its generator explicitly; nothing here touches
//! global state.

mod mix;
mod noise;
mod specaug;

pub use mix::{
    anchor_count, make_mix_batch, mix_inputs, plan_mix_batch, plan_tri_mix, sample_lambda, tri_mix, Example,
    MixPair, MixPlan, MixWeight, MixedExample, TriMixTriple, DEFAULT_ALPHA, DEFAULT_TAU,
};
pub use noise::{add_noise, noise_variance, NoisePolicy, DEFAULT_SNR_DB};
pub use specaug::{spec_augment, MaskFill, SpecAugmentPolicy};
