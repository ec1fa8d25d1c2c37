//! MixSpeech input mixing, batch planning, SpecAugment masking and additive noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mixspeech::augment::{
    add_noise, mix_inputs, plan_mix_batch, sample_lambda, spec_augment, tri_mix, NoisePolicy, SpecAugmentPolicy,
    DEFAULT_ALPHA, DEFAULT_TAU,
};
use mixspeech::features::{extract, FeatureConfig, Waveform};
use mixspeech::harness::symbol_signature;

fn utterance(symbols: &[usize]) -> mixspeech::Result<Waveform> {
    let samples = symbols.iter().flat_map(|&k| symbol_signature(k, 8, 0.12, 16_000)).map(|s| 0.4 * s).collect();
    Waveform::new(samples, 16_000)
}

fn main() -> mixspeech::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = FeatureConfig::default();
    let a = extract(&utterance(&[0, 1, 2])?, &cfg)?;
    let b = extract(&utterance(&[5, 6, 7, 4, 3])?, &cfg)?;
    let c = extract(&utterance(&[2, 2])?, &cfg)?;

    let w = sample_lambda(DEFAULT_ALPHA, &mut rng)?;
    let mixed = mix_inputs(&a, &b, w.lambda)?;
    println!(
        "lambda = {:.3}; mixed {} + {} frames -> {} frames",
        w.lambda,
        a.num_frames(),
        b.num_frames(),
        mixed.num_frames()
    );
    let tri = tri_mix(&a, &b, &c)?;
    println!("tri-mix with equal weights -> {} frames", tri.num_frames());

    let plan = plan_mix_batch(16, DEFAULT_TAU, DEFAULT_ALPHA, &mut rng)?;
    println!("batch of 16 at tau = {DEFAULT_TAU}:");
    for p in &plan.pairs {
        println!("  anchor {:2} + partner {:2}  lambda {:.3}", p.anchor, p.partner, p.lambda);
    }
    println!("  {} plain examples", plan.plain.len());

    let policy = SpecAugmentPolicy::default();
    let masked = spec_augment(&b, &policy, &mut rng)?;
    let changed = masked.frames.data().iter().zip(b.frames.data()).filter(|(m, x)| m != x).count();
    println!("SpecAugment masked {changed} of {} cells with the utterance mean", masked.frames.data().len());

    let clean = utterance(&[1, 4])?;
    let noisy = add_noise(&clean, &NoisePolicy { snr_db: 5.0 }, &mut rng)?;
    let noise_power =
        clean.samples.iter().zip(&noisy.samples).map(|(x, y)| (y - x).powi(2)).sum::<f64>() / clean.len() as f64;
    println!("noise at 5 dB: measured SNR {:.2} dB", 10.0 * (clean.power() / noise_power).log10());
    Ok(())
}
