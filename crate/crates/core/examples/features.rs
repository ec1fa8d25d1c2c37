//! Log-mel filterbank and MFCC features from a synthetic waveform.

use mixspeech::features::{extract, format_feature_dump, model_input, FeatureConfig, FeatureKind, Waveform};
use mixspeech::harness::symbol_signature;

fn main() -> mixspeech::Result<()> {
    let sr = 16_000;
    // Three symbol signatures back to back.
    let mut samples = Vec::new();
    for k in [0, 3, 6] {
        samples.extend(symbol_signature(k, 8, 0.12, sr));
    }
    let wave = Waveform::new(samples, sr)?;
    println!("waveform: {} samples, {:.3} s", wave.len(), wave.duration_s());

    let fbank_cfg = FeatureConfig::default();
    let fbank = extract(&wave, &fbank_cfg)?;
    println!("fbank: {} frames x {} dims", fbank.num_frames(), fbank.dim());

    let mfcc_cfg = FeatureConfig { kind: FeatureKind::Mfcc, ..FeatureConfig::default() };
    let mfcc = extract(&wave, &mfcc_cfg)?;
    println!("mfcc:  {} frames x {} dims", mfcc.num_frames(), mfcc.dim());

    let normed = model_input(&wave, &fbank_cfg)?;
    let col0: Vec<f64> = (0..normed.num_frames()).map(|t| normed.frames.get(t, 0)).collect();
    let mean = col0.iter().sum::<f64>() / col0.len() as f64;
    println!("normalized channel 0 mean: {mean:.2e}");

    let dump = format_feature_dump(&mfcc);
    println!("first lines of the text dump:");
    for line in dump.lines().take(3) {
        println!("  {}", &line[..line.len().min(72)]);
    }
    Ok(())
}
