//! Generate a small synthetic corpus and inspect its manifests.

use mixspeech::harness::{read_manifest, synth_dataset, SynthConfig};

fn main() -> mixspeech::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let out = dir.path().join("corpus");
    let cfg = SynthConfig { n_utts: 30, vocab_size: 6, len_range: (2, 5), ..SynthConfig::default() };
    let made = synth_dataset(&cfg, &out)?;
    println!("train {} / dev {} / test {}", made.train.len(), made.dev.len(), made.test.len());
    for u in read_manifest(&made.train_manifest)?.iter().take(5) {
        println!("{}\t{}\t{}", u.id, u.wav_path.file_name().unwrap().to_string_lossy(), u.text);
    }
    // A second run into the same directory is refused.
    println!("regenerate into the same directory: {}", synth_dataset(&cfg, &out).unwrap_err());
    Ok(())
}
