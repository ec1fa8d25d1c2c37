//! Save a trained model, reload it, and confirm the decodes agree bit for bit.

use mixspeech::decode::BeamOptions;
use mixspeech::harness::{
    evaluate_utterances, sidecar_path, synth_dataset, train_corpus, Checkpoint, Corpus, ExperimentConfig, SynthConfig,
    TrainLog,
};

fn main() -> mixspeech::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let data = dir.path().join("data");
    synth_dataset(&SynthConfig { n_utts: 40, ..SynthConfig::default() }, &data)?;
    let mut cfg = ExperimentConfig::for_dataset(&data);
    cfg.train.epochs = 3;
    let corpus = Corpus::load(&cfg)?;
    let ckpt = train_corpus(&cfg, &corpus, TrainLog::new())?.checkpoint;

    let path = dir.path().join("model.ckpt");
    ckpt.save(&path)?;
    println!("{} bytes + sidecar:", std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0));
    print!("{}", std::fs::read_to_string(sidecar_path(&path)).unwrap_or_default());

    let back = Checkpoint::load(&path)?;
    let opts = BeamOptions::default();
    let a = evaluate_utterances(&ckpt.model, &ckpt.vocab, &corpus.dev, &opts)?;
    let b = evaluate_utterances(&back.model, &back.vocab, &corpus.dev, &opts)?;
    println!("reloaded equals original: {}", back == ckpt);
    println!("decodes identical: {}", a == b);
    Ok(())
}
