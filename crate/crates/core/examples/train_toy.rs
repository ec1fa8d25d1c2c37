//! Baseline versus MixSpeech on a small synthetic corpus, scored with joint
//! beam search on the test split.

use std::time::Instant;

use mixspeech::decode::BeamOptions;
use mixspeech::harness::{
    evaluate_utterances, synth_dataset, train_corpus, AugmentMode, Corpus, ExperimentConfig, SynthConfig, TrainLog,
};

fn main() -> mixspeech::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let data = dir.path().join("data");
    synth_dataset(&SynthConfig { n_utts: 120, ..SynthConfig::default() }, &data)?;
    let base = ExperimentConfig::for_dataset(&data);
    let corpus = Corpus::load(&base)?;
    println!("{} train / {} dev / {} test utterances", corpus.train.len(), corpus.dev.len(), corpus.test.len());

    for mode in [AugmentMode::None, AugmentMode::MixSpeech, AugmentMode::SpecAugment] {
        let mut cfg = base.clone();
        cfg.augment.mode = mode;
        cfg.train.epochs = 15;
        let start = Instant::now();
        let out = train_corpus(&cfg, &corpus, TrainLog::new())?;
        let opts = BeamOptions { beam: cfg.decode.beam, decode_beta: cfg.decode_beta(), max_len: None };
        let report = evaluate_utterances(&out.checkpoint.model, &corpus.vocab, &corpus.test, &opts)?;
        println!(
            "{:<12} epochs {:2} (best {:2})  dev {:5.1}%  test {} {:5.1}%  {:.0} s",
            mode.to_string(),
            out.epochs_run,
            out.best_epoch,
            out.best_dev_error,
            report.metric,
            report.error_rate,
            start.elapsed().as_secs_f64()
        );
        if let Some(last) = out.log.lines().iter().rev().find(|l| l.starts_with("step=")) {
            println!("  last step: {last}");
        }
    }
    Ok(())
}
