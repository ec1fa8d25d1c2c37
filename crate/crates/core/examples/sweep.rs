//! A reduced β sweep, printed in the two-row table layout plus TSV.

use mixspeech::harness::{sweep_corpus, synth_dataset, Corpus, ExperimentConfig, SweepParam, SynthConfig, BETA_GRID};

fn main() -> mixspeech::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let data = dir.path().join("data");
    synth_dataset(&SynthConfig { n_utts: 60, ..SynthConfig::default() }, &data)?;
    let mut cfg = ExperimentConfig::for_dataset(&data);
    cfg.train.epochs = 4;
    let corpus = Corpus::load(&cfg)?;
    let (table, runs) = sweep_corpus(&cfg, &corpus, SweepParam::Beta, &BETA_GRID, &[1, 2], None)?;
    print!("{}", table.format_table());
    println!();
    print!("{}", table.to_tsv());
    for r in runs.iter().filter(|r| r.seed == 1) {
        let first = r.outcome.log.lines().iter().find(|l| l.starts_with("step=")).cloned().unwrap_or_default();
        println!("beta={} first step: {first}", r.value);
    }
    Ok(())
}
