use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mixspeech::decode::BeamOptions;
use mixspeech::features::{extract, model_input, read_wav, write_feature_dump};
use mixspeech::harness::{
    evaluate, read_manifest, sweep, synth_dataset, train, Checkpoint, EvalReport, ExperimentConfig, SweepParam,
    SynthConfig,
};
use mixspeech::{Error, Result};

#[derive(Parser)]
#[command(name = "mixspeech", version, about = "Train and evaluate small joint CTC-attention recognizers with MixSpeech")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (or file for eval/decode).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic tone-chirp corpus with train/dev/test manifests.
    SynthData {
        #[arg(long)]
        n_utts: Option<usize>,
        #[arg(long)]
        vocab_size: Option<usize>,
        #[arg(long)]
        min_len: Option<usize>,
        #[arg(long)]
        max_len: Option<usize>,
    },
    /// Write one feature dump per utterance.
    Featurize {
        /// Manifest to featurize; defaults to every manifest in the config.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Skip per-utterance mean/variance normalization.
        #[arg(long)]
        raw: bool,
    },
    /// Train a model; writes model.ckpt, train.log and config.txt.
    Train,
    /// Beam-decode a manifest and print the pooled error rate.
    Eval(DecodeArgs),
    /// Beam-decode a manifest and print one hypothesis per utterance.
    Decode(DecodeArgs),
    /// Train one run per (value, seed) and tabulate median dev error.
    Sweep {
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated grid; defaults to the standard grid for the parameter.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// Comma-separated seeds; defaults to `--seed` or the config seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Defaults to the config's test manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    beam: Option<usize>,
    /// CTC weight in the joint score; defaults to the config, then to the training β.
    #[arg(long)]
    decode_beta: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(shared: &Shared) -> Result<ExperimentConfig> {
    let path = shared.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(s) = shared.seed {
        cfg.train.seed = s;
    }
    Ok(cfg)
}

fn require_out(shared: &Shared) -> Result<&Path> {
    shared.out.as_deref().ok_or_else(|| Error::InvalidArgument("--out is required".into()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn run(cli: Cli) -> Result<()> {
    let shared = &cli.shared;
    match cli.command {
        Command::SynthData { n_utts, vocab_size, min_len, max_len } => {
            let mut cfg = match &shared.config {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    SynthConfig::parse(&text)?
                }
                None => SynthConfig::default(),
            };
            cfg.n_utts = n_utts.unwrap_or(cfg.n_utts);
            cfg.vocab_size = vocab_size.unwrap_or(cfg.vocab_size);
            cfg.len_range = (min_len.unwrap_or(cfg.len_range.0), max_len.unwrap_or(cfg.len_range.1));
            cfg.seed = shared.seed.unwrap_or(cfg.seed);
            let out = synth_dataset(&cfg, require_out(shared)?)?;
            println!(
                "wrote {} train, {} dev, {} test utterances; manifests in {}",
                out.train.len(),
                out.dev.len(),
                out.test.len(),
                out.train_manifest.parent().unwrap_or(Path::new(".")).display()
            );
        }
        Command::Featurize { manifest, raw } => {
            let cfg = load_config(shared)?;
            let out = require_out(shared)?;
            fs::create_dir_all(out).map_err(|e| Error::Io { path: out.to_path_buf(), source: e })?;
            let manifests = match manifest {
                Some(m) => vec![m],
                None => [Some(cfg.dataset.train.clone()), Some(cfg.dataset.dev.clone()), cfg.dataset.test.clone()]
                    .into_iter()
                    .flatten()
                    .collect(),
            };
            let mut n = 0;
            for m in &manifests {
                for u in read_manifest(m)? {
                    let wave = read_wav(&u.wav_path)?;
                    let feats = if raw { extract(&wave, &cfg.feature)? } else { model_input(&wave, &cfg.feature)? };
                    write_feature_dump(out.join(format!("{}.feat", u.id)), &feats)?;
                    n += 1;
                }
            }
            println!("wrote {n} feature dumps to {}", out.display());
        }
        Command::Train => {
            let cfg = load_config(shared)?;
            let out = require_out(shared)?;
            let (outcome, _) = train(&cfg, out)?;
            println!(
                "epochs={} steps={} best_epoch={} best_dev_error={:.2}% skipped_infeasible={} skipped_batches={}",
                outcome.epochs_run,
                outcome.steps,
                outcome.best_epoch,
                outcome.best_dev_error,
                outcome.skipped_infeasible,
                outcome.skipped_batches
            );
        }
        Command::Eval(args) => {
            let (_, report) = decode_run(shared, &args)?;
            let text = report.summary();
            print!("{text}");
            if let Some(out) = &shared.out {
                write(out, &text)?;
            }
        }
        Command::Decode(args) => {
            let (ckpt, report) = decode_run(shared, &args)?;
            let text = report.decode_lines(&ckpt.vocab);
            match &shared.out {
                Some(out) => write(out, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Sweep { param, values, seeds } => {
            let cfg = load_config(shared)?;
            let values = values.unwrap_or_else(|| param.default_grid().to_vec());
            let seeds = seeds.unwrap_or_else(|| vec![cfg.train.seed]);
            let table = sweep(&cfg, param, &values, &seeds, shared.out.as_deref())?;
            print!("{}", table.format_table());
        }
    }
    Ok(())
}

fn decode_run(shared: &Shared, args: &DecodeArgs) -> Result<(Checkpoint, EvalReport)> {
    let cfg = shared.config.as_ref().map(ExperimentConfig::from_file).transpose()?;
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let manifest = match (&args.manifest, &cfg) {
        (Some(m), _) => m.clone(),
        (None, Some(c)) => {
            c.dataset.test.clone().ok_or_else(|| Error::Config("config names no dataset.test manifest".into()))?
        }
        (None, None) => return Err(Error::InvalidArgument("pass --manifest or --config".into())),
    };
    let beam = args.beam.or(cfg.as_ref().map(|c| c.decode.beam)).unwrap_or(BeamOptions::default().beam);
    let decode_beta =
        args.decode_beta.or(cfg.as_ref().and_then(|c| c.decode.beta)).unwrap_or(ckpt.train_beta);
    let report = evaluate(&ckpt, manifest, &BeamOptions { beam, decode_beta, max_len: None })?;
    Ok((ckpt, report))
}
