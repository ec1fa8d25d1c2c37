//! The training loop: batches → augmentation → per-example objectives →
//! averaged gradients → clipped Adam step, with per-epoch dev scoring and
//! best-dev retention.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::checkpoint::Checkpoint;
use super::config::{AugmentMode, ExperimentConfig};
use super::data::{Corpus, Utterance};
use crate::augment::{add_noise, make_mix_batch, plan_tri_mix, spec_augment, tri_mix, Example};
use crate::decode::{corpus_error_rate, encode_one, greedy_attention_decode, greedy_ctc_decode};
use crate::error::{Error, Result};
use crate::features::{model_input, FeatureSequence};
use crate::losses::{mixspeech_objective, mtl_objective, tri_mix_objective, LossBreakdown, Objective};
use crate::nn::{adam_step, AdamHyper, AdamState, AsrModel, Gradients, StepOutcome, Tape};
use crate::tensor::log_softmax_rows;
use crate::tokens::TokenSequence;

const STREAM_ORDER: u64 = 1;
const STREAM_AUGMENT: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

/// Append-only record of a run: one `key=value` line per step and per epoch.
#[derive(Debug, Default)]
pub struct TrainLog {
    lines: Vec<String>,
    sink: Option<BufWriter<File>>,
}

impl TrainLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Also writes (and flushes) every record to `path`.
    pub fn to_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(TrainLog { lines: Vec::new(), sink: Some(BufWriter::new(f)) })
    }

    fn record(&mut self, line: String) -> Result<()> {
        if let Some(w) = &mut self.sink {
            writeln!(w, "{line}").and_then(|_| w.flush()).map_err(|e| Error::io("train log", e))?;
        }
        self.lines.push(line);
        Ok(())
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn text(&self) -> String {
        self.lines.iter().map(|l| format!("{l}\n")).collect()
    }

    /// Hex SHA-256 of [`TrainLog::text`].
    pub fn sha256_hex(&self) -> String {
        Sha256::digest(self.text().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |x| x.to_string())
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest dev error.
    pub checkpoint: Checkpoint,
    pub log: TrainLog,
    pub best_dev_error: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub steps: u64,
    pub skipped_infeasible: usize,
    pub skipped_batches: usize,
}

/// One loss term of a batch.
enum Term {
    Plain(Example),
    Mixed { x: FeatureSequence, y_i: TokenSequence, y_j: TokenSequence, lambda: f64 },
    Tri { x: FeatureSequence, ys: [TokenSequence; 3] },
}

/// Greedy dev decoding: attention whenever the decoder is trained, CTC for a CTC-only model.
pub fn greedy_error_rate(model: &AsrModel, utts: &[Utterance], beta: f64) -> Result<f64> {
    let mut pairs = Vec::with_capacity(utts.len());
    for u in utts {
        let enc = encode_one(model, &u.features.frames)?;
        let hyp = if beta < 1.0 {
            greedy_attention_decode(model, &enc.states, enc.states.rows())?.0
        } else {
            greedy_ctc_decode(&log_softmax_rows(&enc.ctc_logits))
        };
        pairs.push((hyp.into_ids(), u.tokens.ids().to_vec()));
    }
    corpus_error_rate(&pairs)
}

struct Trainer<'a> {
    cfg: &'a ExperimentConfig,
    corpus: &'a Corpus,
    model: AsrModel,
    adam: AdamState,
    hyper: AdamHyper,
    order_rng: ChaCha8Rng,
    aug_rng: ChaCha8Rng,
    dropout_rng: ChaCha8Rng,
    log: TrainLog,
    step: u64,
    skipped_infeasible: usize,
    skipped_batches: usize,
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

impl Trainer<'_> {
    fn example(&mut self, u: &Utterance) -> Result<Example> {
        let aug = &self.cfg.augment;
        let features = match aug.mode {
            AugmentMode::SpecAugment => spec_augment(&u.features, &aug.specaug, &mut self.aug_rng)?,
            AugmentMode::Noise => model_input(&add_noise(&u.wave, &aug.noise, &mut self.aug_rng)?, &self.cfg.feature)?,
            _ => u.features.clone(),
        };
        Ok(Example { id: u.id.clone(), features, tokens: u.tokens.clone() })
    }

    fn terms(&mut self, batch: Vec<Example>) -> Result<(Vec<Term>, usize)> {
        let aug = &self.cfg.augment;
        match aug.mode {
            AugmentMode::MixSpeech => {
                let (mixed, plain) = make_mix_batch(&batch, aug.tau, aug.alpha, &mut self.aug_rng)?;
                let n = mixed.len();
                let mut terms: Vec<Term> = mixed
                    .into_iter()
                    .map(|m| Term::Mixed { x: m.x_mix, y_i: m.y_i, y_j: m.y_j, lambda: m.lambda })
                    .collect();
                terms.extend(plain.into_iter().map(Term::Plain));
                Ok((terms, n))
            }
            AugmentMode::TriMix => {
                let (triples, plain) = plan_tri_mix(batch.len(), aug.tau, &mut self.aug_rng)?;
                let mut terms = Vec::with_capacity(batch.len());
                for t in &triples {
                    let [a, b, c] = [&batch[t.anchor], &batch[t.partners[0]], &batch[t.partners[1]]];
                    let x = tri_mix(&a.features, &b.features, &c.features)?;
                    terms.push(Term::Tri { x, ys: [a.tokens.clone(), b.tokens.clone(), c.tokens.clone()] });
                }
                let n = terms.len();
                terms.extend(plain.into_iter().map(|i| Term::Plain(batch[i].clone())));
                Ok((terms, n))
            }
            _ => Ok((batch.into_iter().map(Term::Plain).collect(), 0)),
        }
    }

    fn objective(&self, tape: &mut Tape, term: &Term) -> Result<Objective> {
        let beta = self.cfg.train.beta;
        match term {
            Term::Plain(e) => mtl_objective(&self.model, tape, &e.features.frames, &e.tokens, beta),
            Term::Mixed { x, y_i, y_j, lambda } => {
                mixspeech_objective(&self.model, tape, &x.frames, y_i, y_j, *lambda, beta)
            }
            Term::Tri { x, ys } => tri_mix_objective(&self.model, tape, &x.frames, [&ys[0], &ys[1], &ys[2]], beta),
        }
    }

    fn run_batch(&mut self, epoch: usize, indices: &[usize]) -> Result<()> {
        let corpus = self.corpus;
        let batch = indices.iter().map(|&i| self.example(&corpus.train[i])).collect::<Result<Vec<_>>>()?;
        let (terms, n_mixed) = self.terms(batch)?;

        let mut acc = Gradients::zeros_like(self.model.params());
        let mut used: Vec<LossBreakdown> = Vec::with_capacity(terms.len());
        let mut infeasible = 0;
        let mut non_finite = false;
        for term in &terms {
            let mut tape = Tape::training(self.dropout_rng.random());
            tape.set_check_finite(false);
            let obj = self.objective(&mut tape, term)?;
            let Some(loss) = obj.loss else {
                infeasible += 1;
                continue;
            };
            if !obj.breakdown.is_finite() {
                non_finite = true;
                break;
            }
            acc.add_scaled(&tape.param_grads(loss, self.model.params())?, 1.0);
            used.push(obj.breakdown);
        }
        self.skipped_infeasible += infeasible;
        if non_finite || used.is_empty() {
            self.skipped_batches += 1;
            let reason = if non_finite { "non_finite_loss" } else { "no_feasible_examples" };
            return self.log.record(format!("skip epoch={epoch} reason={reason} skipped_infeasible={infeasible}"));
        }
        let n = used.len() as f64;
        acc.scale(1.0 / n);
        let grad_norm = acc.clip_global_norm(self.cfg.train.grad_clip);
        let mean = |f: fn(&LossBreakdown) -> Option<f64>| -> Option<f64> {
            used.iter().map(f).sum::<Option<f64>>().map(|s| s / n)
        };
        let loss = used.iter().map(|b| b.mtl).sum::<f64>() / n;
        let (ctc, ce) = (mean(|b| b.ctc), mean(|b| b.ce));
        if adam_step(self.model.params_mut(), &acc, &mut self.adam, &self.hyper) == StepOutcome::SkippedNonFinite {
            self.skipped_batches += 1;
            return self.log.record(format!("skip epoch={epoch} reason=non_finite_gradient"));
        }
        self.step += 1;
        self.log.record(format!(
            "step={} epoch={epoch} loss={loss} ctc={} ce={} examples={} mixed={n_mixed} skipped_infeasible={infeasible} grad_norm={grad_norm}",
            self.step,
            opt(ctc),
            opt(ce),
            used.len(),
        ))
    }
}

/// Trains on an already loaded corpus; writes nothing to disk unless `log` has a sink.
pub fn train_corpus(cfg: &ExperimentConfig, corpus: &Corpus, log: TrainLog) -> Result<TrainOutcome> {
    cfg.validate()?;
    if corpus.dev.is_empty() {
        return Err(Error::Manifest("dev set is empty".into()));
    }
    let seed = cfg.train.seed;
    let model_cfg = cfg.model.build(cfg.feature.output_dim(), corpus.vocab.size())?;
    let model = AsrModel::new(model_cfg, seed)?;
    let adam = AdamState::new(model.params());
    let hyper = AdamHyper { lr: cfg.train.lr, ..AdamHyper::default() };
    let mut t = Trainer {
        cfg,
        corpus,
        model,
        adam,
        hyper,
        order_rng: stream(seed, STREAM_ORDER),
        aug_rng: stream(seed, STREAM_AUGMENT),
        dropout_rng: stream(seed, STREAM_DROPOUT),
        log,
        step: 0,
        skipped_infeasible: 0,
        skipped_batches: 0,
    };

    let beta = cfg.train.beta;
    let snapshot = |t: &Trainer| Checkpoint {
        model: t.model.clone(),
        feature: cfg.feature.clone(),
        vocab: corpus.vocab.clone(),
        train_beta: beta,
        optimizer: t.adam.clone(),
        rng: t.order_rng.clone(),
    };
    let mut best = snapshot(&t);
    let mut best_dev = f64::INFINITY;
    let mut best_epoch = 0;
    let mut epochs_run = 0;
    let mut order: Vec<usize> = (0..corpus.train.len()).collect();
    for epoch in 1..=cfg.total_epochs() {
        order.shuffle(&mut t.order_rng);
        for chunk in order.chunks(cfg.train.batch_size) {
            t.run_batch(epoch, chunk)?;
        }
        epochs_run = epoch;
        let dev = greedy_error_rate(&t.model, &corpus.dev, beta)?;
        if dev < best_dev {
            best_dev = dev;
            best_epoch = epoch;
            best = snapshot(&t);
        }
        t.log.record(format!("epoch={epoch} dev_error={dev} best_dev_error={best_dev} best_epoch={best_epoch}"))?;
        if cfg.train.patience > 0 && epoch - best_epoch >= cfg.train.patience {
            break;
        }
    }
    Ok(TrainOutcome {
        checkpoint: best,
        log: t.log,
        best_dev_error: best_dev,
        best_epoch,
        epochs_run,
        steps: t.step,
        skipped_infeasible: t.skipped_infeasible,
        skipped_batches: t.skipped_batches,
    })
}

/// Files written by [`train`] into its output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFiles {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub config: PathBuf,
}

impl RunFiles {
    pub fn in_dir(dir: &Path) -> Self {
        RunFiles { checkpoint: dir.join("model.ckpt"), log: dir.join("train.log"), config: dir.join("config.txt") }
    }
}

/// Loads the corpus, trains, and writes `model.ckpt`, `train.log` and `config.txt` into `out_dir`.
pub fn train(cfg: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<(TrainOutcome, Corpus)> {
    let out = out_dir.as_ref();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let files = RunFiles::in_dir(out);
    fs::write(&files.config, cfg.to_text()).map_err(|e| Error::io(&files.config, e))?;
    let corpus = Corpus::load(cfg)?;
    let outcome = train_corpus(cfg, &corpus, TrainLog::to_file(&files.log)?)?;
    outcome.checkpoint.save(&files.checkpoint)?;
    Ok((outcome, corpus))
}

