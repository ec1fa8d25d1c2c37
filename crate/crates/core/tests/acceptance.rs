//! The ten end-to-end acceptance checks, one PASS/FAIL line each.
//!
//! Criteria 5 and 6 train fifteen toy models and take roughly half an hour
//! on one core.

mod common;

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{all_paths, brute_force, op_gradient_error, primitive_cases, random_logprobs, random_tensor, whole_model_errors, Toy};
use mixspeech::augment::{spec_augment, MaskFill, SpecAugmentPolicy};
use mixspeech::decode::{beam_search_joint, encode_one, greedy_attention_decode, greedy_ctc_decode, BeamOptions};
use mixspeech::features::{FeatureKind, FeatureSequence};
use mixspeech::harness::{
    evaluate, evaluate_utterances, median, sweep_corpus, synth_dataset, train_corpus, AugmentMode, Checkpoint, Corpus,
    ExperimentConfig, SweepParam, SynthConfig, TrainLog, BETA_GRID, TAU_GRID,
};
use mixspeech::losses::{collapse, ctc_loss, mixspeech_loss, mtl_value};
use mixspeech::nn::{AsrModel, Family};
use mixspeech::tensor::Tensor;
use mixspeech::tokens::TokenSequence;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn field<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    line.split_whitespace().find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
}

fn ctc_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let t = rng.random_range(1..=6);
        let v = rng.random_range(2..=3);
        let len = rng.random_range(0..=3);
        let labels: Vec<usize> = (0..len).map(|_| rng.random_range(1..v)).collect();
        let lp = random_logprobs(t, v, &mut rng);
        let brute = -brute_force(&lp, |c| c == labels.as_slice());
        let loss = ctc_loss(&lp, &labels).loss;
        if brute.is_infinite() {
            if loss != f64::INFINITY {
                return Err(format!("infeasible T={t} {labels:?} gave {loss}"));
            }
        } else {
            worst = worst.max((loss - brute).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst < 1e-9 && secs < 30.0, format!("max |diff| {worst:.2e} over 500 cases in {secs:.1}s"))
}

fn ctc_total_probability() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst: f64 = 0.0;
    for v in 2..=3 {
        for t in 1..=5 {
            let lp = random_logprobs(t, v, &mut rng);
            let mut total = 0.0;
            for len in 0..=t {
                for l in all_paths(len, v - 1) {
                    let l: Vec<usize> = l.iter().map(|k| k + 1).collect();
                    let out = ctc_loss(&lp, &l);
                    if out.feasible {
                        total += (-out.loss).exp();
                    }
                }
            }
            worst = worst.max((total - 1.0).abs());
        }
    }
    check(worst < 1e-9, format!("max |Σ p(l) - 1| {worst:.2e}"))
}

fn gradient_checks() -> Outcome {
    let mut worst = (String::new(), 0.0f64);
    for (name, inputs, op) in primitive_cases() {
        let e = op_gradient_error(&inputs, op.as_ref());
        if e > worst.1 {
            worst = (name.to_string(), e);
        }
    }
    let n_prim = primitive_cases().len();
    for family in [Family::TransformerMini, Family::LasMini] {
        for (name, e) in whole_model_errors(family) {
            if e > worst.1 {
                worst = (format!("{family}:{name}"), e);
            }
        }
    }
    check(worst.1 < 1e-4, format!("{n_prim} primitives and both model families, worst {} at {:.2e}", worst.0, worst.1))
}

fn endpoint_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let model = AsrModel::new(common::tiny_model_config(Family::TransformerMini), 3).map_err(|e| e.to_string())?;
    let x = FeatureSequence::new(random_tensor(24, 4, &mut rng), 10.0, FeatureKind::LogFbank).unwrap();
    let yi = TokenSequence::new(vec![3, 4, 5]).unwrap();
    let yj = TokenSequence::new(vec![5, 3]).unwrap();
    let mut problems = Vec::new();
    for beta in [0.0, 0.3, 1.0] {
        let mix = mixspeech_loss(&model, &x, &yi, &yj, 1.0, beta).unwrap().mtl;
        let plain = mtl_value(&model, &x, &yi, beta).unwrap().mtl;
        if mix.to_bits() != plain.to_bits() {
            problems.push(format!("λ=1 β={beta}: {mix} vs {plain}"));
        }
        for lambda in [0.0, 0.2, 0.5, 0.9] {
            let same = mixspeech_loss(&model, &x, &yi, &yi, lambda, beta).unwrap().mtl;
            if (same - plain).abs() > 1e-12 * plain.abs() {
                problems.push(format!("y_i=y_j λ={lambda} β={beta}: {same} vs {plain}"));
            }
        }
    }
    let toy = Toy::new(40, 104);
    let mut base = toy.cfg.clone();
    base.train.epochs = 2;
    let mut zero_tau = base.clone();
    zero_tau.augment.mode = AugmentMode::MixSpeech;
    zero_tau.augment.tau = 0.0;
    let a = train_corpus(&base, &toy.corpus, TrainLog::new()).unwrap();
    let b = train_corpus(&zero_tau, &toy.corpus, TrainLog::new()).unwrap();
    if a.log.text() != b.log.text() || a.checkpoint.model != b.checkpoint.model {
        problems.push("τ=0 run differs from baseline".into());
    }
    if problems.is_empty() {
        Ok("λ=1 bit-exact, y_i=y_j collapses, τ=0 log and weights identical to baseline".into())
    } else {
        Err(problems.join("; "))
    }
}

struct ToyProtocol {
    corpus: Corpus,
    cfg: ExperimentConfig,
    _dir: tempfile::TempDir,
}

impl ToyProtocol {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        synth_dataset(&SynthConfig::default(), &data).unwrap();
        let cfg = ExperimentConfig::for_dataset(&data);
        let corpus = Corpus::load(&cfg).unwrap();
        ToyProtocol { corpus, cfg, _dir: dir }
    }

    /// Test error rate (percent) per seed.
    fn test_errors(&self, mode: AugmentMode, seeds: &[u64]) -> Vec<f64> {
        let mut cfg = self.cfg.clone();
        cfg.augment.mode = mode;
        seeds
            .iter()
            .map(|&s| {
                cfg.train.seed = s;
                let out = train_corpus(&cfg, &self.corpus, TrainLog::new()).unwrap();
                let opts = BeamOptions { beam: cfg.decode.beam, decode_beta: cfg.decode_beta(), max_len: None };
                let report =
                    evaluate_utterances(&out.checkpoint.model, &self.corpus.vocab, &self.corpus.test, &opts).unwrap();
                report.error_rate
            })
            .collect()
    }
}

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn fmt_errors(errs: &[f64]) -> String {
    errs.iter().map(|e| format!("{e:.1}")).collect::<Vec<_>>().join("/")
}

fn mixspeech_effect(p: &ToyProtocol) -> (Outcome, Vec<f64>) {
    let start = Instant::now();
    let base = p.test_errors(AugmentMode::None, &SEEDS);
    let mix = p.test_errors(AugmentMode::MixSpeech, &SEEDS);
    let mins = start.elapsed().as_secs_f64() / 60.0;
    let (mb, mm) = (median(&base), median(&mix));
    let outcome = check(
        mm <= mb && mb > 0.0 && mins < 30.0,
        format!(
            "{} train utts: baseline median {mb:.2}% [{}], MixSpeech median {mm:.2}% [{}], {mins:.1} min",
            p.corpus.train.len(),
            fmt_errors(&base),
            fmt_errors(&mix)
        ),
    );
    (outcome, mix)
}

fn tri_mix_degradation(p: &ToyProtocol, mix: &[f64]) -> Outcome {
    let tri = p.test_errors(AugmentMode::TriMix, &SEEDS);
    let (mt, mm) = (median(&tri), median(mix));
    check(mt >= mm, format!("tri-mixup median {mt:.2}% [{}] vs MixSpeech median {mm:.2}%", fmt_errors(&tri)))
}

fn sweep_tables() -> Outcome {
    let toy = Toy::new(30, 107);
    let mut cfg = toy.cfg.clone();
    cfg.train.epochs = 1;
    let mut problems = Vec::new();
    let is_cell = |c: &str| {
        c.strip_suffix('%').and_then(|n| n.split_once('.')).is_some_and(|(a, b)| {
            !a.is_empty() && a.chars().all(|ch| ch.is_ascii_digit()) && b.len() == 1 && b.chars().all(|ch| ch.is_ascii_digit())
        })
    };
    let (beta, beta_runs) = sweep_corpus(&cfg, &toy.corpus, SweepParam::Beta, &BETA_GRID, &[1], None).unwrap();
    let (tau, _) = sweep_corpus(&cfg, &toy.corpus, SweepParam::Tau, &TAU_GRID, &[1], None).unwrap();
    for (table, header) in [(&beta, ["β", "0", "0.3", "0.5", "0.7"]), (&tau, ["τ", "0%", "15%", "20%", "30%"])] {
        let text = table.format_table();
        let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split_whitespace().collect()).collect();
        if rows.len() != 2 || rows[0] != header || rows[1].len() != 5 || rows[1][0] != "PER" || !rows[1][1..].iter().all(|c| is_cell(c)) {
            problems.push(format!("bad table {text:?}"));
        }
    }
    let steps = |log: &TrainLog| -> Vec<String> { log.lines().iter().filter(|l| l.starts_with("step=")).cloned().collect() };
    let ce_only = steps(&beta_runs[0].outcome.log);
    if ce_only.is_empty() || !ce_only.iter().all(|l| field(l, "ctc") == Some("-") && field(l, "ce").is_some_and(|v| v != "-")) {
        problems.push("β=0 run logged a CTC term".into());
    }
    let mut ctc_cfg = cfg.clone();
    ctc_cfg.train.beta = 1.0;
    let ctc_only = steps(&train_corpus(&ctc_cfg, &toy.corpus, TrainLog::new()).unwrap().log);
    if ctc_only.is_empty() || !ctc_only.iter().all(|l| field(l, "ce") == Some("-") && field(l, "ctc").is_some_and(|v| v != "-")) {
        problems.push("β=1 run logged a CE term".into());
    }
    if problems.is_empty() {
        let b = beta.format_table();
        let t = tau.format_table();
        Ok(format!("rows {:?} / {:?}; β=0 logs ce only, β=1 logs ctc only", b.lines().next().unwrap(), t.lines().next().unwrap()))
    } else {
        Err(problems.join("; "))
    }
}

fn specaugment_statistics() -> Outcome {
    let x = FeatureSequence::new(Tensor::filled(100, 80, 1.0), 10.0, FeatureKind::LogFbank).unwrap();
    let policy = SpecAugmentPolicy {
        freq_mask_width: 5,
        n_freq_masks: 1,
        time_mask_width: 0,
        n_time_masks: 0,
        time_mask_upper: 1.0,
        fill: MaskFill::Zero,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let draws = 10_000;
    let mut total = 0usize;
    for _ in 0..draws {
        let y = spec_augment(&x, &policy, &mut rng).unwrap();
        total += (0..80).filter(|&c| (0..100).all(|t| y.frames.get(t, c) == 0.0)).count();
    }
    let mean = total as f64 / draws as f64;
    check((mean - 2.5).abs() <= 0.25, format!("mean masked channels {mean:.3} (target 2.5 ± 0.25)"))
}

fn decode_contracts() -> Outcome {
    let toy = Toy::new(60, 109);
    let out = {
        let mut cfg = toy.cfg.clone();
        cfg.train.epochs = 2;
        train_corpus(&cfg, &toy.corpus, TrainLog::new()).unwrap()
    };
    let model = &out.checkpoint.model;
    let utts: Vec<_> = toy.corpus.train.iter().chain(&toy.corpus.dev).chain(&toy.corpus.test).take(50).collect();
    let mut mismatches = 0;
    for u in &utts {
        let enc = encode_one(model, &u.features.frames).unwrap();
        let greedy = greedy_attention_decode(model, &enc.states, enc.states.rows()).unwrap().0;
        let beam = beam_search_joint(model, &u.features.frames, &BeamOptions { beam: 1, decode_beta: 0.0, max_len: None }).unwrap();
        if beam.best.tokens != greedy {
            mismatches += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let mut bad_paths = 0;
    for _ in 0..1000 {
        let (t, v) = (rng.random_range(1..=20), rng.random_range(2..=10));
        let path: Vec<usize> = (0..t).map(|_| rng.random_range(0..v)).collect();
        let mut lp = Tensor::filled(t, v, f64::NEG_INFINITY);
        for (r, &k) in path.iter().enumerate() {
            lp.set(r, k, 0.0);
        }
        if greedy_ctc_decode(&lp).ids() != collapse(&path).as_slice() {
            bad_paths += 1;
        }
    }
    check(
        mismatches == 0 && bad_paths == 0 && utts.len() == 50,
        format!("beam=1 vs greedy: {mismatches}/50 differ; one-hot paths: {bad_paths}/1000 differ"),
    )
}

fn determinism_and_persistence() -> Outcome {
    let toy = Toy::new(40, 110);
    let mut cfg = toy.cfg.clone();
    cfg.train.epochs = 2;
    cfg.augment.mode = AugmentMode::MixSpeech;
    let a = train_corpus(&cfg, &toy.corpus, TrainLog::new()).unwrap();
    let b = train_corpus(&cfg, &toy.corpus, TrainLog::new()).unwrap();
    let path = toy.dir.path().join("model.ckpt");
    a.checkpoint.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    let test = toy.cfg.dataset.test.clone().unwrap();
    let opts = BeamOptions::default();
    let before = evaluate(&a.checkpoint, &test, &opts).unwrap();
    let after = evaluate(&loaded, &test, &opts).unwrap();
    let same_decode = before == after && before.decode_lines(&a.checkpoint.vocab) == after.decode_lines(&loaded.vocab);
    check(
        a.log.sha256_hex() == b.log.sha256_hex() && same_decode,
        format!("log sha256 {}…; reloaded checkpoint decodes identically: {same_decode}", &a.log.sha256_hex()[..12]),
    )
}

#[test]
fn acceptance() {
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |n: usize, o: Outcome| {
        let (tag, detail) = match &o {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        writeln!(std::io::stderr(), "criterion {n:>2}: {tag}: {detail}").unwrap();
        results.push((n, o));
    };
    report(1, ctc_oracle());
    report(2, ctc_total_probability());
    report(3, gradient_checks());
    report(4, endpoint_identities());
    let protocol = ToyProtocol::new();
    let (c5, mix) = mixspeech_effect(&protocol);
    report(5, c5);
    report(6, tri_mix_degradation(&protocol, &mix));
    report(7, sweep_tables());
    report(8, specaugment_statistics());
    report(9, decode_contracts());
    report(10, determinism_and_persistence());
    let failed: Vec<usize> = results.iter().filter(|(_, o)| o.is_err()).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
