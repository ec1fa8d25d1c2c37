#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use mixspeech::harness::{synth_dataset, Corpus, ExperimentConfig, SynthConfig};
use mixspeech::losses::{collapse, mtl_objective};
use mixspeech::nn::{AsrModel, Family, ModelConfig, Tape, Var};
use mixspeech::tensor::{log_softmax_rows, logsumexp, Tensor};
use mixspeech::tokens::TokenSequence;

pub const H: f64 = 1e-6;

pub fn random_tensor(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Row-normalized log-probabilities from logits in `[-3, 3)`.
pub fn random_logprobs(t: usize, v: usize, rng: &mut impl Rng) -> Tensor {
    let logits = Tensor::from_vec(t, v, (0..t * v).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
    log_softmax_rows(&logits)
}

/// Every length-`t` path over `v` symbols.
pub fn all_paths(t: usize, v: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..t {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..v).map(move |k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect();
    }
    out
}

fn path_logprob(lp: &Tensor, path: &[usize]) -> f64 {
    path.iter().enumerate().map(|(t, &k)| lp.get(t, k)).sum()
}

/// `log Σ p(π)` over paths whose collapse satisfies `keep`.
pub fn brute_force(lp: &Tensor, keep: impl Fn(&[usize]) -> bool) -> f64 {
    let terms: Vec<f64> = all_paths(lp.rows(), lp.cols())
        .iter()
        .filter(|p| keep(&collapse(p)))
        .map(|p| path_logprob(lp, p))
        .collect();
    if terms.is_empty() {
        f64::NEG_INFINITY
    } else {
        logsumexp(&terms)
    }
}

/// Norm-wise relative error `‖a − n‖ / max(‖a‖, ‖n‖, 1e-6)`. The floor keeps
/// exactly-zero gradients (e.g. attention key biases, which softmax cancels)
/// from turning rounding noise into a relative error of 1.
pub fn relative_error(a: &[f64], n: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(n)).max(1e-6)
}

type Op = Box<dyn Fn(&mut Tape, &[Var]) -> Var>;

/// Reduces `op(inputs)` to a scalar by a fixed random projection and returns
/// the worst relative gradient error over the inputs.
pub fn op_gradient_error(inputs: &[Tensor], op: &dyn Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let shape = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
        let y = op(&mut tape, &vars);
        tape.shape(y)
    };
    let proj = random_tensor(shape[0], shape[1], &mut ChaCha8Rng::seed_from_u64(99));
    let run = |xs: &[Tensor]| -> (f64, Vec<Option<Tensor>>) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone())).collect();
        let y = op(&mut tape, &vars);
        let pv = tape.constant(proj.clone());
        let prod = tape.mul(y, pv).unwrap();
        let s = tape.sum(prod).unwrap();
        let grads = tape.backward(s).unwrap();
        (tape.value(s).item(), vars.iter().map(|v| grads[v.index()].clone()).collect())
    };
    let (_, grads) = run(inputs);
    let mut worst: f64 = 0.0;
    for (k, x) in inputs.iter().enumerate() {
        let analytic = grads[k].clone().unwrap_or_else(|| Tensor::zeros(x.rows(), x.cols()));
        let mut numeric = vec![0.0; x.len()];
        for (i, n) in numeric.iter_mut().enumerate() {
            let mut xs = inputs.to_vec();
            xs[k].data_mut()[i] += H;
            let fp = run(&xs).0;
            xs[k].data_mut()[i] -= 2.0 * H;
            let fm = run(&xs).0;
            *n = (fp - fm) / (2.0 * H);
        }
        worst = worst.max(relative_error(analytic.data(), &numeric));
    }
    worst
}

fn x57(seed: u64) -> Tensor {
    random_tensor(5, 7, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn rt(rows: usize, cols: usize, seed: u64) -> Tensor {
    random_tensor(rows, cols, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `(name, inputs, op)` for every differentiable tape primitive, on 5×7 inputs
/// where the primitive allows.
pub fn primitive_cases() -> Vec<(&'static str, Vec<Tensor>, Op)> {
    vec![
        ("add", vec![x57(1), x57(2)], Box::new(|t: &mut Tape, v: &[Var]| t.add(v[0], v[1]).unwrap())),
        ("sub", vec![x57(1), x57(2)], Box::new(|t: &mut Tape, v: &[Var]| t.sub(v[0], v[1]).unwrap())),
        ("mul", vec![x57(1), x57(2)], Box::new(|t: &mut Tape, v: &[Var]| t.mul(v[0], v[1]).unwrap())),
        ("scale", vec![x57(1)], Box::new(|t: &mut Tape, v: &[Var]| t.scale(v[0], -1.7).unwrap())),
        ("tanh", vec![x57(3)], Box::new(|t: &mut Tape, v: &[Var]| t.tanh(v[0]).unwrap())),
        ("sigmoid", vec![x57(3)], Box::new(|t: &mut Tape, v: &[Var]| t.sigmoid(v[0]).unwrap())),
        ("relu", vec![x57(4)], Box::new(|t: &mut Tape, v: &[Var]| t.relu(v[0]).unwrap())),
        ("add_row", vec![x57(1), rt(1, 7, 5)], Box::new(|t: &mut Tape, v: &[Var]| t.add_row(v[0], v[1]).unwrap())),
        ("matmul", vec![x57(1), rt(7, 4, 6)], Box::new(|t: &mut Tape, v: &[Var]| t.matmul(v[0], v[1]).unwrap())),
        ("matmul_nt", vec![x57(1), rt(3, 7, 7)], Box::new(|t: &mut Tape, v: &[Var]| t.matmul_nt(v[0], v[1]).unwrap())),
        ("transpose", vec![x57(1)], Box::new(|t: &mut Tape, v: &[Var]| t.transpose(v[0]).unwrap())),
        ("softmax", vec![x57(8)], Box::new(|t: &mut Tape, v: &[Var]| t.softmax(v[0]).unwrap())),
        ("log_softmax", vec![x57(8)], Box::new(|t: &mut Tape, v: &[Var]| t.log_softmax(v[0]).unwrap())),
        (
            "layer_norm",
            vec![x57(10), rt(1, 7, 9), rt(1, 7, 12)],
            Box::new(|t: &mut Tape, v: &[Var]| t.layer_norm(v[0], v[1], v[2]).unwrap()),
        ),
        (
            "concat_cols",
            vec![x57(1), rt(5, 2, 3)],
            Box::new(|t: &mut Tape, v: &[Var]| t.concat_cols(&[v[0], v[1]]).unwrap()),
        ),
        (
            "concat_rows",
            vec![x57(1), rt(2, 7, 3)],
            Box::new(|t: &mut Tape, v: &[Var]| t.concat_rows(&[v[0], v[1]]).unwrap()),
        ),
        ("slice", vec![x57(1)], Box::new(|t: &mut Tape, v: &[Var]| t.slice(v[0], 1, 3, 2, 4).unwrap())),
        ("embedding", vec![x57(1)], Box::new(|t: &mut Tape, v: &[Var]| t.embedding(v[0], &[4, 0, 4, 2]).unwrap())),
        ("frame_stack", vec![x57(1)], Box::new(|t: &mut Tape, v: &[Var]| t.frame_stack(v[0], 3, 2).unwrap())),
        ("pick", vec![x57(1)], Box::new(|t: &mut Tape, v: &[Var]| t.pick(v[0], &[6, 0, 3, 3, 1]).unwrap())),
        ("sum", vec![x57(1)], Box::new(|t: &mut Tape, v: &[Var]| t.sum(v[0]).unwrap())),
        ("mean", vec![x57(1)], Box::new(|t: &mut Tape, v: &[Var]| t.mean(v[0]).unwrap())),
        (
            "weighted_sum",
            vec![rt(1, 1, 2), rt(1, 1, 4)],
            Box::new(|t: &mut Tape, v: &[Var]| t.weighted_sum(&[(v[0], 0.25), (v[1], -2.0)]).unwrap()),
        ),
        (
            "dropout",
            vec![x57(11)],
            Box::new(|t: &mut Tape, v: &[Var]| {
                // Inference tape: identity, still differentiable.
                t.dropout(v[0], 0.3).unwrap()
            }),
        ),
    ]
}

pub fn tiny_model_config(family: Family) -> ModelConfig {
    let mut cfg = match family {
        Family::LasMini => ModelConfig::las_mini(4, 7),
        Family::TransformerMini => ModelConfig::transformer_mini(4, 7),
    };
    cfg.enc_layers = 1;
    cfg.enc_width = 8;
    cfg.dec_width = 8;
    cfg.dec_layers = 1;
    cfg.attention_heads = 2;
    cfg.dropout = 0.0;
    cfg
}

/// Per-parameter worst relative error of the β = 0.3 multi-task loss gradient.
pub fn whole_model_errors(family: Family) -> Vec<(String, f64)> {
    let mut model = AsrModel::new(tiny_model_config(family), 21).unwrap();
    let x = rt(12, 4, 22);
    let y = TokenSequence::new(vec![3, 5]).unwrap();
    let loss = |m: &AsrModel| {
        let mut tape = Tape::new();
        let obj = mtl_objective(m, &mut tape, &x, &y, 0.3).unwrap();
        let l = obj.loss.expect("feasible target");
        (tape.value(l).item(), tape.param_grads(l, m.params()).unwrap())
    };
    let (_, grads) = loss(&model);
    let mut out = Vec::new();
    for p in 0..model.params().len() {
        let n = model.params().tensor(p).len();
        let mut numeric = vec![0.0; n];
        for (i, slot) in numeric.iter_mut().enumerate() {
            let orig = model.params().tensor(p).data()[i];
            model.params_mut().tensor_mut(p).data_mut()[i] = orig + H;
            let fp = loss(&model).0;
            model.params_mut().tensor_mut(p).data_mut()[i] = orig - H;
            let fm = loss(&model).0;
            model.params_mut().tensor_mut(p).data_mut()[i] = orig;
            *slot = (fp - fm) / (2.0 * H);
        }
        out.push((model.params().name(p).to_string(), relative_error(grads.tensor(p).data(), &numeric)));
    }
    out
}

/// A synthetic corpus in a temp dir plus a config pointing at it.
pub struct Toy {
    pub dir: TempDir,
    pub cfg: ExperimentConfig,
    pub corpus: Corpus,
}

impl Toy {
    pub fn new(n_utts: usize, seed: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let data: PathBuf = dir.path().join("data");
        synth_dataset(&SynthConfig { n_utts, seed, ..SynthConfig::default() }, &data).unwrap();
        let cfg = ExperimentConfig::for_dataset(&data);
        let corpus = Corpus::load(&cfg).unwrap();
        Toy { dir, cfg, corpus }
    }
}
