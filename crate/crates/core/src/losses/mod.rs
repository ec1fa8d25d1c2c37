//! CTC, sequence cross-entropy, their β-weighted combination and the
//! λ-weighted MixSpeech objective.
//!
//! CE is averaged over target tokens (eos included); CTC is summed over the
//! utterance. The two are combined as-is.

mod ctc;

pub use ctc::{collapse, ctc_lattice, ctc_loss, min_frames, CtcLattice, CtcOutput};

use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::nn::{AsrModel, Encoded, Tape, Var};
use crate::tensor::{log_softmax_rows, Tensor};
use crate::tokens::TokenSequence;

pub const DEFAULT_BETA: f64 = 0.3;

/// Mean over steps of `−log softmax(logits_u)[targets_u]`.
pub fn ce_loss(logits: &Tensor, targets: &[usize]) -> Result<f64> {
    if logits.rows() != targets.len() || targets.is_empty() {
        return Err(Error::shape("ce_loss", format!("{} logit rows for {} targets", logits.rows(), targets.len())));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= logits.cols()) {
        return Err(Error::TokenRange { id: bad, vocab: logits.cols() });
    }
    let lp = log_softmax_rows(logits);
    Ok(-targets.iter().enumerate().map(|(u, &y)| lp.get(u, y)).sum::<f64>() / targets.len() as f64)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("β must lie in [0, 1], got {beta}")));
    }
    Ok(())
}

/// `β·ctc + (1−β)·ce`.
pub fn mtl_loss(ctc: f64, ce: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(beta * ctc + (1.0 - beta) * ce)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    /// Weighted CTC term; `None` when β = 0 (not computed).
    pub ctc: Option<f64>,
    /// Weighted CE term; `None` when β = 1 (not computed).
    pub ce: Option<f64>,
    pub mtl: f64,
    pub lambda: Option<f64>,
    /// `(L_MTL(x, y_i), L_MTL(x, y_j))` for a mixed pair.
    pub per_target: Option<(f64, f64)>,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.mtl.is_finite()
    }
}

/// A loss recorded on a tape. `loss` is `None` when some CTC term was
/// infeasible (too few frames for its target), in which case the example
/// should be skipped.
#[derive(Debug, Clone)]
pub struct Objective {
    pub loss: Option<Var>,
    pub breakdown: LossBreakdown,
}

struct TargetTerm {
    mtl: Option<Var>,
    ctc: Option<f64>,
    ce: Option<f64>,
    value: f64,
}

fn target_term(
    model: &AsrModel,
    tape: &mut Tape,
    enc: &Encoded,
    ctc_logprobs: Option<Var>,
    y: &TokenSequence,
    beta: f64,
) -> Result<TargetTerm> {
    let mut parts = Vec::with_capacity(2);
    let mut ctc_value = None;
    let mut feasible = true;
    if let Some(lp) = ctc_logprobs {
        let out = ctc_loss(tape.value(lp), y.ids());
        ctc_value = Some(out.loss);
        if out.feasible {
            let node = tape.external(lp, out.loss, out.grad)?;
            parts.push((node, beta));
        } else {
            feasible = false;
        }
    }
    let mut ce_value = None;
    if beta < 1.0 {
        let dec = model.decode(tape, enc, &y.with_sos())?;
        let lp = tape.log_softmax(dec.logits)?;
        let picked = tape.pick(lp, &y.with_eos())?;
        let mean = tape.mean(picked)?;
        let ce = tape.scale(mean, -1.0)?;
        ce_value = Some(tape.value(ce).item());
        parts.push((ce, 1.0 - beta));
    }
    if !feasible {
        return Ok(TargetTerm { mtl: None, ctc: ctc_value, ce: ce_value, value: f64::INFINITY });
    }
    let mtl = tape.weighted_sum(&parts)?;
    let value = tape.value(mtl).item();
    Ok(TargetTerm { mtl: Some(mtl), ctc: ctc_value, ce: ce_value, value })
}

/// `Σₖ wₖ·L_MTL(x, yₖ)` with one encoder pass and one decoder pass per target.
pub fn weighted_objective(
    model: &AsrModel,
    tape: &mut Tape,
    x: &Tensor,
    targets: &[(&TokenSequence, f64)],
    beta: f64,
) -> Result<Objective> {
    check_beta(beta)?;
    if targets.is_empty() {
        return Err(Error::InvalidArgument("objective needs at least one target".into()));
    }
    let enc = model.encode(tape, x)?;
    let ctc_logprobs = if beta > 0.0 { Some(tape.log_softmax(enc.ctc_logits)?) } else { None };
    let mut terms = Vec::with_capacity(targets.len());
    for &(y, _) in targets {
        terms.push(target_term(model, tape, &enc, ctc_logprobs, y, beta)?);
    }
    let combine = |f: fn(&TargetTerm) -> Option<f64>| -> Option<f64> {
        terms.iter().zip(targets).map(|(t, &(_, w))| f(t).map(|v| w * v)).sum()
    };
    let ctc = combine(|t| t.ctc);
    let ce = combine(|t| t.ce);
    let per_target = (terms.len() == 2).then(|| (terms[0].value, terms[1].value));
    let lambda = (targets.len() == 2).then_some(targets[0].1);
    let feasible = terms.iter().all(|t| t.mtl.is_some());
    let (loss, mtl) = if feasible {
        let weighted: Vec<(Var, f64)> = terms.iter().zip(targets).map(|(t, &(_, w))| (t.mtl.unwrap(), w)).collect();
        let loss = tape.weighted_sum(&weighted)?;
        (Some(loss), tape.value(loss).item())
    } else {
        (None, f64::INFINITY)
    };
    Ok(Objective { loss, breakdown: LossBreakdown { ctc, ce, mtl, lambda, per_target } })
}

/// `L_MTL(x, y) = β·L_CTC + (1−β)·L_CE` on a tape.
pub fn mtl_objective(model: &AsrModel, tape: &mut Tape, x: &Tensor, y: &TokenSequence, beta: f64) -> Result<Objective> {
    weighted_objective(model, tape, x, &[(y, 1.0)], beta)
}

/// `λ·L_MTL(x_mix, y_i) + (1−λ)·L_MTL(x_mix, y_j)` on a tape, sharing one encoder pass.
pub fn mixspeech_objective(
    model: &AsrModel,
    tape: &mut Tape,
    x_mix: &Tensor,
    y_i: &TokenSequence,
    y_j: &TokenSequence,
    lambda: f64,
    beta: f64,
) -> Result<Objective> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("λ must lie in [0, 1], got {lambda}")));
    }
    weighted_objective(model, tape, x_mix, &[(y_i, lambda), (y_j, 1.0 - lambda)], beta)
}

/// Mean of the three MTL losses of a tri-mixed input.
pub fn tri_mix_objective(model: &AsrModel, tape: &mut Tape, x: &Tensor, ys: [&TokenSequence; 3], beta: f64) -> Result<Objective> {
    let w = 1.0 / 3.0;
    weighted_objective(model, tape, x, &[(ys[0], w), (ys[1], w), (ys[2], w)], beta)
}

/// Inference-mode MixSpeech loss; infeasible CTC terms show up as `+∞`.
pub fn mixspeech_loss(
    model: &AsrModel,
    x_mix: &FeatureSequence,
    y_i: &TokenSequence,
    y_j: &TokenSequence,
    lambda: f64,
    beta: f64,
) -> Result<LossBreakdown> {
    let mut tape = Tape::new();
    Ok(mixspeech_objective(model, &mut tape, &x_mix.frames, y_i, y_j, lambda, beta)?.breakdown)
}

/// Inference-mode `L_MTL(x, y)`.
pub fn mtl_value(model: &AsrModel, x: &FeatureSequence, y: &TokenSequence, beta: f64) -> Result<LossBreakdown> {
    let mut tape = Tape::new();
    Ok(mtl_objective(model, &mut tape, &x.frames, y, beta)?.breakdown)
}
