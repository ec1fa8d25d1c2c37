//! Greedy CTC and attention decoding, joint CTC-attention beam search, and
//! error-rate scoring.

mod metrics;
mod prefix;

pub use metrics::{corpus_error_rate, edit_distance, ErrorCounts};
pub use prefix::{ctc_prefix_score, ctc_sequence_score, CtcPrefixState};

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::losses::collapse;
use crate::nn::{decoder_forward, encoder_forward, AsrModel, EncoderOutput, PaddedBatch};
use crate::tensor::{log_softmax_rows, Tensor};
use crate::tokens::{TokenSequence, EOS, FIRST_SYMBOL, SOS};

pub const DEFAULT_BEAM: usize = 20;
pub const DEFAULT_DECODE_BETA: f64 = 0.3;

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Per-frame argmax followed by the collapse map.
pub fn greedy_ctc_decode(logprobs: &Tensor) -> TokenSequence {
    let path: Vec<usize> = (0..logprobs.rows()).map(|t| argmax(logprobs.row(t))).collect();
    TokenSequence::new(collapse(&path)).expect("collapse removes blanks")
}

/// Runs the encoder on one utterance in inference mode.
pub fn encode_one(model: &AsrModel, x: &Tensor) -> Result<EncoderOutput> {
    let batch = PaddedBatch { frames: vec![x.clone()], lengths: vec![x.rows()] };
    Ok(encoder_forward(model, &batch)?.remove(0))
}

/// Log-softmax of the decoder's prediction after `[sos] + prefix`.
fn next_token_logprobs(model: &AsrModel, enc_states: &Tensor, prefix: &[usize]) -> Result<Vec<f64>> {
    let mut y_in = Vec::with_capacity(prefix.len() + 1);
    y_in.push(SOS);
    y_in.extend_from_slice(prefix);
    let (logits, _) = decoder_forward(model, enc_states, &y_in)?;
    let last = Tensor::from_vec(1, logits.cols(), logits.row(logits.rows() - 1).to_vec())?;
    Ok(log_softmax_rows(&last).into_data())
}

/// Token ids a decoder step may emit: eos and the text symbols.
fn candidates(vocab: usize) -> impl Iterator<Item = usize> {
    std::iter::once(EOS).chain(FIRST_SYMBOL..vocab)
}

/// Attention-only greedy decoding for at most `max_len` steps. Returns the
/// tokens and whether eos was produced.
pub fn greedy_attention_decode(model: &AsrModel, enc_states: &Tensor, max_len: usize) -> Result<(TokenSequence, bool)> {
    let v = model.config().vocab_size;
    let mut tokens = Vec::new();
    let mut score = 0.0;
    for _ in 0..max_len {
        let lp = next_token_logprobs(model, enc_states, &tokens)?;
        let mut best: Option<(f64, usize)> = None;
        for c in candidates(v) {
            let s = score + lp[c];
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, c));
            }
        }
        let (s, c) = best.expect("vocabulary has eos");
        score = s;
        if c == EOS {
            return Ok((TokenSequence::new(tokens)?, true));
        }
        tokens.push(c);
    }
    Ok((TokenSequence::new(tokens)?, false))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: TokenSequence,
    /// Summed attention-decoder log-probabilities (eos included when finished).
    pub att_score: f64,
    /// CTC prefix log-probability, or the complete-sequence log-probability when finished.
    pub ctc_score: f64,
    pub joint_score: f64,
}

/// `decode_beta·ctc + (1−decode_beta)·att`; a zero weight drops its term so
/// that an infinite score on the unused side cannot produce NaN.
pub fn joint_score(ctc: f64, att: f64, decode_beta: f64) -> f64 {
    if decode_beta == 0.0 {
        att
    } else if decode_beta == 1.0 {
        ctc
    } else {
        decode_beta * ctc + (1.0 - decode_beta) * att
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamOptions {
    pub beam: usize,
    pub decode_beta: f64,
    /// Maximum decoder steps (eos included); defaults to the encoded length.
    pub max_len: Option<usize>,
}

impl Default for BeamOptions {
    fn default() -> Self {
        BeamOptions { beam: DEFAULT_BEAM, decode_beta: DEFAULT_DECODE_BETA, max_len: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamResult {
    pub best: Hypothesis,
    /// Finished hypotheses in rank order.
    pub finished: Vec<Hypothesis>,
    /// `false` when nothing reached eos within the length cap and `best` is unfinished.
    pub ended: bool,
}

struct Running {
    tokens: Vec<usize>,
    att: f64,
    ctc: CtcPrefixState,
}

struct Candidate {
    joint: f64,
    seq: Vec<usize>,
    att: f64,
    ctc_score: f64,
    state: Option<CtcPrefixState>,
}

/// Higher score first, then lexicographically smaller token ids.
fn rank(a_score: f64, a_seq: &[usize], b_score: f64, b_seq: &[usize]) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_seq.cmp(b_seq))
}

fn to_hypothesis(tokens: &[usize], att: f64, ctc: f64, decode_beta: f64) -> Result<Hypothesis> {
    Ok(Hypothesis {
        tokens: TokenSequence::new(tokens.to_vec())?,
        att_score: att,
        ctc_score: ctc,
        joint_score: joint_score(ctc, att, decode_beta),
    })
}

/// Label-synchronous joint CTC-attention beam search over one utterance.
pub fn beam_search_joint(model: &AsrModel, x: &Tensor, opts: &BeamOptions) -> Result<BeamResult> {
    let enc = encode_one(model, x)?;
    beam_search_encoded(model, &enc, opts)
}

/// [`beam_search_joint`] on precomputed encoder outputs.
pub fn beam_search_encoded(model: &AsrModel, enc: &EncoderOutput, opts: &BeamOptions) -> Result<BeamResult> {
    if opts.beam == 0 {
        return Err(Error::InvalidArgument("beam width must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&opts.decode_beta) {
        return Err(Error::InvalidArgument(format!("decode β must lie in [0, 1], got {}", opts.decode_beta)));
    }
    let v = model.config().vocab_size;
    let ctc_lp = log_softmax_rows(&enc.ctc_logits);
    let max_len = opts.max_len.unwrap_or(enc.states.rows());
    let beta = opts.decode_beta;

    let mut running = vec![Running { tokens: Vec::new(), att: 0.0, ctc: CtcPrefixState::initial(&ctc_lp) }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for _ in 0..max_len {
        let mut cands = Vec::with_capacity(running.len() * v);
        for hyp in &running {
            let lp = next_token_logprobs(model, &enc.states, &hyp.tokens)?;
            for c in candidates(v) {
                let att = hyp.att + lp[c];
                let mut seq = hyp.tokens.clone();
                seq.push(c);
                let (ctc_score, state) = if c == EOS {
                    (hyp.ctc.final_score(), None)
                } else {
                    let s = hyp.ctc.extend(&ctc_lp, c);
                    (s.score, Some(s))
                };
                cands.push(Candidate { joint: joint_score(ctc_score, att, beta), seq, att, ctc_score, state });
            }
        }
        cands.sort_by(|a, b| rank(a.joint, &a.seq, b.joint, &b.seq));
        cands.truncate(opts.beam);
        running.clear();
        for c in cands {
            match c.state {
                None => finished.push(to_hypothesis(&c.seq[..c.seq.len() - 1], c.att, c.ctc_score, beta)?),
                Some(state) => running.push(Running { tokens: c.seq, att: c.att, ctc: state }),
            }
        }
        if running.is_empty() {
            break;
        }
    }
    finished.sort_by(|a, b| rank(a.joint_score, a.tokens.ids(), b.joint_score, b.tokens.ids()));
    if let Some(best) = finished.first().cloned() {
        return Ok(BeamResult { best, finished, ended: true });
    }
    let best = running
        .iter()
        .map(|r| to_hypothesis(&r.tokens, r.att, r.ctc.score, beta))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min_by(|a, b| rank(a.joint_score, a.tokens.ids(), b.joint_score, b.tokens.ids()));
    let best = best.unwrap_or(Hypothesis {
        tokens: TokenSequence::empty(),
        att_score: 0.0,
        ctc_score: 0.0,
        joint_score: 0.0,
    });
    Ok(BeamResult { best, finished, ended: false })
}
