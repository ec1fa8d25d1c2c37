//! CTC prefix probabilities for label-synchronous decoding.
//!
//! For a prefix `g`, `r_n[t]` / `r_b[t]` are the log-probabilities that the
//! first `t+1` frames collapse to exactly `g` while ending in a non-blank /
//! blank frame. Extending `g` by a symbol `c` gives both the new forward
//! variables and the prefix score `ψ`: the log-probability of every full path
//! whose collapse starts with `g·c`.

use crate::tensor::{log_add, logsumexp, Tensor};
use crate::tokens::BLANK;

const NEG: f64 = f64::NEG_INFINITY;

#[derive(Debug, Clone, PartialEq)]
pub struct CtcPrefixState {
    r_n: Vec<f64>,
    r_b: Vec<f64>,
    last: Option<usize>,
    /// Log prefix probability of the prefix this state represents.
    pub score: f64,
}

impl CtcPrefixState {
    /// State of the empty prefix.
    pub fn initial(logprobs: &Tensor) -> Self {
        let t_len = logprobs.rows();
        let mut r_b = vec![NEG; t_len];
        let mut acc = 0.0;
        for (t, r) in r_b.iter_mut().enumerate() {
            acc += logprobs.get(t, BLANK);
            *r = acc;
        }
        CtcPrefixState { r_n: vec![NEG; t_len], r_b, last: None, score: 0.0 }
    }

    /// State for the prefix extended by `c` (a non-blank symbol).
    pub fn extend(&self, logprobs: &Tensor, c: usize) -> Self {
        let t_len = logprobs.rows();
        let mut r_n = vec![NEG; t_len];
        let mut r_b = vec![NEG; t_len];
        if t_len == 0 {
            return CtcPrefixState { r_n, r_b, last: Some(c), score: NEG };
        }
        let phi = |t: usize| {
            if self.last == Some(c) {
                self.r_b[t]
            } else {
                log_add(self.r_b[t], self.r_n[t])
            }
        };
        if self.last.is_none() {
            r_n[0] = logprobs.get(0, c);
        }
        let mut terms = Vec::with_capacity(t_len);
        terms.push(r_n[0]);
        for t in 1..t_len {
            let p = phi(t - 1);
            let emit = logprobs.get(t, c);
            r_n[t] = log_add(r_n[t - 1], p) + emit;
            r_b[t] = log_add(r_b[t - 1], r_n[t - 1]) + logprobs.get(t, BLANK);
            terms.push(p + emit);
        }
        CtcPrefixState { r_n, r_b, last: Some(c), score: logsumexp(&terms) }
    }

    /// Log-probability that the whole input collapses to exactly this prefix.
    pub fn final_score(&self) -> f64 {
        match (self.r_n.last(), self.r_b.last()) {
            (Some(&n), Some(&b)) => log_add(n, b),
            _ => NEG,
        }
    }
}

/// Log-probability of all paths whose collapse begins with `prefix`; 0 for the
/// empty prefix, `−∞` when the prefix cannot fit.
pub fn ctc_prefix_score(logprobs: &Tensor, prefix: &[usize]) -> f64 {
    prefix_state(logprobs, prefix).score
}

/// Log-probability that the input collapses to exactly `labels`.
pub fn ctc_sequence_score(logprobs: &Tensor, labels: &[usize]) -> f64 {
    prefix_state(logprobs, labels).final_score()
}

fn prefix_state(logprobs: &Tensor, prefix: &[usize]) -> CtcPrefixState {
    prefix
        .iter()
        .fold(CtcPrefixState::initial(logprobs), |s, &c| s.extend(logprobs, c))
}
