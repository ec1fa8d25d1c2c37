//! Log-space CTC forward–backward.
//!
//! The target `l` is expanded to `l' = [∅, l₁, ∅, l₂, …, l_L, ∅]` (length
//! `2L+1`). `alpha[t][s]` is the log-probability of all path prefixes ending in
//! state `s` at frame `t`; `beta[t][s]` the log-probability of all path suffixes
//! starting in state `s` at frame `t`, both including the emission at `t`.

use crate::tensor::{log_add, logsumexp, Tensor};
use crate::tokens::BLANK;

#[derive(Debug, Clone, PartialEq)]
pub struct CtcLattice {
    pub extended: Vec<usize>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtcOutput {
    /// `−log p(l | x)`; `+∞` when infeasible.
    pub loss: f64,
    /// `∂loss/∂logprobs`, zero when infeasible.
    pub grad: Tensor,
    pub feasible: bool,
}

/// Frames needed to emit `labels`: one per label plus a separating blank for
/// each adjacent repeat.
pub fn min_frames(labels: &[usize]) -> usize {
    labels.len() + labels.windows(2).filter(|w| w[0] == w[1]).count()
}

fn extend(labels: &[usize]) -> Vec<usize> {
    let mut ext = Vec::with_capacity(2 * labels.len() + 1);
    ext.push(BLANK);
    for &l in labels {
        ext.push(l);
        ext.push(BLANK);
    }
    ext
}

/// Full alpha–beta lattice for `labels` under per-frame `logprobs` (`T × V`).
pub fn ctc_lattice(logprobs: &Tensor, labels: &[usize]) -> CtcLattice {
    let t_len = logprobs.rows();
    let ext = extend(labels);
    let s_len = ext.len();
    let neg = f64::NEG_INFINITY;
    let mut alpha = vec![vec![neg; s_len]; t_len];
    let mut beta = vec![vec![neg; s_len]; t_len];
    if t_len == 0 {
        return CtcLattice { extended: ext, alpha, beta, log_likelihood: neg };
    }
    let skip_allowed = |s: usize| s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2];

    alpha[0][0] = logprobs.get(0, BLANK);
    if s_len > 1 {
        alpha[0][1] = logprobs.get(0, ext[1]);
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let mut a = alpha[t - 1][s];
            if s >= 1 {
                a = log_add(a, alpha[t - 1][s - 1]);
            }
            if skip_allowed(s) {
                a = log_add(a, alpha[t - 1][s - 2]);
            }
            alpha[t][s] = if a == neg { neg } else { a + logprobs.get(t, ext[s]) };
        }
    }

    let last = t_len - 1;
    beta[last][s_len - 1] = logprobs.get(last, ext[s_len - 1]);
    if s_len > 1 {
        beta[last][s_len - 2] = logprobs.get(last, ext[s_len - 2]);
    }
    for t in (0..last).rev() {
        for s in 0..s_len {
            let mut b = beta[t + 1][s];
            if s + 1 < s_len {
                b = log_add(b, beta[t + 1][s + 1]);
            }
            if s + 2 < s_len && skip_allowed(s + 2) {
                b = log_add(b, beta[t + 1][s + 2]);
            }
            beta[t][s] = if b == neg { neg } else { b + logprobs.get(t, ext[s]) };
        }
    }

    let mut ll = alpha[last][s_len - 1];
    if s_len > 1 {
        ll = log_add(ll, alpha[last][s_len - 2]);
    }
    CtcLattice { extended: ext, alpha, beta, log_likelihood: ll }
}

/// CTC negative log-likelihood and its exact gradient w.r.t. `logprobs`.
///
/// The gradient treats each entry of `logprobs` as a free variable, so
/// `grad[t][k] = −γ_t(k)`, the posterior occupancy of symbol `k` at frame `t`.
/// Chaining through a log-softmax yields the familiar `softmax − γ`.
pub fn ctc_loss(logprobs: &Tensor, labels: &[usize]) -> CtcOutput {
    let (t_len, v) = (logprobs.rows(), logprobs.cols());
    let infeasible = || CtcOutput { loss: f64::INFINITY, grad: Tensor::zeros(t_len, v), feasible: false };
    if t_len < min_frames(labels) || labels.iter().any(|&l| l >= v || l == BLANK) {
        return infeasible();
    }
    let lat = ctc_lattice(logprobs, labels);
    let ll = lat.log_likelihood;
    if ll == f64::NEG_INFINITY {
        return infeasible();
    }
    let mut grad = Tensor::zeros(t_len, v);
    let mut per_symbol: Vec<Vec<f64>> = vec![Vec::new(); v];
    for t in 0..t_len {
        per_symbol.iter_mut().for_each(Vec::clear);
        for (s, &k) in lat.extended.iter().enumerate() {
            let ab = lat.alpha[t][s] + lat.beta[t][s];
            if ab > f64::NEG_INFINITY {
                per_symbol[k].push(ab - logprobs.get(t, k));
            }
        }
        for (k, terms) in per_symbol.iter().enumerate() {
            if !terms.is_empty() {
                grad.set(t, k, -(logsumexp(terms) - ll).exp());
            }
        }
    }
    CtcOutput { loss: -ll, grad, feasible: true }
}

/// The collapse map: merge adjacent repeats, then drop blanks.
pub fn collapse(path: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &p in path {
        if Some(p) != prev && p != BLANK {
            out.push(p);
        }
        prev = Some(p);
    }
    out
}
