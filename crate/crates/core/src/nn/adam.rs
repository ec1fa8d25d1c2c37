use super::params::{Gradients, Parameters};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper { lr: 3e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates plus step bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
    pub skipped: u64,
}

impl AdamState {
    pub fn new(params: &Parameters) -> Self {
        let zeros = || (0..params.len()).map(|i| Tensor::zeros(params.tensor(i).rows(), params.tensor(i).cols())).collect();
        AdamState { m: zeros(), v: zeros(), step: 0, skipped: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// A gradient entry was NaN or infinite; nothing was updated.
    SkippedNonFinite,
}

pub fn adam_step(params: &mut Parameters, grads: &Gradients, state: &mut AdamState, hyper: &AdamHyper) -> StepOutcome {
    assert_eq!(params.len(), grads.len(), "gradients not aligned with parameters");
    if !grads.is_finite() {
        state.skipped += 1;
        return StepOutcome::SkippedNonFinite;
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads.tensor(i).data();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        let p = params.tensor_mut(i).data_mut();
        for j in 0..p.len() {
            m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g[j];
            v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            p[j] -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
        }
    }
    StepOutcome::Applied
}
