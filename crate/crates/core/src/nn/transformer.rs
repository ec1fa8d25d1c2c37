//! Transformer-mini: two stride-2 convolutional front-end layers, pre-norm
//! self-attention encoder, and a decoder with masked self-attention plus
//! cross-attention over the encoder states.

use super::config::ModelConfig;
use super::model::{AsrModel, DecoderOutput, Encoded};
use super::params::ParamInit;
use super::tape::{Tape, Var};
use crate::error::Result;
use crate::tensor::Tensor;

const KERNEL: usize = 3;
const STRIDE: usize = 2;
const FFN_MULT: usize = 4;
const MASKED: f64 = -1e30;

fn declare_attention(init: &mut ParamInit, prefix: &str, h: usize) {
    for p in ["q", "k", "v", "o"] {
        init.linear(&format!("{prefix}.{p}"), h, h);
    }
}

pub(super) fn declare(cfg: &ModelConfig, init: &mut ParamInit) {
    let h = cfg.enc_width;
    let v = cfg.vocab_size;
    init.linear("front.conv1", KERNEL * cfg.feature_dim, h);
    init.linear("front.conv2", KERNEL * h, h);
    for l in 0..cfg.enc_layers {
        let p = format!("enc.{l}");
        init.layer_norm(&format!("{p}.ln1"), h);
        declare_attention(init, &format!("{p}.att"), h);
        init.layer_norm(&format!("{p}.ln2"), h);
        init.linear(&format!("{p}.ff1"), h, FFN_MULT * h);
        init.linear(&format!("{p}.ff2"), FFN_MULT * h, h);
    }
    init.layer_norm("enc.ln_out", h);
    init.linear("ctc", h, v);

    init.uniform("dec.embed", v, h, h);
    for l in 0..cfg.dec_layers {
        let p = format!("dec.{l}");
        init.layer_norm(&format!("{p}.ln1"), h);
        declare_attention(init, &format!("{p}.self"), h);
        init.layer_norm(&format!("{p}.ln2"), h);
        declare_attention(init, &format!("{p}.src"), h);
        init.layer_norm(&format!("{p}.ln3"), h);
        init.linear(&format!("{p}.ff1"), h, FFN_MULT * h);
        init.linear(&format!("{p}.ff2"), FFN_MULT * h, h);
    }
    init.layer_norm("dec.ln_out", h);
    init.linear("dec.out", h, v);
}

/// Sinusoidal position table, `len × width`.
pub fn positional_encoding(len: usize, width: usize) -> Tensor {
    let mut pe = Tensor::zeros(len, width);
    for t in 0..len {
        let row = pe.row_mut(t);
        for i in (0..width).step_by(2) {
            let angle = t as f64 / 10000f64.powf(i as f64 / width as f64);
            row[i] = angle.sin();
            if i + 1 < width {
                row[i + 1] = angle.cos();
            }
        }
    }
    pe
}

/// `x * scale` plus positions.
fn with_positions(tape: &mut Tape, x: Var, scale: f64) -> Result<Var> {
    let [len, width] = tape.shape(x);
    let scaled = tape.scale(x, scale)?;
    let pe = tape.constant(positional_encoding(len, width));
    tape.add(scaled, pe)
}

/// Multi-head attention; returns the output and the head-averaged weights.
fn attention(model: &AsrModel, tape: &mut Tape, prefix: &str, q_in: Var, kv_in: Var, causal: bool) -> Result<(Var, Tensor)> {
    let heads = model.config().attention_heads;
    let h = tape.shape(q_in)[1];
    let dh = h / heads;
    let q = model.linear(tape, q_in, &format!("{prefix}.q"))?;
    let k = model.linear(tape, kv_in, &format!("{prefix}.k"))?;
    let v = model.linear(tape, kv_in, &format!("{prefix}.v"))?;
    let (tq, tk) = (tape.shape(q)[0], tape.shape(k)[0]);
    let mask = if causal {
        let mut m = Tensor::zeros(tq, tk);
        for i in 0..tq {
            for j in (i + 1)..tk {
                m.set(i, j, MASKED);
            }
        }
        Some(tape.constant(m))
    } else {
        None
    };
    let mut weights = Tensor::zeros(tq, tk);
    let mut outs = Vec::with_capacity(heads);
    for hd in 0..heads {
        let qh = tape.slice_cols(q, hd * dh, dh)?;
        let kh = tape.slice_cols(k, hd * dh, dh)?;
        let vh = tape.slice_cols(v, hd * dh, dh)?;
        let s = tape.matmul_nt(qh, kh)?;
        let mut s = tape.scale(s, 1.0 / (dh as f64).sqrt())?;
        if let Some(m) = mask {
            s = tape.add(s, m)?;
        }
        let a = tape.softmax(s)?;
        for (w, x) in weights.data_mut().iter_mut().zip(tape.value(a).data()) {
            *w += x / heads as f64;
        }
        outs.push(tape.matmul(a, vh)?);
    }
    let o = if heads == 1 { outs[0] } else { tape.concat_cols(&outs)? };
    Ok((model.linear(tape, o, &format!("{prefix}.o"))?, weights))
}

fn feed_forward(model: &AsrModel, tape: &mut Tape, prefix: &str, x: Var) -> Result<Var> {
    let a = model.linear(tape, x, &format!("{prefix}.ff1"))?;
    let a = tape.relu(a)?;
    model.linear(tape, a, &format!("{prefix}.ff2"))
}

/// `x + dropout(f(x))`.
fn residual(tape: &mut Tape, x: Var, fx: Var, p: f64) -> Result<Var> {
    let fx = tape.dropout(fx, p)?;
    tape.add(x, fx)
}

pub(super) fn encode(model: &AsrModel, tape: &mut Tape, x: &Tensor) -> Result<Encoded> {
    let cfg = model.config();
    let p = cfg.dropout;
    let x = tape.constant(x.clone());
    let s1 = tape.frame_stack(x, KERNEL, STRIDE)?;
    let c1 = model.linear(tape, s1, "front.conv1")?;
    let c1 = tape.relu(c1)?;
    let s2 = tape.frame_stack(c1, KERNEL, STRIDE)?;
    let c2 = model.linear(tape, s2, "front.conv2")?;
    let c2 = tape.relu(c2)?;
    let mut hcur = with_positions(tape, c2, 1.0)?;
    hcur = tape.dropout(hcur, p)?;
    for l in 0..cfg.enc_layers {
        let pre = format!("enc.{l}");
        let n1 = model.layer_norm(tape, hcur, &format!("{pre}.ln1"))?;
        let (att, _) = attention(model, tape, &format!("{pre}.att"), n1, n1, false)?;
        hcur = residual(tape, hcur, att, p)?;
        let n2 = model.layer_norm(tape, hcur, &format!("{pre}.ln2"))?;
        let ff = feed_forward(model, tape, &pre, n2)?;
        hcur = residual(tape, hcur, ff, p)?;
    }
    let states = model.layer_norm(tape, hcur, "enc.ln_out")?;
    let ctc_logits = model.linear(tape, states, "ctc")?;
    Ok(Encoded { states, ctc_logits })
}

pub(super) fn decode(model: &AsrModel, tape: &mut Tape, enc: &Encoded, y_in: &[usize]) -> Result<DecoderOutput> {
    let cfg = model.config();
    let p = cfg.dropout;
    let table = tape.named(model.params(), "dec.embed");
    let emb = tape.embedding(table, y_in)?;
    let mut hcur = with_positions(tape, emb, (cfg.dec_width as f64).sqrt())?;
    hcur = tape.dropout(hcur, p)?;
    let mut attention_weights = Tensor::zeros(0, 0);
    for l in 0..cfg.dec_layers {
        let pre = format!("dec.{l}");
        let n1 = model.layer_norm(tape, hcur, &format!("{pre}.ln1"))?;
        let (sa, _) = attention(model, tape, &format!("{pre}.self"), n1, n1, true)?;
        hcur = residual(tape, hcur, sa, p)?;
        let n2 = model.layer_norm(tape, hcur, &format!("{pre}.ln2"))?;
        let (ca, w) = attention(model, tape, &format!("{pre}.src"), n2, enc.states, false)?;
        attention_weights = w;
        hcur = residual(tape, hcur, ca, p)?;
        let n3 = model.layer_norm(tape, hcur, &format!("{pre}.ln3"))?;
        let ff = feed_forward(model, tape, &pre, n3)?;
        hcur = residual(tape, hcur, ff, p)?;
    }
    let out = model.layer_norm(tape, hcur, "dec.ln_out")?;
    let logits = model.linear(tape, out, "dec.out")?;
    Ok(DecoderOutput { logits, attention: attention_weights.to_rows() })
}
