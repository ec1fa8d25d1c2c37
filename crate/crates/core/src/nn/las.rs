//! LAS-mini: stacked bidirectional LSTM encoder (no subsampling) and an LSTM
//! decoder with additive content attention.

use super::config::ModelConfig;
use super::model::{AsrModel, DecoderOutput, Encoded};
use super::params::ParamInit;
use super::tape::{Tape, Var};
use crate::error::Result;
use crate::tensor::Tensor;

/// LSTM weights: input projection `in × 4h`, recurrent `h × 4h`, bias `1 × 4h`.
/// Gate order is input, forget, cell, output.
fn declare_lstm(init: &mut ParamInit, prefix: &str, in_dim: usize, h: usize) {
    init.uniform(format!("{prefix}.wx"), in_dim, 4 * h, h);
    init.uniform(format!("{prefix}.wh"), h, 4 * h, h);
    init.uniform(format!("{prefix}.b"), 1, 4 * h, h);
}

pub(super) fn declare(cfg: &ModelConfig, init: &mut ParamInit) {
    let half = cfg.enc_width / 2;
    for l in 0..cfg.enc_layers {
        let in_dim = if l == 0 { cfg.feature_dim } else { cfg.enc_width };
        declare_lstm(init, &format!("enc.{l}.fwd"), in_dim, half);
        declare_lstm(init, &format!("enc.{l}.bwd"), in_dim, half);
    }
    init.linear("ctc", cfg.enc_width, cfg.vocab_size);

    let d = cfg.dec_width;
    init.uniform("dec.embed", cfg.vocab_size, d, d);
    for l in 0..cfg.dec_layers {
        let in_dim = if l == 0 { d + cfg.enc_width } else { d };
        declare_lstm(init, &format!("dec.{l}.lstm"), in_dim, d);
    }
    init.linear("dec.att.enc", cfg.enc_width, d);
    init.uniform("dec.att.dec.w", d, d, d);
    init.uniform("dec.att.v.w", d, 1, d);
    init.linear("dec.out", d + cfg.enc_width, cfg.vocab_size);
}

struct Lstm {
    wh: Var,
    h: usize,
}

impl Lstm {
    /// One step from precomputed input gates `gx` (`1 × 4h`).
    fn step(&self, tape: &mut Tape, gx: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
        let h = self.h;
        let rec = tape.matmul(h_prev, self.wh)?;
        let g = tape.add(gx, rec)?;
        let i = tape.slice_cols(g, 0, h)?;
        let i = tape.sigmoid(i)?;
        let f = tape.slice_cols(g, h, h)?;
        let f = tape.sigmoid(f)?;
        let cand = tape.slice_cols(g, 2 * h, h)?;
        let cand = tape.tanh(cand)?;
        let o = tape.slice_cols(g, 3 * h, h)?;
        let o = tape.sigmoid(o)?;
        let keep = tape.mul(f, c_prev)?;
        let write = tape.mul(i, cand)?;
        let c = tape.add(keep, write)?;
        let tc = tape.tanh(c)?;
        let hn = tape.mul(o, tc)?;
        Ok((hn, c))
    }
}

fn input_gates(model: &AsrModel, tape: &mut Tape, x: Var, prefix: &str) -> Result<(Var, Lstm)> {
    let params = model.params();
    let wx = tape.named(params, &format!("{prefix}.wx"));
    let wh = tape.named(params, &format!("{prefix}.wh"));
    let b = tape.named(params, &format!("{prefix}.b"));
    let h = tape.shape(wh)[0];
    let gx = tape.matmul(x, wx)?;
    let gx = tape.add_row(gx, b)?;
    Ok((gx, Lstm { wh, h }))
}

/// Runs one direction over all frames; returns per-frame hidden states in time order.
fn run_direction(tape: &mut Tape, gx: Var, cell: &Lstm, reverse: bool) -> Result<Vec<Var>> {
    let t_len = tape.shape(gx)[0];
    let mut h = tape.constant(Tensor::zeros(1, cell.h));
    let mut c = h;
    let mut out = vec![h; t_len];
    let order: Vec<usize> = if reverse { (0..t_len).rev().collect() } else { (0..t_len).collect() };
    for t in order {
        let g = tape.slice_rows(gx, t, 1)?;
        (h, c) = cell.step(tape, g, h, c)?;
        out[t] = h;
    }
    Ok(out)
}

pub(super) fn encode(model: &AsrModel, tape: &mut Tape, x: &Tensor) -> Result<Encoded> {
    let cfg = model.config();
    let mut cur = tape.constant(x.clone());
    for l in 0..cfg.enc_layers {
        let (gf, fwd) = input_gates(model, tape, cur, &format!("enc.{l}.fwd"))?;
        let (gb, bwd) = input_gates(model, tape, cur, &format!("enc.{l}.bwd"))?;
        let hf = run_direction(tape, gf, &fwd, false)?;
        let hb = run_direction(tape, gb, &bwd, true)?;
        let hf = tape.concat_rows(&hf)?;
        let hb = tape.concat_rows(&hb)?;
        cur = tape.concat_cols(&[hf, hb])?;
        if l + 1 < cfg.enc_layers {
            cur = tape.dropout(cur, cfg.dropout)?;
        }
    }
    let ctc_logits = model.linear(tape, cur, "ctc")?;
    Ok(Encoded { states: cur, ctc_logits })
}

pub(super) fn decode(model: &AsrModel, tape: &mut Tape, enc: &Encoded, y_in: &[usize]) -> Result<DecoderOutput> {
    let cfg = model.config();
    let params = model.params();
    let d = cfg.dec_width;
    let t_len = tape.shape(enc.states)[0];

    let table = tape.named(params, "dec.embed");
    let emb = tape.embedding(table, y_in)?;
    let emb = tape.dropout(emb, cfg.dropout)?;
    let enc_proj = model.linear(tape, enc.states, "dec.att.enc")?;
    let w_dec = tape.named(params, "dec.att.dec.w");
    let v_att = tape.named(params, "dec.att.v.w");

    let mut cells = Vec::with_capacity(cfg.dec_layers);
    for l in 0..cfg.dec_layers {
        let prefix = format!("dec.{l}.lstm");
        let wx = tape.named(params, &format!("{prefix}.wx"));
        let b = tape.named(params, &format!("{prefix}.b"));
        let wh = tape.named(params, &format!("{prefix}.wh"));
        cells.push((wx, b, Lstm { wh, h: d }));
    }
    let zero_h = tape.constant(Tensor::zeros(1, d));
    let mut state: Vec<(Var, Var)> = vec![(zero_h, zero_h); cfg.dec_layers];
    let mut ctx = tape.constant(Tensor::zeros(1, cfg.enc_width));

    let mut logits = Vec::with_capacity(y_in.len());
    let mut attention = Vec::with_capacity(y_in.len());
    for u in 0..y_in.len() {
        let e = tape.slice_rows(emb, u, 1)?;
        let mut inp = tape.concat_cols(&[e, ctx])?;
        for (l, (wx, b, cell)) in cells.iter().enumerate() {
            let gx = tape.matmul(inp, *wx)?;
            let gx = tape.add_row(gx, *b)?;
            let (h, c) = cell.step(tape, gx, state[l].0, state[l].1)?;
            state[l] = (h, c);
            inp = h;
        }
        let s = inp;
        let q = tape.matmul(s, w_dec)?;
        let energy = tape.add_row(enc_proj, q)?;
        let energy = tape.tanh(energy)?;
        let scores = tape.matmul(energy, v_att)?;
        let scores = tape.transpose(scores)?;
        let alpha = tape.softmax(scores)?;
        attention.push(tape.value(alpha).data().to_vec());
        ctx = tape.matmul(alpha, enc.states)?;
        debug_assert_eq!(tape.shape(alpha), [1, t_len]);
        let so = tape.concat_cols(&[s, ctx])?;
        let so = tape.dropout(so, cfg.dropout)?;
        logits.push(model.linear(tape, so, "dec.out")?);
    }
    let logits = tape.concat_rows(&logits)?;
    Ok(DecoderOutput { logits, attention })
}
