//! Tape-based reverse-mode automatic differentiation over 2-D tensors.
//!
//! Each primitive appends a node holding its forward value and whatever it
//! needs for the adjoint. [`Tape::backward`] walks the nodes once in reverse
//! order, accumulating adjoints, so shared subexpressions receive the sum of
//! all their downstream contributions.
//!
//! Parameters enter the tape through [`Tape::param`], which caches one leaf
//! per parameter so repeated uses accumulate into the same gradient slot.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{Gradients, Parameters};
use crate::tensor::{gemm, logsumexp, Tensor};
use crate::error::{Error, Result};

const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Leaf,
    MatMul { a: Var, b: Var, a_t: bool, b_t: bool },
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Softmax(Var),
    LogSoftmax(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Slice { a: Var, r0: usize, c0: usize },
    LayerNorm { a: Var, gain: Var, bias: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Embedding { table: Var, ids: Vec<usize> },
    FrameStack { a: Var, kernel: usize, stride: usize },
    Dropout { a: Var, mask: Vec<f64> },
    Pick { a: Var, cols: Vec<usize> },
    Sum(Var),
    Mean(Var),
    External { a: Var, grad: Tensor },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

pub struct Tape {
    nodes: Vec<Node>,
    param_leaves: Vec<Option<Var>>,
    param_of_node: Vec<(usize, usize)>,
    dropout_rng: Option<ChaCha8Rng>,
    check_finite: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    /// A tape in inference mode: dropout is the identity.
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            param_leaves: Vec::new(),
            param_of_node: Vec::new(),
            dropout_rng: None,
            check_finite: cfg!(debug_assertions),
        }
    }

    /// A tape in training mode; dropout masks are drawn from `seed`.
    pub fn training(seed: u64) -> Self {
        Tape { dropout_rng: Some(ChaCha8Rng::seed_from_u64(seed)), ..Self::new() }
    }

    pub fn set_check_finite(&mut self, on: bool) {
        self.check_finite = on;
    }

    pub fn is_training(&self) -> bool {
        self.dropout_rng.is_some()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool, name: &'static str) -> Result<Var> {
        if self.check_finite && !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        self.nodes.push(Node { value, op, needs_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A differentiable leaf that is not a model parameter.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, needs_grad: true });
        Var(self.nodes.len() - 1)
    }

    /// A constant: no gradient flows into it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, needs_grad: false });
        Var(self.nodes.len() - 1)
    }

    /// Leaf for parameter `idx` of `params`, created once per tape.
    pub fn param(&mut self, params: &Parameters, idx: usize) -> Var {
        if self.param_leaves.len() < params.len() {
            self.param_leaves.resize(params.len(), None);
        }
        if let Some(v) = self.param_leaves[idx] {
            return v;
        }
        let v = self.leaf(params.tensor(idx).clone());
        self.param_leaves[idx] = Some(v);
        self.param_of_node.push((v.0, idx));
        v
    }

    /// Parameter leaf looked up by name; panics on an unknown name, which is a
    /// model-construction bug rather than a data error.
    pub fn named(&mut self, params: &Parameters, name: &str) -> Var {
        let idx = params
            .index_of(name)
            .unwrap_or_else(|| panic!("unknown parameter `{name}`"));
        self.param(params, idx)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, false, b, false)
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, false, b, true)
    }

    fn matmul_t(&mut self, a: Var, a_t: bool, b: Var, b_t: bool) -> Result<Var> {
        let [ar, ac] = self.shape(a);
        let [br, bc] = self.shape(b);
        let (m, k) = if a_t { (ac, ar) } else { (ar, ac) };
        let (k2, n) = if b_t { (bc, br) } else { (br, bc) };
        if k != k2 {
            return Err(Error::shape("matmul", format!("{ar}x{ac} · {br}x{bc} (transposes {a_t},{b_t})")));
        }
        let mut out = Tensor::zeros(m, n);
        gemm(m, k, n, self.value(a).data(), a_t, self.value(b).data(), b_t, out.data_mut(), false);
        let ng = self.ng(a) || self.ng(b);
        self.push(out, Op::MatMul { a, b, a_t, b_t }, ng, "matmul")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let mut out = Tensor::zeros(x.cols(), x.rows());
        for r in 0..x.rows() {
            for c in 0..x.cols() {
                out.set(c, r, x.get(r, c));
            }
        }
        let ng = self.ng(a);
        self.push(out, Op::Transpose(a), ng, "transpose")
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let x = self.value(a);
        let y = self.value(b);
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        Tensor::from_vec(x.rows(), x.cols(), data).expect("same shape")
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let x = self.value(a);
        let data = x.data().iter().map(|&p| f(p)).collect();
        Tensor::from_vec(x.rows(), x.cols(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.zip_with(a, b, |p, q| p + q);
        let ng = self.ng(a) || self.ng(b);
        self.push(out, Op::Add(a, b), ng, "add")
    }

    /// Adds the `1 × n` row `row` to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let [r, c] = self.shape(a);
        if self.shape(row) != [1, c] {
            return Err(Error::shape("add_row", format!("{r}x{c} + {:?}", self.shape(row))));
        }
        let mut out = self.value(a).clone();
        let bias = self.value(row).data().to_vec();
        for i in 0..r {
            out.row_mut(i).iter_mut().zip(&bias).for_each(|(o, b)| *o += b);
        }
        let ng = self.ng(a) || self.ng(row);
        self.push(out, Op::AddRow(a, row), ng, "add_row")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.zip_with(a, b, |p, q| p - q);
        let ng = self.ng(a) || self.ng(b);
        self.push(out, Op::Sub(a, b), ng, "sub")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.zip_with(a, b, |p, q| p * q);
        let ng = self.ng(a) || self.ng(b);
        self.push(out, Op::Mul(a, b), ng, "mul")
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.map(a, |p| p * s);
        let ng = self.ng(a);
        self.push(out, Op::Scale(a, s), ng, "scale")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.map(a, f64::tanh);
        let ng = self.ng(a);
        self.push(out, Op::Tanh(a), ng, "tanh")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.map(a, sigmoid);
        let ng = self.ng(a);
        self.push(out, Op::Sigmoid(a), ng, "sigmoid")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.map(a, |p| p.max(0.0));
        let ng = self.ng(a);
        self.push(out, Op::Relu(a), ng, "relu")
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let mut out = self.value(a).clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                s += *v;
            }
            row.iter_mut().for_each(|v| *v /= s);
        }
        let ng = self.ng(a);
        self.push(out, Op::Softmax(a), ng, "softmax")
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let mut out = self.value(a).clone();
        for r in 0..out.rows() {
            let lse = logsumexp(out.row(r));
            out.row_mut(r).iter_mut().for_each(|v| *v -= lse);
        }
        let ng = self.ng(a);
        self.push(out, Op::LogSoftmax(a), ng, "log_softmax")
    }

    /// Horizontal concatenation; all parts share the row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map(|&p| self.shape(p)[0]).unwrap_or(0);
        let mut cols = 0;
        for &p in parts {
            let [r, c] = self.shape(p);
            if r != rows {
                return Err(Error::shape("concat_cols", format!("row counts {rows} vs {r}")));
            }
            cols += c;
        }
        let mut out = Tensor::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let x = self.value(p);
            for r in 0..rows {
                out.row_mut(r)[off..off + x.cols()].copy_from_slice(x.row(r));
            }
            off += x.cols();
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(out, Op::ConcatCols(parts.to_vec()), ng, "concat_cols")
    }

    /// Vertical concatenation; all parts share the column count.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts.first().map(|&p| self.shape(p)[1]).unwrap_or(0);
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let [r, c] = self.shape(p);
            if c != cols {
                return Err(Error::shape("concat_rows", format!("column counts {cols} vs {c}")));
            }
            data.extend_from_slice(self.value(p).data());
            rows += r;
        }
        let out = Tensor::from_vec(rows, cols, data)?;
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(out, Op::ConcatRows(parts.to_vec()), ng, "concat_rows")
    }

    /// Sub-block `[r0, r0+nr) × [c0, c0+nc)`.
    pub fn slice(&mut self, a: Var, r0: usize, nr: usize, c0: usize, nc: usize) -> Result<Var> {
        let [r, c] = self.shape(a);
        if r0 + nr > r || c0 + nc > c {
            return Err(Error::shape("slice", format!("[{r0}+{nr}, {c0}+{nc}] out of {r}x{c}")));
        }
        let x = self.value(a);
        let mut out = Tensor::zeros(nr, nc);
        for i in 0..nr {
            out.row_mut(i).copy_from_slice(&x.row(r0 + i)[c0..c0 + nc]);
        }
        let ng = self.ng(a);
        self.push(out, Op::Slice { a, r0, c0 }, ng, "slice")
    }

    pub fn slice_rows(&mut self, a: Var, r0: usize, nr: usize) -> Result<Var> {
        let c = self.shape(a)[1];
        self.slice(a, r0, nr, 0, c)
    }

    pub fn slice_cols(&mut self, a: Var, c0: usize, nc: usize) -> Result<Var> {
        let r = self.shape(a)[0];
        self.slice(a, 0, r, c0, nc)
    }

    /// Row-wise layer normalization with `1 × n` gain and bias.
    pub fn layer_norm(&mut self, a: Var, gain: Var, bias: Var) -> Result<Var> {
        let [rows, cols] = self.shape(a);
        if self.shape(gain) != [1, cols] || self.shape(bias) != [1, cols] {
            return Err(Error::shape("layer_norm", format!("input {rows}x{cols}, gain {:?}", self.shape(gain))));
        }
        let x = self.value(a);
        let g = self.value(gain).data();
        let b = self.value(bias).data();
        let mut xhat = vec![0.0; rows * cols];
        let mut inv_std = vec![0.0; rows];
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std[r] = is;
            let o = out.row_mut(r);
            for c in 0..cols {
                let h = (row[c] - mean) * is;
                xhat[r * cols + c] = h;
                o[c] = h * g[c] + b[c];
            }
        }
        let ng = self.ng(a) || self.ng(gain) || self.ng(bias);
        self.push(out, Op::LayerNorm { a, gain, bias, xhat, inv_std }, ng, "layer_norm")
    }

    /// Gathers rows of `table` by id.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let [v, d] = self.shape(table);
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::TokenRange { id: bad, vocab: v });
        }
        let t = self.value(table);
        let mut out = Tensor::zeros(ids.len(), d);
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).copy_from_slice(t.row(id));
        }
        let ng = self.ng(table);
        self.push(out, Op::Embedding { table, ids: ids.to_vec() }, ng, "embedding")
    }

    /// Strided window stacking along rows (the im2col step of a 1-D convolution).
    ///
    /// Output row `t` is the concatenation of input rows
    /// `stride·t − pad .. stride·t − pad + kernel`, with `pad = (kernel−1)/2` and
    /// zeros outside the input; there are `ceil(T / stride)` output rows.
    pub fn frame_stack(&mut self, a: Var, kernel: usize, stride: usize) -> Result<Var> {
        let [t_in, d] = self.shape(a);
        if kernel == 0 || stride == 0 {
            return Err(Error::shape("frame_stack", "kernel and stride must be positive"));
        }
        let t_out = t_in.div_ceil(stride);
        let pad = (kernel - 1) / 2;
        let x = self.value(a);
        let mut out = Tensor::zeros(t_out, kernel * d);
        for t in 0..t_out {
            let o = out.row_mut(t);
            for k in 0..kernel {
                let src = (stride * t + k) as isize - pad as isize;
                if src >= 0 && (src as usize) < t_in {
                    o[k * d..(k + 1) * d].copy_from_slice(x.row(src as usize));
                }
            }
        }
        let ng = self.ng(a);
        self.push(out, Op::FrameStack { a, kernel, stride }, ng, "frame_stack")
    }

    /// Inverted dropout; the identity on an inference tape or when `p == 0`.
    pub fn dropout(&mut self, a: Var, p: f64) -> Result<Var> {
        if p <= 0.0 || self.dropout_rng.is_none() {
            return Ok(a);
        }
        let n = self.value(a).len();
        let keep = 1.0 - p;
        let rng = self.dropout_rng.as_mut().expect("training tape");
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let x = self.value(a);
        let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let out = Tensor::from_vec(x.rows(), x.cols(), data)?;
        let ng = self.ng(a);
        self.push(out, Op::Dropout { a, mask }, ng, "dropout")
    }

    /// Picks one column per row: output is `rows × 1` with entry `a[r, cols[r]]`.
    pub fn pick(&mut self, a: Var, cols: &[usize]) -> Result<Var> {
        let [r, c] = self.shape(a);
        if cols.len() != r {
            return Err(Error::shape("pick", format!("{} indices for {r} rows", cols.len())));
        }
        if let Some(&bad) = cols.iter().find(|&&i| i >= c) {
            return Err(Error::TokenRange { id: bad, vocab: c });
        }
        let x = self.value(a);
        let data = cols.iter().enumerate().map(|(i, &j)| x.get(i, j)).collect();
        let out = Tensor::from_vec(r, 1, data)?;
        let ng = self.ng(a);
        self.push(out, Op::Pick { a, cols: cols.to_vec() }, ng, "pick")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        let ng = self.ng(a);
        self.push(Tensor::scalar(s), Op::Sum(a), ng, "sum")
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(Error::shape("mean", "empty tensor"));
        }
        let s = x.data().iter().sum::<f64>() / x.len() as f64;
        let ng = self.ng(a);
        self.push(Tensor::scalar(s), Op::Mean(a), ng, "mean")
    }

    /// Scalar node whose value and gradient w.r.t. `a` were computed outside
    /// the tape (e.g. by the CTC forward–backward recursion).
    pub fn external(&mut self, a: Var, value: f64, grad: Tensor) -> Result<Var> {
        if grad.shape() != self.shape(a) {
            return Err(Error::shape("external", format!("grad {:?} for input {:?}", grad.shape(), self.shape(a))));
        }
        let ng = self.ng(a);
        self.push(Tensor::scalar(value), Op::External { a, grad }, ng, "external")
    }

    /// `Σ wᵢ·xᵢ` over scalar nodes.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Result<Var> {
        let mut acc: Option<Var> = None;
        for &(v, w) in terms {
            let s = self.scale(v, w)?;
            acc = Some(match acc {
                None => s,
                Some(a) => self.add(a, s)?,
            });
        }
        acc.ok_or_else(|| Error::shape("weighted_sum", "no terms"))
    }

    /// Back-propagates from the scalar `output`, returning adjoints of every
    /// node (`None` for nodes that do not reach the output or carry no gradient).
    pub fn backward(&self, output: Var) -> Result<Vec<Option<Tensor>>> {
        if self.shape(output) != [1, 1] {
            return Err(Error::shape("backward", format!("output must be scalar, got {:?}", self.shape(output))));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::scalar(1.0));
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(grads)
    }

    /// Runs [`Tape::backward`] and gathers the parameter adjoints.
    pub fn param_grads(&self, output: Var, params: &Parameters) -> Result<Gradients> {
        let grads = self.backward(output)?;
        let mut out = Gradients::zeros_like(params);
        for &(node, idx) in &self.param_of_node {
            if let Some(g) = &grads[node] {
                out.tensor_mut(idx).data_mut().copy_from_slice(g.data());
            }
        }
        Ok(out)
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b, a_t, b_t } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let [m, n] = y.shape();
                let k = if *a_t { av.rows() } else { av.cols() };
                if self.ng(*a) {
                    // dA = dY · Bᵀ (or its transpose when A was used transposed)
                    let acc = slot(grads, *a, av.shape());
                    if *a_t {
                        gemm(k, n, m, bv.data(), *b_t, g.data(), true, acc.data_mut(), true);
                    } else {
                        gemm(m, n, k, g.data(), false, bv.data(), !*b_t, acc.data_mut(), true);
                    }
                }
                if self.ng(*b) {
                    let acc = slot(grads, *b, bv.shape());
                    if *b_t {
                        gemm(n, m, k, g.data(), true, av.data(), *a_t, acc.data_mut(), true);
                    } else {
                        gemm(k, m, n, av.data(), !*a_t, g.data(), false, acc.data_mut(), true);
                    }
                }
            }
            Op::Transpose(a) => {
                if self.ng(*a) {
                    let acc = slot(grads, *a, [y.cols(), y.rows()]);
                    for r in 0..y.rows() {
                        for c in 0..y.cols() {
                            acc.data_mut()[c * y.rows() + r] += g.get(r, c);
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.data(), |_, d| d);
                self.accumulate(grads, *b, g.data(), |_, d| d);
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, *a, g.data(), |_, d| d);
                if self.ng(*row) {
                    let acc = slot(grads, *row, [1, y.cols()]);
                    for r in 0..y.rows() {
                        acc.data_mut().iter_mut().zip(g.row(r)).for_each(|(o, d)| *o += d);
                    }
                }
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.data(), |_, d| d);
                self.accumulate(grads, *b, g.data(), |_, d| -d);
            }
            Op::Mul(a, b) => {
                let bv = self.value(*b).data();
                self.accumulate(grads, *a, g.data(), |j, d| d * bv[j]);
                let av = self.value(*a).data();
                self.accumulate(grads, *b, g.data(), |j, d| d * av[j]);
            }
            Op::Scale(a, s) => self.accumulate(grads, *a, g.data(), |_, d| d * s),
            Op::Tanh(a) => {
                let yv = y.data();
                self.accumulate(grads, *a, g.data(), |j, d| d * (1.0 - yv[j] * yv[j]));
            }
            Op::Sigmoid(a) => {
                let yv = y.data();
                self.accumulate(grads, *a, g.data(), |j, d| d * yv[j] * (1.0 - yv[j]));
            }
            Op::Relu(a) => {
                let xv = self.value(*a).data();
                self.accumulate(grads, *a, g.data(), |j, d| if xv[j] > 0.0 { d } else { 0.0 });
            }
            Op::Softmax(a) => {
                if self.ng(*a) {
                    let cols = y.cols();
                    let acc = slot(grads, *a, y.shape());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        let ar = &mut acc.data_mut()[r * cols..(r + 1) * cols];
                        for c in 0..cols {
                            ar[c] += yr[c] * (gr[c] - dot);
                        }
                    }
                }
            }
            Op::LogSoftmax(a) => {
                if self.ng(*a) {
                    let cols = y.cols();
                    let acc = slot(grads, *a, y.shape());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let s: f64 = gr.iter().sum();
                        let ar = &mut acc.data_mut()[r * cols..(r + 1) * cols];
                        for c in 0..cols {
                            ar[c] += gr[c] - yr[c].exp() * s;
                        }
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let [pr, pc] = self.shape(*p);
                    if self.ng(*p) {
                        let acc = slot(grads, *p, [pr, pc]);
                        for r in 0..pr {
                            let src = &g.row(r)[off..off + pc];
                            acc.data_mut()[r * pc..(r + 1) * pc].iter_mut().zip(src).for_each(|(o, d)| *o += d);
                        }
                    }
                    off += pc;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let n = self.value(*p).len();
                    let src = &g.data()[off..off + n];
                    self.accumulate(grads, *p, src, |_, d| d);
                    off += n;
                }
            }
            Op::Slice { a, r0, c0 } => {
                if self.ng(*a) {
                    let shape = self.shape(*a);
                    let acc = slot(grads, *a, shape);
                    for r in 0..y.rows() {
                        let start = (r0 + r) * shape[1] + c0;
                        acc.data_mut()[start..start + y.cols()]
                            .iter_mut()
                            .zip(g.row(r))
                            .for_each(|(o, d)| *o += d);
                    }
                }
            }
            Op::LayerNorm { a, gain, bias, xhat, inv_std } => {
                let [rows, cols] = y.shape();
                let gv = self.value(*gain).data();
                if self.ng(*a) {
                    let acc = slot(grads, *a, [rows, cols]);
                    for r in 0..rows {
                        let gr = g.row(r);
                        let xh = &xhat[r * cols..(r + 1) * cols];
                        let dxh: Vec<f64> = gr.iter().zip(gv).map(|(d, w)| d * w).collect();
                        let m1 = dxh.iter().sum::<f64>() / cols as f64;
                        let m2 = dxh.iter().zip(xh).map(|(p, q)| p * q).sum::<f64>() / cols as f64;
                        let ar = &mut acc.data_mut()[r * cols..(r + 1) * cols];
                        for c in 0..cols {
                            ar[c] += inv_std[r] * (dxh[c] - m1 - xh[c] * m2);
                        }
                    }
                }
                if self.ng(*gain) {
                    let acc = slot(grads, *gain, [1, cols]);
                    for r in 0..rows {
                        for c in 0..cols {
                            acc.data_mut()[c] += g.get(r, c) * xhat[r * cols + c];
                        }
                    }
                }
                if self.ng(*bias) {
                    let acc = slot(grads, *bias, [1, cols]);
                    for r in 0..rows {
                        acc.data_mut().iter_mut().zip(g.row(r)).for_each(|(o, d)| *o += d);
                    }
                }
            }
            Op::Embedding { table, ids } => {
                if self.ng(*table) {
                    let shape = self.shape(*table);
                    let d = shape[1];
                    let acc = slot(grads, *table, shape);
                    for (r, &id) in ids.iter().enumerate() {
                        acc.data_mut()[id * d..(id + 1) * d]
                            .iter_mut()
                            .zip(g.row(r))
                            .for_each(|(o, v)| *o += v);
                    }
                }
            }
            Op::FrameStack { a, kernel, stride } => {
                if self.ng(*a) {
                    let shape = self.shape(*a);
                    let (t_in, d) = (shape[0], shape[1]);
                    let pad = (kernel - 1) / 2;
                    let acc = slot(grads, *a, shape);
                    for t in 0..y.rows() {
                        let gr = g.row(t);
                        for k in 0..*kernel {
                            let src = (stride * t + k) as isize - pad as isize;
                            if src >= 0 && (src as usize) < t_in {
                                let s = src as usize;
                                acc.data_mut()[s * d..(s + 1) * d]
                                    .iter_mut()
                                    .zip(&gr[k * d..(k + 1) * d])
                                    .for_each(|(o, v)| *o += v);
                            }
                        }
                    }
                }
            }
            Op::Dropout { a, mask } => self.accumulate(grads, *a, g.data(), |j, d| d * mask[j]),
            Op::Pick { a, cols } => {
                if self.ng(*a) {
                    let shape = self.shape(*a);
                    let acc = slot(grads, *a, shape);
                    for (r, &c) in cols.iter().enumerate() {
                        acc.data_mut()[r * shape[1] + c] += g.data()[r];
                    }
                }
            }
            Op::Sum(a) => {
                let d = g.item();
                let n = self.value(*a).len();
                self.accumulate(grads, *a, &vec![d; n], |_, v| v);
            }
            Op::Mean(a) => {
                let n = self.value(*a).len();
                let d = g.item() / n as f64;
                self.accumulate(grads, *a, &vec![d; n], |_, v| v);
            }
            Op::External { a, grad } => {
                let d = g.item();
                self.accumulate(grads, *a, grad.data(), |_, v| v * d);
            }
        }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], a: Var, upstream: &[f64], f: impl Fn(usize, f64) -> f64) {
        if !self.ng(a) {
            return;
        }
        let acc = slot(grads, a, self.shape(a));
        for (j, (o, &d)) in acc.data_mut().iter_mut().zip(upstream).enumerate() {
            *o += f(j, d);
        }
    }
}

fn slot(grads: &mut [Option<Tensor>], v: Var, shape: [usize; 2]) -> &mut Tensor {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(shape[0], shape[1]))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
