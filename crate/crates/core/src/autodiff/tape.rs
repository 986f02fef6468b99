//! Define-by-run computation tape.
//!
//! Every op appends a node holding its forward value; [`Tape::backward`]
//! walks the nodes in reverse and adds parameter gradients into a
//! [`ParamStore`]. Gradients accumulate: a second `backward` over the same
//! tape adds the same contribution again.

use super::tensor::{matmul_into, transpose_raw};
use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Matmul(Var, Var),
    Add(Var, Var),
    BiasAdd(Var, Var),
    MulScalar(Var, f64),
    Mul(Var, Var),
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    Lookup {
        table: Var,
        indices: Vec<usize>,
    },
    Relu(Var),
    Tanh(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Softmax(Var),
    Mean {
        x: Var,
        axis: usize,
    },
    Sum(Var),
    Transpose(Var),
    SliceCols {
        x: Var,
        start: usize,
    },
    Reshape(Var),
    CrossEntropy {
        logits: Var,
        probs: Vec<f64>,
        targets: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
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

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        debug_assert!(value.is_finite(), "non-finite value produced by {op:?}");
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn param(&mut self, params: &ParamStore, id: ParamId) -> Var {
        self.push(params.value(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2("matmul")?;
        let (k2, n) = self.value(b).dims2("matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", format!("{m}x{k} · {k2}x{n}")));
        }
        let mut out = vec![0.0; m * n];
        matmul_into(
            self.value(a).data(),
            self.value(b).data(),
            &mut out,
            m,
            k,
            n,
        );
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::Matmul(a, b), needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::shape(
                "add",
                format!("{:?} + {:?}", ta.shape(), tb.shape()),
            ));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x + y)
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), needs))
    }

    /// Adds a length-`n` vector to every row of an `m×n` matrix.
    pub fn bias_add(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (_, n) = self.value(x).dims2("bias_add")?;
        let tb = self.value(bias);
        if tb.numel() != n {
            return Err(Error::shape(
                "bias_add",
                format!("{:?} + bias {:?}", self.value(x).shape(), tb.shape()),
            ));
        }
        let b = tb.data();
        let tx = self.value(x);
        let data = tx
            .data()
            .chunks(n)
            .flat_map(|row| row.iter().zip(b).map(|(v, c)| v + c))
            .collect();
        let value = Tensor::new(tx.shape().to_vec(), data)?;
        let needs = self.needs(x) || self.needs(bias);
        Ok(self.push(value, Op::BiasAdd(x, bias), needs))
    }

    pub fn mul_scalar(&mut self, x: Var, c: f64) -> Var {
        let tx = self.value(x);
        let data = tx.data().iter().map(|v| v * c).collect();
        let value = Tensor::new(tx.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(x);
        self.push(value, Op::MulScalar(x, c), needs)
    }

    /// Elementwise product of equal-shape tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::shape(
                "mul",
                format!("{:?} * {:?}", ta.shape(), tb.shape()),
            ));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x * y)
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul(a, b), needs))
    }

    /// Concatenates rank-2 tensors along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        if inputs.is_empty() || axis > 1 {
            return Err(Error::shape(
                "concat",
                format!("{} inputs, axis {axis}", inputs.len()),
            ));
        }
        let dims: Vec<(usize, usize)> = inputs
            .iter()
            .map(|&v| self.value(v).dims2("concat"))
            .collect::<Result<_>>()?;
        let value = if axis == 0 {
            let cols = dims[0].1;
            if dims.iter().any(|d| d.1 != cols) {
                return Err(Error::shape("concat", format!("axis 0 over {dims:?}")));
            }
            let rows = dims.iter().map(|d| d.0).sum();
            let mut data = Vec::with_capacity(rows * cols);
            for &v in inputs {
                data.extend_from_slice(self.value(v).data());
            }
            Tensor::new(vec![rows, cols], data)?
        } else {
            let rows = dims[0].0;
            if dims.iter().any(|d| d.0 != rows) {
                return Err(Error::shape("concat", format!("axis 1 over {dims:?}")));
            }
            let cols = dims.iter().map(|d| d.1).sum();
            let mut data = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for &v in inputs {
                    data.extend_from_slice(self.value(v).row(r));
                }
            }
            Tensor::new(vec![rows, cols], data)?
        };
        let needs = inputs.iter().any(|&v| self.needs(v));
        Ok(self.push(
            value,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            needs,
        ))
    }

    /// Gathers rows of a `V×d` table.
    pub fn embedding_lookup(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let (vocab, d) = self.value(table).dims2("embedding_lookup")?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= vocab) {
            return Err(Error::shape(
                "embedding_lookup",
                format!("index {bad} into table of {vocab} rows"),
            ));
        }
        let t = self.value(table);
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            data.extend_from_slice(t.row(i));
        }
        let value = Tensor::new(vec![indices.len(), d], data)?;
        let needs = self.needs(table);
        Ok(self.push(
            value,
            Op::Lookup {
                table,
                indices: indices.to_vec(),
            },
            needs,
        ))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let data = tx.data().iter().map(|v| v.max(0.0)).collect();
        let value = Tensor::new(tx.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(x);
        self.push(value, Op::Relu(x), needs)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let data = tx.data().iter().map(|v| v.tanh()).collect();
        let value = Tensor::new(tx.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(x);
        self.push(value, Op::Tanh(x), needs)
    }

    /// Normalizes each row to zero mean and unit variance, then applies the
    /// per-column affine `gain * xhat + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (m, n) = self.value(x).dims2("layer_norm")?;
        if self.value(gain).numel() != n || self.value(bias).numel() != n {
            return Err(Error::shape(
                "layer_norm",
                format!(
                    "input {m}x{n}, gain {:?}, bias {:?}",
                    self.value(gain).shape(),
                    self.value(bias).shape()
                ),
            ));
        }
        let (g, b) = (self.value(gain).data(), self.value(bias).data());
        let mut xhat = Vec::with_capacity(m * n);
        let mut inv_std = Vec::with_capacity(m);
        let mut out = Vec::with_capacity(m * n);
        for row in self.value(x).data().chunks(n) {
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let istd = 1.0 / (var + eps).sqrt();
            inv_std.push(istd);
            for (c, v) in row.iter().enumerate() {
                let h = (v - mean) * istd;
                xhat.push(h);
                out.push(g[c] * h + b[c]);
            }
        }
        let needs = self.needs(x) || self.needs(gain) || self.needs(bias);
        Ok(self.push(
            Tensor::new(vec![m, n], out)?,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            needs,
        ))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let n = tx.cols();
        let mut data = Vec::with_capacity(tx.numel());
        for row in tx.data().chunks(n) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let start = data.len();
            let mut z = 0.0;
            for v in row {
                let e = (v - max).exp();
                z += e;
                data.push(e);
            }
            data[start..].iter_mut().for_each(|e| *e /= z);
        }
        let value = Tensor::new(tx.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(x);
        self.push(value, Op::Softmax(x), needs)
    }

    /// Mean of a rank-2 tensor over `axis`, keeping the reduced axis as size 1.
    pub fn mean(&mut self, x: Var, axis: usize) -> Result<Var> {
        let (m, n) = self.value(x).dims2("mean")?;
        let d = self.value(x).data();
        let value = match axis {
            0 => {
                let mut out = vec![0.0; n];
                for row in d.chunks(n) {
                    out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
                }
                out.iter_mut().for_each(|o| *o /= m as f64);
                Tensor::new(vec![1, n], out)?
            }
            1 => Tensor::new(
                vec![m, 1],
                d.chunks(n)
                    .map(|r| r.iter().sum::<f64>() / n as f64)
                    .collect(),
            )?,
            _ => return Err(Error::shape("mean", format!("axis {axis} of rank 2"))),
        };
        let needs = self.needs(x);
        Ok(self.push(value, Op::Mean { x, axis }, needs))
    }

    /// Sum of all entries as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let needs = self.needs(x);
        self.push(Tensor::scalar(s), Op::Sum(x), needs)
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.value(x).dims2("transpose")?;
        let data = transpose_raw(self.value(x).data(), m, n);
        let needs = self.needs(x);
        Ok(self.push(Tensor::new(vec![n, m], data)?, Op::Transpose(x), needs))
    }

    /// Columns `start..start + len` of a rank-2 tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (m, n) = self.value(x).dims2("slice_cols")?;
        if start + len > n {
            return Err(Error::shape(
                "slice_cols",
                format!("columns {start}..{} of {m}x{n}", start + len),
            ));
        }
        let data = self
            .value(x)
            .data()
            .chunks(n)
            .flat_map(|row| row[start..start + len].iter().copied())
            .collect();
        let needs = self.needs(x);
        Ok(self.push(
            Tensor::new(vec![m, len], data)?,
            Op::SliceCols { x, start },
            needs,
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let tx = self.value(x);
        if shape.iter().product::<usize>() != tx.numel() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} -> {shape:?}", tx.shape()),
            ));
        }
        let value = Tensor::new(shape.to_vec(), tx.data().to_vec())?;
        let needs = self.needs(x);
        Ok(self.push(value, Op::Reshape(x), needs))
    }

    /// Mean cross-entropy of row-wise softmax(logits) against targets smoothed
    /// as `(1 - eps) * onehot(label) + eps / C`.
    pub fn smoothed_cross_entropy(
        &mut self,
        logits: Var,
        labels: &[usize],
        eps: f64,
    ) -> Result<Var> {
        let (m, c) = self.value(logits).dims2("cross_entropy")?;
        if labels.len() != m {
            return Err(Error::shape(
                "cross_entropy",
                format!("{m} rows, {} labels", labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::InvalidInput(format!("label {bad} outside 0..{c}")));
        }
        let mut probs = Vec::with_capacity(m * c);
        let mut targets = vec![eps / c as f64; m * c];
        let mut total = 0.0;
        for (r, row) in self.value(logits).data().chunks(c).enumerate() {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            targets[r * c + labels[r]] += 1.0 - eps;
            for (j, v) in row.iter().enumerate() {
                let logp = v - lse;
                probs.push(logp.exp());
                total -= targets[r * c + j] * logp;
            }
        }
        let needs = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(total / m as f64),
            Op::CrossEntropy {
                logits,
                probs,
                targets,
            },
            needs,
        ))
    }

    /// Reverse pass from a scalar `loss`, adding parameter gradients into
    /// `params`.
    pub fn backward(&self, loss: Var, params: &mut ParamStore) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got {:?}", self.value(loss).shape()),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let out = &node.value;
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    let pg = params.grad_mut(*id);
                    if pg.shape() != out.shape() {
                        return Err(Error::shape(
                            "backward",
                            format!(
                                "parameter gradient {:?} vs value {:?}",
                                pg.shape(),
                                out.shape()
                            ),
                        ));
                    }
                    pg.data_mut().iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                }
                Op::Matmul(a, b) => {
                    let (m, k) = self.value(*a).dims2("matmul")?;
                    let n = self.value(*b).cols();
                    if self.needs(*a) {
                        let bt = transpose_raw(self.value(*b).data(), k, n);
                        let mut ga = vec![0.0; m * k];
                        matmul_into(&g, &bt, &mut ga, m, n, k);
                        self.accumulate(&mut grads, *a, &ga);
                    }
                    if self.needs(*b) {
                        let at = transpose_raw(self.value(*a).data(), m, k);
                        let mut gb = vec![0.0; k * n];
                        matmul_into(&at, &g, &mut gb, k, m, n);
                        self.accumulate(&mut grads, *b, &gb);
                    }
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut grads, *a, &g);
                    self.accumulate(&mut grads, *b, &g);
                }
                Op::BiasAdd(x, bias) => {
                    self.accumulate(&mut grads, *x, &g);
                    if self.needs(*bias) {
                        let n = out.cols();
                        let mut gb = vec![0.0; n];
                        for row in g.chunks(n) {
                            gb.iter_mut().zip(row).for_each(|(o, v)| *o += v);
                        }
                        self.accumulate(&mut grads, *bias, &gb);
                    }
                }
                Op::MulScalar(x, c) => {
                    let gx: Vec<f64> = g.iter().map(|v| v * c).collect();
                    self.accumulate(&mut grads, *x, &gx);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                    if self.needs(*a) {
                        let ga: Vec<f64> = g.iter().zip(vb).map(|(x, y)| x * y).collect();
                        self.accumulate(&mut grads, *a, &ga);
                    }
                    if self.needs(*b) {
                        let gb: Vec<f64> = g.iter().zip(va).map(|(x, y)| x * y).collect();
                        self.accumulate(&mut grads, *b, &gb);
                    }
                }
                Op::Concat { inputs, axis } => {
                    let total_cols = out.cols();
                    if *axis == 0 {
                        let mut offset = 0;
                        for &v in inputs {
                            let len = self.value(v).numel();
                            self.accumulate(&mut grads, v, &g[offset..offset + len]);
                            offset += len;
                        }
                    } else {
                        let rows = out.rows();
                        let mut col = 0;
                        for &v in inputs {
                            let w = self.value(v).cols();
                            if self.needs(v) {
                                let mut gv = Vec::with_capacity(rows * w);
                                for r in 0..rows {
                                    let base = r * total_cols + col;
                                    gv.extend_from_slice(&g[base..base + w]);
                                }
                                self.accumulate(&mut grads, v, &gv);
                            }
                            col += w;
                        }
                    }
                }
                Op::Lookup { table, indices } => {
                    let t = self.value(*table);
                    let d = t.cols();
                    let mut gt = vec![0.0; t.numel()];
                    for (r, &i) in indices.iter().enumerate() {
                        gt[i * d..(i + 1) * d]
                            .iter_mut()
                            .zip(&g[r * d..(r + 1) * d])
                            .for_each(|(o, v)| *o += v);
                    }
                    self.accumulate(&mut grads, *table, &gt);
                }
                Op::Relu(x) => {
                    let gx: Vec<f64> = g
                        .iter()
                        .zip(self.value(*x).data())
                        .map(|(gv, &xv)| if xv > 0.0 { *gv } else { 0.0 })
                        .collect();
                    self.accumulate(&mut grads, *x, &gx);
                }
                Op::Tanh(x) => {
                    let gx: Vec<f64> = g
                        .iter()
                        .zip(out.data())
                        .map(|(gv, y)| gv * (1.0 - y * y))
                        .collect();
                    self.accumulate(&mut grads, *x, &gx);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let n = out.cols();
                    let gvals = self.value(*gain).data();
                    if self.needs(*gain) {
                        let mut gg = vec![0.0; n];
                        for (grow, hrow) in g.chunks(n).zip(xhat.chunks(n)) {
                            for c in 0..n {
                                gg[c] += grow[c] * hrow[c];
                            }
                        }
                        self.accumulate(&mut grads, *gain, &gg);
                    }
                    if self.needs(*bias) {
                        let mut gb = vec![0.0; n];
                        for grow in g.chunks(n) {
                            gb.iter_mut().zip(grow).for_each(|(o, v)| *o += v);
                        }
                        self.accumulate(&mut grads, *bias, &gb);
                    }
                    if self.needs(*x) {
                        let mut gx = Vec::with_capacity(g.len());
                        for ((grow, hrow), istd) in g.chunks(n).zip(xhat.chunks(n)).zip(inv_std) {
                            let dh: Vec<f64> = (0..n).map(|c| grow[c] * gvals[c]).collect();
                            let mean_dh = dh.iter().sum::<f64>() / n as f64;
                            let mean_dh_h =
                                dh.iter().zip(hrow).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                            for c in 0..n {
                                gx.push(istd * (dh[c] - mean_dh - hrow[c] * mean_dh_h));
                            }
                        }
                        self.accumulate(&mut grads, *x, &gx);
                    }
                }
                Op::Softmax(x) => {
                    let n = out.cols();
                    let mut gx = Vec::with_capacity(g.len());
                    for (grow, yrow) in g.chunks(n).zip(out.data().chunks(n)) {
                        let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                        gx.extend(grow.iter().zip(yrow).map(|(gv, y)| y * (gv - dot)));
                    }
                    self.accumulate(&mut grads, *x, &gx);
                }
                Op::Mean { x, axis } => {
                    let (m, n) = self.value(*x).dims2("mean")?;
                    let mut gx = vec![0.0; m * n];
                    for i in 0..m {
                        for j in 0..n {
                            gx[i * n + j] = if *axis == 0 {
                                g[j] / m as f64
                            } else {
                                g[i] / n as f64
                            };
                        }
                    }
                    self.accumulate(&mut grads, *x, &gx);
                }
                Op::Sum(x) => {
                    let gx = vec![g[0]; self.value(*x).numel()];
                    self.accumulate(&mut grads, *x, &gx);
                }
                Op::Transpose(x) => {
                    let (m, n) = self.value(*x).dims2("transpose")?;
                    let gx = transpose_raw(&g, n, m);
                    self.accumulate(&mut grads, *x, &gx);
                }
                Op::SliceCols { x, start } => {
                    let (m, n) = self.value(*x).dims2("slice_cols")?;
                    let w = out.cols();
                    let mut gx = vec![0.0; m * n];
                    for r in 0..m {
                        gx[r * n + start..r * n + start + w]
                            .copy_from_slice(&g[r * w..(r + 1) * w]);
                    }
                    self.accumulate(&mut grads, *x, &gx);
                }
                Op::Reshape(x) => {
                    self.accumulate(&mut grads, *x, &g);
                }
                Op::CrossEntropy {
                    logits,
                    probs,
                    targets,
                } => {
                    let m = self.value(*logits).rows() as f64;
                    let gx: Vec<f64> = probs
                        .iter()
                        .zip(targets)
                        .map(|(p, t)| g[0] * (p - t) / m)
                        .collect();
                    self.accumulate(&mut grads, *logits, &gx);
                }
            }
        }
        Ok(())
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
        if !self.needs(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            slot @ None => *slot = Some(g.to_vec()),
        }
    }
}
