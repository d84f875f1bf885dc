//! Tape-based reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records every operation of a forward pass as a node holding its
//! output value and whatever the backward rule needs. [`Tape::backward`] walks
//! the nodes in reverse insertion order (which is a topological order, since
//! inputs are always recorded before the outputs that use them) and accumulates
//! gradients into every node that requires one.
//!
//! Only the operators the two attention classifiers need are provided.

use matrixmultiply::dgemm;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("tensor of shape {shape:?} cannot hold {len} values")]
    BadLength { shape: Vec<usize>, len: usize },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T, E = AutodiffError> = std::result::Result<T, E>;

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(AutodiffError::BadLength {
                shape,
                len: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn last_dim(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        self.data[0]
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    None,
    Relu,
    Sigmoid,
}

#[derive(Debug)]
enum Op {
    Leaf,
    /// `a` is `[..., m, k]`; `b` is either `[k, n]` (broadcast over the batch)
    /// or `[..., k, n]` with the same batch dimensions.
    MatMul {
        a: Var,
        b: Var,
        batch: usize,
        m: usize,
        k: usize,
        n: usize,
        broadcast_b: bool,
    },
    Add(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Reshape(Var),
    SwapAxes {
        x: Var,
        axis_a: usize,
        axis_b: usize,
    },
    MeanAxis {
        x: Var,
        axis: usize,
    },
    Sum(Var),
    SumSquares(Var),
    MulMask {
        x: Var,
        mask: Vec<f64>,
    },
    GatherRows {
        table: Var,
        indices: Vec<usize>,
    },
    ConcatLast {
        inputs: Vec<Var>,
        widths: Vec<usize>,
    },
    Bce {
        p: Var,
        targets: Vec<f64>,
        epsilon: f64,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of a forward computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zeros when `v` did not
    /// contribute to the loss.
    pub fn get(&self, v: Var) -> Vec<f64> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => vec![0.0; self.shapes[v.0].iter().product()],
        }
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        Tensor {
            shape: self.shapes[v.0].clone(),
            data: self.get(v),
        }
    }
}

/// `c (m×n) = a (m×k) · b (k×n)` with optional transposed storage of either
/// operand, accumulating into `c` when `accumulate` is set.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_transposed: bool,
    b: &[f64],
    b_transposed: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c.fill(0.0);
        }
        return;
    }
    let (rsa, csa) = if a_transposed { (1, m) } else { (k, 1) };
    let (rsb, csb) = if b_transposed { (1, k) } else { (n, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the asserts above guarantee every strided access stays inside
    // the three slices, and `c` does not alias `a` or `b`.
    unsafe {
        dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Copies `data` (laid out as `shape`) into the layout with `axis_a` and
/// `axis_b` exchanged.
fn swap_axes_data(data: &[f64], shape: &[usize], axis_a: usize, axis_b: usize) -> (Vec<f64>, Vec<usize>) {
    let mut out_shape = shape.to_vec();
    out_shape.swap(axis_a, axis_b);
    let in_strides = strides(shape);
    let mut perm_strides = in_strides.clone();
    perm_strides.swap(axis_a, axis_b);
    let mut out = vec![0.0; data.len()];
    let rank = out_shape.len();
    let mut idx = vec![0usize; rank];
    for slot in out.iter_mut() {
        let src: usize = idx.iter().zip(&perm_strides).map(|(i, s)| i * s).sum();
        *slot = data[src];
        for d in (0..rank).rev() {
            idx[d] += 1;
            if idx[d] < out_shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    (out, out_shape)
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Records a trainable input.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records a constant input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> AutodiffError {
        AutodiffError::ShapeMismatch {
            op,
            left: self.shape(a).to_vec(),
            right: self.shape(b).to_vec(),
        }
    }

    /// Matrix product over the last two axes; a rank-2 `b` is broadcast across
    /// the leading batch axes of `a`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        if sa.len() < 2 || sb.len() < 2 {
            return Err(self.mismatch("matmul", a, b));
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (kb, n) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        if k != kb {
            return Err(self.mismatch("matmul", a, b));
        }
        let batch_dims = &sa[..sa.len() - 2];
        let batch: usize = batch_dims.iter().product();
        let broadcast_b = sb.len() == 2;
        if !broadcast_b && &sb[..sb.len() - 2] != batch_dims {
            return Err(self.mismatch("matmul", a, b));
        }
        let mut out = vec![0.0; batch * m * n];
        {
            let av = &self.value(a).data;
            let bv = &self.value(b).data;
            if broadcast_b {
                gemm(batch * m, k, n, av, false, bv, false, &mut out, false);
            } else {
                for i in 0..batch {
                    gemm(
                        m,
                        k,
                        n,
                        &av[i * m * k..(i + 1) * m * k],
                        false,
                        &bv[i * k * n..(i + 1) * k * n],
                        false,
                        &mut out[i * m * n..(i + 1) * m * n],
                        false,
                    );
                }
            }
        }
        let mut shape = batch_dims.to_vec();
        shape.extend([m, n]);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(
            Tensor { shape, data: out },
            Op::MatMul {
                a,
                b,
                batch,
                m,
                k,
                n,
                broadcast_b,
            },
            rg,
        ))
    }

    fn elementwise2(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<(Tensor, bool)> {
        if self.shape(a) != self.shape(b) {
            return Err(self.mismatch(op, a, b));
        }
        let data = self
            .value(a)
            .data
            .iter()
            .zip(&self.value(b).data)
            .map(|(x, y)| f(*x, *y))
            .collect();
        let t = Tensor {
            shape: self.shape(a).to_vec(),
            data,
        };
        Ok((t, self.rg(a) || self.rg(b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, rg) = self.elementwise2("add", a, b, |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, rg) = self.elementwise2("mul", a, b, |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    /// Adds a vector along the last axis.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let n = self.value(x).last_dim();
        if self.shape(bias) != [n] {
            return Err(self.mismatch("add_bias", x, bias));
        }
        let b = &self.value(bias).data;
        let data = self
            .value(x)
            .data
            .chunks(n)
            .flat_map(|row| row.iter().zip(b).map(|(v, c)| v + c))
            .collect();
        let t = Tensor {
            shape: self.shape(x).to_vec(),
            data,
        };
        let rg = self.rg(x) || self.rg(bias);
        Ok(self.push(t, Op::AddBias(x, bias), rg))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let t = Tensor {
            shape: self.shape(x).to_vec(),
            data: self.value(x).data.iter().map(|v| v * factor).collect(),
        };
        let rg = self.rg(x);
        self.push(t, Op::Scale(x, factor), rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = Tensor {
            shape: self.shape(x).to_vec(),
            data: self.value(x).data.iter().map(|v| v.max(0.0)).collect(),
        };
        let rg = self.rg(x);
        self.push(t, Op::Relu(x), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let t = Tensor {
            shape: self.shape(x).to_vec(),
            data: self.value(x).data.iter().map(|&v| sigmoid(v)).collect(),
        };
        let rg = self.rg(x);
        self.push(t, Op::Sigmoid(x), rg)
    }

    /// Softmax over the last axis, stabilized by subtracting each row's maximum.
    pub fn softmax(&mut self, x: Var) -> Var {
        let n = self.value(x).last_dim();
        let mut data = self.value(x).data.clone();
        for row in data.chunks_mut(n) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        let t = Tensor {
            shape: self.shape(x).to_vec(),
            data,
        };
        let rg = self.rg(x);
        self.push(t, Op::Softmax(x), rg)
    }

    /// Per-row standardization over the last axis followed by `gamma * x̂ + beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, epsilon: f64) -> Result<Var> {
        let d = self.value(x).last_dim();
        if self.shape(gamma) != [d] {
            return Err(self.mismatch("layer_norm", x, gamma));
        }
        if self.shape(beta) != [d] {
            return Err(self.mismatch("layer_norm", x, beta));
        }
        let xv = &self.value(x).data;
        let g = &self.value(gamma).data;
        let b = &self.value(beta).data;
        let rows = xv.len() / d.max(1);
        let mut normalized = vec![0.0; xv.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; xv.len()];
        for r in 0..rows {
            let row = &xv[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + epsilon).sqrt();
            inv_std[r] = inv;
            for c in 0..d {
                let xh = (row[c] - mean) * inv;
                normalized[r * d + c] = xh;
                out[r * d + c] = g[c] * xh + b[c];
            }
        }
        let t = Tensor {
            shape: self.shape(x).to_vec(),
            data: out,
        };
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        Ok(self.push(
            t,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normalized,
                inv_std,
            },
            rg,
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let len: usize = shape.iter().product();
        if len != self.value(x).len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "reshape",
                left: self.shape(x).to_vec(),
                right: shape.to_vec(),
            });
        }
        let t = Tensor {
            shape: shape.to_vec(),
            data: self.value(x).data.clone(),
        };
        let rg = self.rg(x);
        Ok(self.push(t, Op::Reshape(x), rg))
    }

    pub fn swap_axes(&mut self, x: Var, axis_a: usize, axis_b: usize) -> Result<Var> {
        let rank = self.shape(x).len();
        if axis_a >= rank || axis_b >= rank {
            return Err(AutodiffError::InvalidArgument(format!(
                "swap_axes({axis_a}, {axis_b}) on rank {rank}"
            )));
        }
        let (data, shape) = swap_axes_data(&self.value(x).data, self.shape(x), axis_a, axis_b);
        let rg = self.rg(x);
        Ok(self.push(Tensor { shape, data }, Op::SwapAxes { x, axis_a, axis_b }, rg))
    }

    /// Mean over one axis, which is removed from the shape.
    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || shape[axis] == 0 {
            return Err(AutodiffError::InvalidArgument(format!(
                "mean over axis {axis} of shape {shape:?}"
            )));
        }
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let xv = &self.value(x).data;
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let base = (o * len + l) * inner;
                for i in 0..inner {
                    out[o * inner + i] += xv[base + i];
                }
            }
        }
        for v in &mut out {
            *v /= len as f64;
        }
        let mut out_shape = shape.clone();
        out_shape.remove(axis);
        let rg = self.rg(x);
        Ok(self.push(
            Tensor {
                shape: out_shape,
                data: out,
            },
            Op::MeanAxis { x, axis },
            rg,
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().map(|v| v * v).sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::SumSquares(x), rg)
    }

    /// Elementwise product with a constant mask.
    pub fn mul_mask(&mut self, x: Var, mask: Vec<f64>) -> Result<Var> {
        if mask.len() != self.value(x).len() {
            return Err(AutodiffError::InvalidArgument(format!(
                "mask of length {} for tensor of shape {:?}",
                mask.len(),
                self.shape(x)
            )));
        }
        let data = self
            .value(x)
            .data
            .iter()
            .zip(&mask)
            .map(|(v, m)| v * m)
            .collect();
        let t = Tensor {
            shape: self.shape(x).to_vec(),
            data,
        };
        let rg = self.rg(x);
        Ok(self.push(t, Op::MulMask { x, mask }, rg))
    }

    /// Looks up rows of a `[vocab, dim]` table.
    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let shape = self.shape(table).to_vec();
        if shape.len() != 2 {
            return Err(AutodiffError::InvalidArgument(format!(
                "embedding table must be rank 2, got {shape:?}"
            )));
        }
        let (vocab, dim) = (shape[0], shape[1]);
        if let Some(&bad) = indices.iter().find(|&&i| i >= vocab) {
            return Err(AutodiffError::InvalidArgument(format!(
                "index {bad} out of range for table with {vocab} rows"
            )));
        }
        let tv = &self.value(table).data;
        let mut data = Vec::with_capacity(indices.len() * dim);
        for &i in indices {
            data.extend_from_slice(&tv[i * dim..(i + 1) * dim]);
        }
        let rg = self.rg(table);
        Ok(self.push(
            Tensor {
                shape: vec![indices.len(), dim],
                data,
            },
            Op::GatherRows {
                table,
                indices: indices.to_vec(),
            },
            rg,
        ))
    }

    /// Concatenates rank-2 tensors `[n, d_i]` along the last axis.
    pub fn concat_last(&mut self, inputs: &[Var]) -> Result<Var> {
        let Some(&first) = inputs.first() else {
            return Err(AutodiffError::InvalidArgument("concat of nothing".into()));
        };
        let rows = self.shape(first)[0];
        let mut widths = Vec::with_capacity(inputs.len());
        for &v in inputs {
            let s = self.shape(v);
            if s.len() != 2 || s[0] != rows {
                return Err(self.mismatch("concat_last", first, v));
            }
            widths.push(s[1]);
        }
        let total: usize = widths.iter().sum();
        let mut data = vec![0.0; rows * total];
        let mut offset = 0;
        for (&v, &w) in inputs.iter().zip(&widths) {
            let src = &self.value(v).data;
            for r in 0..rows {
                data[r * total + offset..r * total + offset + w]
                    .copy_from_slice(&src[r * w..(r + 1) * w]);
            }
            offset += w;
        }
        let rg = inputs.iter().any(|&v| self.rg(v));
        Ok(self.push(
            Tensor {
                shape: vec![rows, total],
                data,
            },
            Op::ConcatLast {
                inputs: inputs.to_vec(),
                widths,
            },
            rg,
        ))
    }

    /// Mean binary cross-entropy of probabilities against 0/1 targets, with
    /// probabilities clipped to `[epsilon, 1 - epsilon]`.
    pub fn bce(&mut self, p: Var, targets: &[f64], epsilon: f64) -> Result<Var> {
        if targets.len() != self.value(p).len() || targets.is_empty() {
            return Err(AutodiffError::InvalidArgument(format!(
                "{} targets for predictions of shape {:?}",
                targets.len(),
                self.shape(p)
            )));
        }
        let total: f64 = self
            .value(p)
            .data
            .iter()
            .zip(targets)
            .map(|(&p, &y)| {
                let pc = p.clamp(epsilon, 1.0 - epsilon);
                -(y * pc.ln() + (1.0 - y) * (1.0 - pc).ln())
            })
            .sum();
        let loss = total / targets.len() as f64;
        let rg = self.rg(p);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Bce {
                p,
                targets: targets.to_vec(),
                epsilon,
            },
            rg,
        ))
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_shape = self.shape(loss);
        if self.value(loss).len() != 1 {
            return Err(AutodiffError::NonScalarLoss(loss_shape.to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape.clone()).collect(),
        })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul {
                a,
                b,
                batch,
                m,
                k,
                n,
                broadcast_b,
            } => {
                let (batch, m, k, n) = (*batch, *m, *k, *n);
                let av = &self.value(*a).data;
                let bv = &self.value(*b).data;
                if *broadcast_b {
                    // dA = dC · Bᵀ ; dB = Aᵀ · dC over the flattened batch.
                    acc(*a, &mut |ga| gemm(batch * m, n, k, g, false, bv, true, ga, true));
                    acc(*b, &mut |gb| gemm(k, batch * m, n, av, true, g, false, gb, true));
                } else {
                    acc(*a, &mut |ga| {
                        for i in 0..batch {
                            gemm(
                                m,
                                n,
                                k,
                                &g[i * m * n..(i + 1) * m * n],
                                false,
                                &bv[i * k * n..(i + 1) * k * n],
                                true,
                                &mut ga[i * m * k..(i + 1) * m * k],
                                true,
                            );
                        }
                    });
                    acc(*b, &mut |gb| {
                        for i in 0..batch {
                            gemm(
                                k,
                                m,
                                n,
                                &av[i * m * k..(i + 1) * m * k],
                                true,
                                &g[i * m * n..(i + 1) * m * n],
                                false,
                                &mut gb[i * k * n..(i + 1) * k * n],
                                true,
                            );
                        }
                    });
                }
            }
            Op::Add(a, b) => {
                acc(*a, &mut |ga| ga.iter_mut().zip(g).for_each(|(s, d)| *s += d));
                acc(*b, &mut |gb| gb.iter_mut().zip(g).for_each(|(s, d)| *s += d));
            }
            Op::Mul(a, b) => {
                let av = &self.value(*a).data;
                let bv = &self.value(*b).data;
                acc(*a, &mut |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g[i] * bv[i];
                    }
                });
                acc(*b, &mut |gb| {
                    for i in 0..gb.len() {
                        gb[i] += g[i] * av[i];
                    }
                });
            }
            Op::AddBias(x, bias) => {
                acc(*x, &mut |gx| gx.iter_mut().zip(g).for_each(|(s, d)| *s += d));
                acc(*bias, &mut |gb| {
                    let n = gb.len();
                    for row in g.chunks(n) {
                        gb.iter_mut().zip(row).for_each(|(s, d)| *s += d);
                    }
                });
            }
            Op::Scale(x, factor) => {
                acc(*x, &mut |gx| gx.iter_mut().zip(g).for_each(|(s, d)| *s += d * factor));
            }
            Op::Relu(x) => {
                let xv = &self.value(*x).data;
                acc(*x, &mut |gx| {
                    for i in 0..gx.len() {
                        if xv[i] > 0.0 {
                            gx[i] += g[i];
                        }
                    }
                });
            }
            Op::Sigmoid(x) => {
                let y = &node.value.data;
                acc(*x, &mut |gx| {
                    for i in 0..gx.len() {
                        gx[i] += g[i] * y[i] * (1.0 - y[i]);
                    }
                });
            }
            Op::Softmax(x) => {
                let y = &node.value.data;
                let n = node.value.last_dim();
                acc(*x, &mut |gx| {
                    for r in 0..y.len() / n {
                        let ys = &y[r * n..(r + 1) * n];
                        let gs = &g[r * n..(r + 1) * n];
                        let dot: f64 = ys.iter().zip(gs).map(|(a, b)| a * b).sum();
                        for c in 0..n {
                            gx[r * n + c] += ys[c] * (gs[c] - dot);
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normalized,
                inv_std,
            } => {
                let d = node.value.last_dim();
                let gv = &self.value(*gamma).data;
                acc(*gamma, &mut |gg| {
                    for (r, row) in g.chunks(d).enumerate() {
                        for c in 0..d {
                            gg[c] += row[c] * normalized[r * d + c];
                        }
                    }
                });
                acc(*beta, &mut |gb| {
                    for row in g.chunks(d) {
                        gb.iter_mut().zip(row).for_each(|(s, v)| *s += v);
                    }
                });
                acc(*x, &mut |gx| {
                    let df = d as f64;
                    for (r, row) in g.chunks(d).enumerate() {
                        let xh = &normalized[r * d..(r + 1) * d];
                        let mut sum_dxh = 0.0;
                        let mut sum_dxh_xh = 0.0;
                        for c in 0..d {
                            let dxh = row[c] * gv[c];
                            sum_dxh += dxh;
                            sum_dxh_xh += dxh * xh[c];
                        }
                        for c in 0..d {
                            let dxh = row[c] * gv[c];
                            gx[r * d + c] +=
                                inv_std[r] / df * (df * dxh - sum_dxh - xh[c] * sum_dxh_xh);
                        }
                    }
                });
            }
            Op::Reshape(x) => {
                acc(*x, &mut |gx| gx.iter_mut().zip(g).for_each(|(s, d)| *s += d));
            }
            Op::SwapAxes { x, axis_a, axis_b } => {
                let (back, _) = swap_axes_data(g, &node.value.shape, *axis_a, *axis_b);
                acc(*x, &mut |gx| gx.iter_mut().zip(&back).for_each(|(s, d)| *s += d));
            }
            Op::MeanAxis { x, axis } => {
                let shape = self.shape(*x);
                let outer: usize = shape[..*axis].iter().product();
                let len = shape[*axis];
                let inner: usize = shape[axis + 1..].iter().product();
                let scale = 1.0 / len as f64;
                acc(*x, &mut |gx| {
                    for o in 0..outer {
                        for l in 0..len {
                            let base = (o * len + l) * inner;
                            for i in 0..inner {
                                gx[base + i] += g[o * inner + i] * scale;
                            }
                        }
                    }
                });
            }
            Op::Sum(x) => {
                acc(*x, &mut |gx| gx.iter_mut().for_each(|s| *s += g[0]));
            }
            Op::SumSquares(x) => {
                let xv = &self.value(*x).data;
                acc(*x, &mut |gx| {
                    for i in 0..gx.len() {
                        gx[i] += 2.0 * xv[i] * g[0];
                    }
                });
            }
            Op::MulMask { x, mask } => {
                acc(*x, &mut |gx| {
                    for i in 0..gx.len() {
                        gx[i] += g[i] * mask[i];
                    }
                });
            }
            Op::GatherRows { table, indices } => {
                let dim = node.value.last_dim();
                acc(*table, &mut |gt| {
                    for (r, &i) in indices.iter().enumerate() {
                        for c in 0..dim {
                            gt[i * dim + c] += g[r * dim + c];
                        }
                    }
                });
            }
            Op::ConcatLast { inputs, widths } => {
                let total: usize = widths.iter().sum();
                let rows = node.value.shape[0];
                let mut offset = 0;
                for (&v, &w) in inputs.iter().zip(widths) {
                    acc(v, &mut |gv| {
                        for r in 0..rows {
                            for c in 0..w {
                                gv[r * w + c] += g[r * total + offset + c];
                            }
                        }
                    });
                    offset += w;
                }
            }
            Op::Bce {
                p,
                targets,
                epsilon,
            } => {
                let pv = &self.value(*p).data;
                let scale = g[0] / targets.len() as f64;
                acc(*p, &mut |gp| {
                    for i in 0..gp.len() {
                        let (pi, yi) = (pv[i], targets[i]);
                        if pi > *epsilon && pi < 1.0 - epsilon {
                            gp[i] += scale * (-yi / pi + (1.0 - yi) / (1.0 - pi));
                        }
                    }
                });
            }
        }
    }

    /// `activation(x · weight + bias)`.
    pub fn dense(&mut self, x: Var, weight: Var, bias: Var, activation: Activation) -> Result<Var> {
        let h = self.matmul(x, weight)?;
        let h = self.add_bias(h, bias)?;
        Ok(match activation {
            Activation::None => h,
            Activation::Relu => self.relu(h),
            Activation::Sigmoid => self.sigmoid(h),
        })
    }

    /// Inverted dropout: in training mode each element is zeroed with
    /// probability `rate` and survivors are scaled by `1 / (1 - rate)`;
    /// otherwise the input is returned unchanged.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, training: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(AutodiffError::InvalidArgument(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask = (0..self.value(x).len())
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        self.mul_mask(x, mask)
    }

    /// Mean over the sequence axis (axis 1) of a `[batch, seq, dim]` tensor.
    pub fn global_average_pool(&mut self, x: Var) -> Result<Var> {
        if self.shape(x).len() != 3 {
            return Err(AutodiffError::InvalidArgument(format!(
                "global average pool expects [batch, seq, dim], got {:?}",
                self.shape(x)
            )));
        }
        self.mean_axis(x, 1)
    }

    /// Mean binary cross-entropy plus `l2 · Σ‖W‖²` over `weights`.
    pub fn bce_loss(&mut self, p: Var, targets: &[f64], l2: f64, weights: &[Var]) -> Result<Var> {
        let mut loss = self.bce(p, targets, BCE_EPSILON)?;
        if l2 != 0.0 {
            for &w in weights {
                let sq = self.sum_squares(w);
                let term = self.scale(sq, l2);
                loss = self.add(loss, term)?;
            }
        }
        Ok(loss)
    }

    /// `softmax(q · kᵀ / √d_k) · v` over the last two axes. Returns the output
    /// and the attention weights.
    pub fn scaled_dot_product_attention(&mut self, q: Var, k: Var, v: Var) -> Result<(Var, Var)> {
        let (sq, sk, sv) = (self.shape(q).to_vec(), self.shape(k).to_vec(), self.shape(v).to_vec());
        let rank = sq.len();
        if rank < 2 || sk.len() != rank || sv.len() != rank {
            return Err(self.mismatch("attention", q, k));
        }
        if sq[rank - 1] != sk[rank - 1] || sq[..rank - 2] != sk[..rank - 2] {
            return Err(self.mismatch("attention", q, k));
        }
        if sk[rank - 2] != sv[rank - 2] || sk[..rank - 2] != sv[..rank - 2] {
            return Err(self.mismatch("attention", k, v));
        }
        let d_k = sq[rank - 1] as f64;
        let kt = self.swap_axes(k, rank - 2, rank - 1)?;
        let scores = self.matmul(q, kt)?;
        let scores = self.scale(scores, 1.0 / d_k.sqrt());
        let weights = self.softmax(scores);
        let out = self.matmul(weights, v)?;
        Ok((out, weights))
    }

    /// Multi-head self-attention over `x: [batch, seq, model_dim]`.
    pub fn multi_head_attention(&mut self, x: Var, p: &AttentionVars, num_heads: usize) -> Result<(Var, Var)> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 3 {
            return Err(AutodiffError::InvalidArgument(format!(
                "attention input must be [batch, seq, dim], got {shape:?}"
            )));
        }
        let (batch, seq, dim) = (shape[0], shape[1], shape[2]);
        if num_heads == 0 || dim % num_heads != 0 {
            return Err(AutodiffError::InvalidArgument(format!(
                "model dim {dim} is not divisible by {num_heads} heads"
            )));
        }
        let d_k = dim / num_heads;
        let heads = |tape: &mut Tape, w: Var, b: Var| -> Result<Var> {
            let h = tape.dense(x, w, b, Activation::None)?;
            let h = tape.reshape(h, &[batch, seq, num_heads, d_k])?;
            tape.swap_axes(h, 1, 2)
        };
        let q = heads(self, p.wq, p.bq)?;
        let k = heads(self, p.wk, p.bk)?;
        let v = heads(self, p.wv, p.bv)?;
        let (ctx, weights) = self.scaled_dot_product_attention(q, k, v)?;
        let ctx = self.swap_axes(ctx, 1, 2)?;
        let ctx = self.reshape(ctx, &[batch, seq, dim])?;
        let out = self.dense(ctx, p.wo, p.bo, Activation::None)?;
        Ok((out, weights))
    }
}

/// Query/key/value/output projections of one attention block, as tape handles.
#[derive(Debug, Clone, Copy)]
pub struct AttentionVars {
    pub wq: Var,
    pub bq: Var,
    pub wk: Var,
    pub bk: Var,
    pub wv: Var,
    pub bv: Var,
    pub wo: Var,
    pub bo: Var,
}

pub const BCE_EPSILON: f64 = 1e-7;

/// Adam moments and hyperparameters for a list of parameter tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl AdamState {
    pub fn new(sizes: &[usize], learning_rate: f64) -> Self {
        Self {
            step: 0,
            first_moment: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            learning_rate,
        }
    }
}

/// One bias-corrected Adam update applied in place.
pub fn adam_step(params: &mut [&mut [f64]], grads: &[Vec<f64>], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(AutodiffError::InvalidArgument(format!(
            "adam: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.first_moment) {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(AutodiffError::InvalidArgument(format!(
                "adam: parameter of length {} with gradient of length {}",
                p.len(),
                g.len()
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let g = &grads[i];
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        for j in 0..p.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            p[j] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}
