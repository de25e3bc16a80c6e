//! Computation record for reverse-mode differentiation.
//!
//! Every operation appends one node holding its forward value. Nodes are
//! created in evaluation order, so the node list is already topologically
//! sorted and the backward sweep is a single reverse pass.

use crate::error::{Error, Result};

use super::rng::SeededRng;
use super::tensor::{gemm, gemm_strided, Tensor};

const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;
const SELU_SCALE: f64 = 1.050_700_987_355_480_5;

/// Handle to a node of a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Tanh,
    Relu,
    Selu,
    Sigmoid,
    Exp,
    Log,
    Neg,
    Abs,
    Square,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    Unary(UnaryOp, Var),
    Binary(BinaryOp, Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Reduce {
        kind: ReduceOp,
        input: Var,
        axis: Option<usize>,
    },
    SliceCols {
        input: Var,
        start: usize,
    },
    PairwiseDiff(Var),
    Reparam {
        mu: Var,
        logvar: Var,
        eps: Tensor,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        classes: usize,
    },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Ordered list of recorded operations.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node of a tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `var`; zeros when `var` does not influence the loss.
    pub fn get(&self, var: Var) -> Tensor {
        let shape = &self.shapes[var.0];
        match &self.grads[var.0] {
            Some(g) => Tensor::new(shape.clone(), g.clone()).expect("gradient shape"),
            None => Tensor::zeros(shape),
        }
    }

    /// Moves out the gradients for `vars`, in order.
    pub fn take_all(&mut self, vars: &[Var]) -> Vec<Tensor> {
        vars.iter()
            .map(|v| {
                let shape = self.shapes[v.0].clone();
                match self.grads[v.0].take() {
                    Some(g) => Tensor::new(shape, g).expect("gradient shape"),
                    None => Tensor::zeros(&shape),
                }
            })
            .collect()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    /// A leaf that receives gradients.
    pub fn parameter(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// A leaf treated as constant during differentiation.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2()?;
        let (k2, n) = self.value(b).dims2()?;
        if k != k2 {
            return Err(Error::dim(format!("matmul {m}x{k} by {k2}x{n}")));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a).data(), self.value(b).data(), &mut out);
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(Op::MatMul(a, b), Tensor::matrix(m, n, out)?, rg))
    }

    /// Adds a length-`n` row vector to every row of an `m×n` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (_, n) = self.value(a).dims2()?;
        if self.value(row).len() != n {
            return Err(Error::dim(format!(
                "add_row: {} columns vs row of {}",
                n,
                self.value(row).len()
            )));
        }
        let r = self.value(row).data().to_vec();
        let mut out = self.value(a).clone();
        for chunk in out.data_mut().chunks_mut(n) {
            for (o, b) in chunk.iter_mut().zip(&r) {
                *o += b;
            }
        }
        let rg = self.needs(a) || self.needs(row);
        Ok(self.push(Op::AddRow(a, row), out, rg))
    }

    pub fn unary(&mut self, op: UnaryOp, a: Var) -> Result<Var> {
        let x = self.value(a);
        let out = match op {
            UnaryOp::Tanh => x.map(f64::tanh),
            UnaryOp::Relu => x.map(|v| v.max(0.0)),
            UnaryOp::Selu => x.map(|v| {
                if v > 0.0 {
                    SELU_SCALE * v
                } else {
                    SELU_SCALE * SELU_ALPHA * (v.exp() - 1.0)
                }
            }),
            UnaryOp::Sigmoid => x.map(sigmoid),
            UnaryOp::Exp => x.map(f64::exp),
            UnaryOp::Log => {
                if let Some(bad) = x.data().iter().find(|v| !(**v > 0.0)) {
                    return Err(Error::Domain(format!("log of non-positive value {bad}")));
                }
                x.map(f64::ln)
            }
            UnaryOp::Neg => x.map(|v| -v),
            UnaryOp::Abs => x.map(f64::abs),
            UnaryOp::Square => x.map(|v| v * v),
        };
        let rg = self.needs(a);
        Ok(self.push(Op::Unary(op, a), out, rg))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryOp::Tanh, a)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryOp::Relu, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryOp::Sigmoid, a)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryOp::Exp, a)
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryOp::Abs, a)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryOp::Square, a)
    }

    /// Pointwise binary op; either operand may be a one-element tensor that
    /// broadcasts against the other.
    pub fn binary(&mut self, op: BinaryOp, a: Var, b: Var) -> Result<Var> {
        let (xa, xb) = (self.value(a), self.value(b));
        let shape = if xa.shape() == xb.shape() || xb.len() == 1 {
            xa.shape().to_vec()
        } else if xa.len() == 1 {
            xb.shape().to_vec()
        } else {
            return Err(Error::dim(format!(
                "{:?}: shapes {:?} and {:?}",
                op,
                xa.shape(),
                xb.shape()
            )));
        };
        let n: usize = shape.iter().product();
        let (da, db) = (xa.data(), xb.data());
        let f = match op {
            BinaryOp::Add => |x: f64, y: f64| x + y,
            BinaryOp::Sub => |x: f64, y: f64| x - y,
            BinaryOp::Mul => |x: f64, y: f64| x * y,
        };
        let out: Vec<f64> = (0..n)
            .map(|i| f(da[bidx(da.len(), i)], db[bidx(db.len(), i)]))
            .collect();
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Binary(op, a, b), Tensor::new(shape, out)?, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Mul, a, b)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).map(|v| v * factor);
        let rg = self.needs(a);
        self.push(Op::Scale(a, factor), out, rg)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|v| v + c);
        let rg = self.needs(a);
        self.push(Op::AddScalar(a), out, rg)
    }

    /// Sum or mean over one axis (removed from the shape) or over everything.
    pub fn reduce(&mut self, kind: ReduceOp, a: Var, axis: Option<usize>) -> Result<Var> {
        let x = self.value(a);
        let out = match axis {
            None => {
                let s: f64 = x.data().iter().sum();
                let v = match kind {
                    ReduceOp::Sum => s,
                    ReduceOp::Mean => s / x.len() as f64,
                };
                Tensor::scalar(v)
            }
            Some(ax) => {
                if ax >= x.rank() {
                    return Err(Error::dim(format!(
                        "axis {} out of range for rank {}",
                        ax,
                        x.rank()
                    )));
                }
                let (outer, len, inner) = split_axis(x.shape(), ax);
                let mut acc = vec![0.0; outer * inner];
                let d = x.data();
                for o in 0..outer {
                    for l in 0..len {
                        let base = (o * len + l) * inner;
                        for i in 0..inner {
                            acc[o * inner + i] += d[base + i];
                        }
                    }
                }
                if kind == ReduceOp::Mean {
                    for v in &mut acc {
                        *v /= len as f64;
                    }
                }
                let mut shape = x.shape().to_vec();
                shape.remove(ax);
                Tensor::new(shape, acc)?
            }
        };
        let rg = self.needs(a);
        Ok(self.push(
            Op::Reduce {
                kind,
                input: a,
                axis,
            },
            out,
            rg,
        ))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.reduce(ReduceOp::Sum, a, None)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.reduce(ReduceOp::Mean, a, None)
    }

    /// Columns `start..start + len` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, cols) = self.value(a).dims2()?;
        if start + len > cols {
            return Err(Error::dim(format!(
                "columns {}..{} of a {}-column matrix",
                start,
                start + len,
                cols
            )));
        }
        let d = self.value(a).data();
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&d[r * cols + start..r * cols + start + len]);
        }
        let rg = self.needs(a);
        Ok(self.push(Op::SliceCols { input: a, start }, Tensor::matrix(rows, len, out)?, rg))
    }

    /// `out(i, j) = v_i - v_j` for a length-`m` vector (or `m×1` column).
    pub fn pairwise_diff(&mut self, v: Var) -> Result<Var> {
        let x = self.value(v);
        let ok = x.rank() == 1 || (x.rank() == 2 && x.shape()[1] == 1);
        if !ok {
            return Err(Error::dim(format!(
                "pairwise_diff expects a vector, got {:?}",
                x.shape()
            )));
        }
        let d = x.data();
        let m = d.len();
        let mut out = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                out.push(d[i] - d[j]);
            }
        }
        let rg = self.needs(v);
        Ok(self.push(Op::PairwiseDiff(v), Tensor::matrix(m, m, out)?, rg))
    }

    /// Reparameterized draw `mu + exp(logvar / 2) * eps` with `eps ~ N(0, 1)`
    /// held constant for differentiation.
    pub fn gaussian_sample(&mut self, mu: Var, logvar: Var, rng: &mut SeededRng) -> Result<Var> {
        let shape = self.value(mu).shape().to_vec();
        if self.value(logvar).shape() != shape.as_slice() {
            return Err(Error::dim(format!(
                "mu {:?} vs logvar {:?}",
                shape,
                self.value(logvar).shape()
            )));
        }
        let eps = rng.normal_tensor(&shape);
        self.gaussian_sample_with(mu, logvar, eps)
    }

    /// As [`Tape::gaussian_sample`] with caller-supplied noise.
    pub fn gaussian_sample_with(&mut self, mu: Var, logvar: Var, eps: Tensor) -> Result<Var> {
        let (m, lv) = (self.value(mu), self.value(logvar));
        if m.shape() != lv.shape() || m.shape() != eps.shape() {
            return Err(Error::dim("gaussian_sample operand shapes differ"));
        }
        let out: Vec<f64> = m
            .data()
            .iter()
            .zip(lv.data())
            .zip(eps.data())
            .map(|((&m, &l), &e)| m + (0.5 * l).exp() * e)
            .collect();
        let value = Tensor::new(m.shape().to_vec(), out)?;
        let rg = self.needs(mu) || self.needs(logvar);
        Ok(self.push(Op::Reparam { mu, logvar, eps }, value, rg))
    }

    /// Mean over rows of the summed per-position cross-entropy.
    ///
    /// `logits` is `batch × (positions·classes)`; `targets` holds
    /// `batch·positions` class ids in row-major order.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        targets: Vec<usize>,
        classes: usize,
    ) -> Result<Var> {
        let (batch, width) = self.value(logits).dims2()?;
        if classes == 0 || width % classes != 0 || targets.len() * classes != batch * width {
            return Err(Error::dim(format!(
                "cross-entropy: logits {batch}x{width}, {} targets, {classes} classes",
                targets.len()
            )));
        }
        if let Some(t) = targets.iter().find(|&&t| t >= classes) {
            return Err(Error::contract(format!("target class {t} >= {classes}")));
        }
        let d = self.value(logits).data();
        let mut total = 0.0;
        for (g, &t) in d.chunks(classes).zip(&targets) {
            total += log_sum_exp(g) - g[t];
        }
        let rg = self.needs(logits);
        Ok(self.push(
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                classes,
            },
            Tensor::scalar(total / batch as f64),
            rg,
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self
                .nodes
                .iter()
                .map(|n| n.value.shape().to_vec())
                .collect(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], var: Var, f: impl FnOnce(&mut [f64])) {
        if !self.needs(var) {
            return;
        }
        let slot = &mut grads[var.0];
        let buf = slot.get_or_insert_with(|| vec![0.0; self.nodes[var.0].value.len()]);
        f(buf);
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).dims2().expect("matmul lhs");
                let (_, n) = self.value(*b).dims2().expect("matmul rhs");
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                // dA = dC · Bᵀ
                self.accumulate(grads, *a, |ga| {
                    gemm_strided(m, n, k, g, (n as isize, 1), bv, (1, n as isize), ga, 1.0);
                });
                // dB = Aᵀ · dC
                self.accumulate(grads, *b, |gb| {
                    gemm_strided(k, m, n, av, (1, k as isize), g, (n as isize, 1), gb, 1.0);
                });
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, *a, |ga| add_into(ga, g));
                let n = self.value(*row).len();
                self.accumulate(grads, *row, |gr| {
                    for chunk in g.chunks(n) {
                        add_into(gr, chunk);
                    }
                });
            }
            Op::Unary(op, a) => {
                let x = self.value(*a).data();
                let y = node.value.data();
                self.accumulate(grads, *a, |ga| {
                    for i in 0..ga.len() {
                        let d = match op {
                            UnaryOp::Tanh => 1.0 - y[i] * y[i],
                            UnaryOp::Relu => {
                                if x[i] > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            UnaryOp::Selu => {
                                if x[i] > 0.0 {
                                    SELU_SCALE
                                } else {
                                    y[i] + SELU_SCALE * SELU_ALPHA
                                }
                            }
                            UnaryOp::Sigmoid => y[i] * (1.0 - y[i]),
                            UnaryOp::Exp => y[i],
                            UnaryOp::Log => 1.0 / x[i],
                            UnaryOp::Neg => -1.0,
                            UnaryOp::Abs => sign(x[i]),
                            UnaryOp::Square => 2.0 * x[i],
                        };
                        ga[i] += g[i] * d;
                    }
                });
            }
            Op::Binary(op, a, b) => {
                let xa = self.value(*a).data();
                let xb = self.value(*b).data();
                self.accumulate(grads, *a, |ga| {
                    let broadcast = ga.len() != g.len();
                    for i in 0..g.len() {
                        let d = match op {
                            BinaryOp::Add | BinaryOp::Sub => 1.0,
                            BinaryOp::Mul => xb[bidx(xb.len(), i)],
                        };
                        ga[if broadcast { 0 } else { i }] += g[i] * d;
                    }
                });
                self.accumulate(grads, *b, |gb| {
                    let broadcast = gb.len() != g.len();
                    for i in 0..g.len() {
                        let d = match op {
                            BinaryOp::Add => 1.0,
                            BinaryOp::Sub => -1.0,
                            BinaryOp::Mul => xa[bidx(xa.len(), i)],
                        };
                        gb[if broadcast { 0 } else { i }] += g[i] * d;
                    }
                });
            }
            Op::Scale(a, c) => {
                self.accumulate(grads, *a, |ga| {
                    for (o, v) in ga.iter_mut().zip(g) {
                        *o += v * c;
                    }
                });
            }
            Op::AddScalar(a) => self.accumulate(grads, *a, |ga| add_into(ga, g)),
            Op::Reduce { kind, input, axis } => {
                let shape = self.value(*input).shape().to_vec();
                self.accumulate(grads, *input, |gi| match axis {
                    None => {
                        let v = match kind {
                            ReduceOp::Sum => g[0],
                            ReduceOp::Mean => g[0] / gi.len() as f64,
                        };
                        for o in gi.iter_mut() {
                            *o += v;
                        }
                    }
                    Some(ax) => {
                        let (outer, len, inner) = split_axis(&shape, *ax);
                        let f = match kind {
                            ReduceOp::Sum => 1.0,
                            ReduceOp::Mean => 1.0 / len as f64,
                        };
                        for o in 0..outer {
                            for l in 0..len {
                                let base = (o * len + l) * inner;
                                for i in 0..inner {
                                    gi[base + i] += g[o * inner + i] * f;
                                }
                            }
                        }
                    }
                });
            }
            Op::SliceCols { input, start } => {
                let cols = self.value(*input).shape()[1];
                let len = node.value.shape()[1];
                self.accumulate(grads, *input, |gi| {
                    for (r, chunk) in g.chunks(len).enumerate() {
                        add_into(&mut gi[r * cols + start..r * cols + start + len], chunk);
                    }
                });
            }
            Op::PairwiseDiff(v) => {
                let m = self.value(*v).len();
                self.accumulate(grads, *v, |gv| {
                    for i in 0..m {
                        for j in 0..m {
                            let gij = g[i * m + j];
                            gv[i] += gij;
                            gv[j] -= gij;
                        }
                    }
                });
            }
            Op::Reparam { mu, logvar, eps } => {
                self.accumulate(grads, *mu, |gm| add_into(gm, g));
                let lv = self.value(*logvar).data();
                self.accumulate(grads, *logvar, |gl| {
                    for i in 0..gl.len() {
                        gl[i] += g[i] * 0.5 * (0.5 * lv[i]).exp() * eps.data()[i];
                    }
                });
            }
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                classes,
            } => {
                let x = self.value(*logits);
                let batch = x.shape()[0] as f64;
                let scale = g[0] / batch;
                self.accumulate(grads, *logits, |gl| {
                    for ((gc, xc), &t) in gl
                        .chunks_mut(*classes)
                        .zip(x.data().chunks(*classes))
                        .zip(targets)
                    {
                        let lse = log_sum_exp(xc);
                        for c in 0..*classes {
                            let p = (xc[c] - lse).exp();
                            let onehot = if c == t { 1.0 } else { 0.0 };
                            gc[c] += scale * (p - onehot);
                        }
                    }
                });
            }
        }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Sign with `sign(0) = 0`.
pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn bidx(len: usize, i: usize) -> usize {
    if len == 1 {
        0
    } else {
        i
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}
