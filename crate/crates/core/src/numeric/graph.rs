//! Reverse-mode differentiation over a linear record of primitive operations.
//!
//! Every op appends a node holding its output and whatever the backward rule
//! needs (argmax positions, dropout masks, noise). `backward` walks the record
//! once in reverse and returns the gradient of a scalar loss with respect to
//! each parameter it reached.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::params::{Gradients, ParamId, ParamStore};
use crate::numeric::real::Real;
use crate::numeric::rng::SeededRng;
use crate::numeric::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc, Tensor};

/// Clamp added inside every logarithm of a probability.
pub const LOG_EPS: f64 = 1e-12;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Sigmoid => T::one() / (T::one() + (-x).exp()),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(T::zero()),
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    fn derivative_from_output<T: Real>(self, y: T) -> T {
        match self {
            Activation::Sigmoid => y * (T::one() - y),
            Activation::Tanh => T::one() - y * y,
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Valid,
    Same,
}

enum Op<T> {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Act(Var, Activation),
    Exp(Var),
    Conv1d {
        input: Var,
        filters: Var,
        bias: Var,
        pad_left: usize,
    },
    MaxPoolTime {
        input: Var,
        argmax: Vec<usize>,
    },
    Concat(Vec<Var>),
    ConcatCols(Vec<Var>),
    Reshape(Var),
    Row(Var, usize),
    Softmax(Var),
    CrossEntropy {
        probs: Var,
        target: usize,
    },
    NllRows {
        probs: Var,
        targets: Vec<usize>,
    },
    Dropout {
        input: Var,
        mask: Vec<T>,
    },
    Gather {
        table: Var,
        indices: Vec<usize>,
    },
    Sum(Var),
    Stack(Vec<Var>),
    Dot(Var, Var),
    GaussianSample {
        mu: Var,
        logvar: Var,
        eps: Vec<T>,
    },
    KlGaussian {
        mu: Var,
        logvar: Var,
    },
    Entropy(Var),
}

struct Node<T> {
    op: Op<T>,
    /// `None` for parameter leaves, whose value lives in the store.
    value: Option<Tensor<T>>,
    requires_grad: bool,
}

/// Computation record: the tape of one forward pass.
pub struct Graph<'p, T: Real> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    param_nodes: HashMap<ParamId, Var>,
    consumed: bool,
}

fn shape_err(op: &'static str, a: &[usize], b: &[usize]) -> Error {
    Error::Shape {
        op,
        lhs: a.to_vec(),
        rhs: b.to_vec(),
    }
}

impl<'p, T: Real> Graph<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
            consumed: false,
        }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        let node = &self.nodes[v.0];
        match (&node.op, &node.value) {
            (Op::Param(id), _) => self.params.value(*id),
            (_, Some(t)) => t,
            (_, None) => unreachable!("non-parameter node without a value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, v: Var) -> T {
        self.value(v).item()
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            op,
            value: Some(value),
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            op: Op::Constant,
            value: Some(value),
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_nodes.get(&id) {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes.insert(id, v);
        v
    }

    /// Matrix product. A 1-D left operand is treated as a single row and the
    /// result is 1-D again.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = ta.as_matrix();
        if tb.rank() != 2 || ta.rank() > 2 || tb.shape()[0] != k {
            return Err(shape_err("matmul", ta.shape(), tb.shape()));
        }
        let n = tb.shape()[1];
        let mut out = vec![T::zero(); m * n];
        gemm_acc(ta.data(), tb.data(), &mut out, m, k, n);
        let shape = if ta.rank() == 1 { vec![n] } else { vec![m, n] };
        let t = Tensor::new(shape, out)?;
        Ok(self.push(Op::MatMul(a, b), t, &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("add", ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| x + y).collect();
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(Op::Add(a, b), t, &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let nb = self.scale(b, T::of(-1.0));
        self.add(a, nb)
    }

    /// `a + b` with `b` broadcast over the rows of `a`.
    pub fn add_bias(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (_, n) = ta.as_matrix();
        if tb.rank() != 1 || tb.len() != n {
            return Err(shape_err("add_bias", ta.shape(), tb.shape()));
        }
        let mut out = ta.clone();
        for row in out.data_mut().chunks_mut(n) {
            for (x, &y) in row.iter_mut().zip(tb.data()) {
                *x += y;
            }
        }
        Ok(self.push(Op::AddBias(a, b), out, &[a, b]))
    }

    /// Affine map `x·w + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let h = self.matmul(x, w)?;
        self.add_bias(h, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("mul", ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| x * y).collect();
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(Op::Mul(a, b), t, &[a, b]))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let mut t = self.value(a).clone();
        t.scale_assign(c);
        self.push(Op::Scale(a, c), t, &[a])
    }

    pub fn activation(&mut self, a: Var, kind: Activation) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| kind.apply(x)).collect();
        let t = Tensor::new(ta.shape().to_vec(), data).expect("same shape");
        self.push(Op::Act(a, kind), t, &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Tanh)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Relu)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| x.exp()).collect();
        let t = Tensor::new(ta.shape().to_vec(), data).expect("same shape");
        self.push(Op::Exp(a), t, &[a])
    }

    /// Affine 1-D convolution over time.
    ///
    /// `input` is `[m × d]`, `filters` is `[window × d × n_filters]`, `bias` is
    /// `[n_filters]`. Output row `i` is `Σ_k input[i+k-pad] · filters[k] + bias`.
    pub fn conv1d(&mut self, input: Var, filters: Var, bias: Var, padding: Padding) -> Result<Var> {
        let (ti, tf, tb) = (self.value(input), self.value(filters), self.value(bias));
        if ti.rank() != 2 || tf.rank() != 3 || tf.shape()[1] != ti.shape()[1] {
            return Err(shape_err("conv1d", ti.shape(), tf.shape()));
        }
        let (m, d) = (ti.shape()[0], ti.shape()[1]);
        let (w, nf) = (tf.shape()[0], tf.shape()[2]);
        if tb.shape() != [nf] {
            return Err(shape_err("conv1d bias", tf.shape(), tb.shape()));
        }
        let (out_len, pad_left) = match padding {
            Padding::Valid => {
                if m < w {
                    return Err(Error::InputTooShort {
                        op: "conv1d",
                        len: m,
                        window: w,
                    });
                }
                (m - w + 1, 0)
            }
            Padding::Same => (m, (w - 1) / 2),
        };
        let mut out = vec![T::zero(); out_len * nf];
        for i in 0..out_len {
            out[i * nf..(i + 1) * nf].copy_from_slice(tb.data());
        }
        for k in 0..w {
            let fk = &tf.data()[k * d * nf..(k + 1) * d * nf];
            // output rows i whose source row i + k - pad_left is in range
            let lo = pad_left.saturating_sub(k);
            let hi = (m + pad_left).saturating_sub(k).min(out_len);
            if lo >= hi {
                continue;
            }
            let src = lo + k - pad_left;
            gemm_acc(
                &ti.data()[src * d..(src + hi - lo) * d],
                fk,
                &mut out[lo * nf..hi * nf],
                hi - lo,
                d,
                nf,
            );
        }
        let t = Tensor::new(vec![out_len, nf], out)?;
        Ok(self.push(
            Op::Conv1d {
                input,
                filters,
                bias,
                pad_left,
            },
            t,
            &[input, filters, bias],
        ))
    }

    /// Column-wise maximum over the time axis of `[L × n]`; ties go to the lowest index.
    pub fn max_pool_time(&mut self, input: Var) -> Result<Var> {
        let ti = self.value(input);
        let (l, n) = ti.as_matrix();
        if ti.rank() != 2 || l == 0 {
            return Err(Error::EmptyTimeAxis);
        }
        let mut argmax = vec![0usize; n];
        let mut out = ti.row(0).to_vec();
        for t in 1..l {
            for (f, &x) in ti.row(t).iter().enumerate() {
                if x > out[f] {
                    out[f] = x;
                    argmax[f] = t;
                }
            }
        }
        let t = Tensor::vector(out);
        Ok(self.push(Op::MaxPoolTime { input, argmax }, t, &[input]))
    }

    /// Concatenate 1-D tensors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.rank() != 1 {
                return Err(shape_err("concat", t.shape(), &[]));
            }
            data.extend_from_slice(t.data());
        }
        let t = Tensor::vector(data);
        Ok(self.push(Op::Concat(parts.to_vec()), t, parts))
    }

    /// Concatenate 2-D tensors with equal row counts along the column axis.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).as_matrix().0;
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rank() != 2 || t.shape()[0] != rows {
                return Err(shape_err("concat_cols", self.value(parts[0]).shape(), t.shape()));
            }
            cols += t.shape()[1];
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let t = Tensor::new(vec![rows, cols], data)?;
        Ok(self.push(Op::ConcatCols(parts.to_vec()), t, parts))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a).clone().reshaped(shape)?;
        Ok(self.push(Op::Reshape(a), t, &[a]))
    }

    /// Row `index` of a 2-D tensor, as a 1-D tensor.
    pub fn row(&mut self, a: Var, index: usize) -> Result<Var> {
        let ta = self.value(a);
        let (r, _) = ta.as_matrix();
        if ta.rank() != 2 || index >= r {
            return Err(Error::IndexOutOfRange {
                what: "row",
                index,
                size: r,
            });
        }
        let t = Tensor::vector(ta.row(index).to_vec());
        Ok(self.push(Op::Row(a, index), t, &[a]))
    }

    /// Softmax over the last axis (each row of a matrix independently).
    pub fn softmax(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let (_, n) = ta.as_matrix();
        let mut out = ta.clone();
        for row in out.data_mut().chunks_mut(n) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut z = T::zero();
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                z += *x;
            }
            for x in row.iter_mut() {
                *x /= z;
            }
        }
        self.push(Op::Softmax(a), out, &[a])
    }

    /// `-ln(p[target] + ε)` for a probability vector `p`.
    pub fn cross_entropy(&mut self, probs: Var, target: usize) -> Result<Var> {
        let tp = self.value(probs);
        if target >= tp.len() {
            return Err(Error::IndexOutOfRange {
                what: "class",
                index: target,
                size: tp.len(),
            });
        }
        let y = -(tp.data()[target] + T::of(LOG_EPS)).ln();
        Ok(self.push(
            Op::CrossEntropy { probs, target },
            Tensor::scalar(y),
            &[probs],
        ))
    }

    /// Summed sparse cross-entropy of each row of `[L × V]` against `targets[L]`.
    pub fn nll_rows(&mut self, probs: Var, targets: &[usize]) -> Result<Var> {
        let tp = self.value(probs);
        let (l, v) = tp.as_matrix();
        if targets.len() != l {
            return Err(shape_err("nll_rows", tp.shape(), &[targets.len()]));
        }
        let mut y = T::zero();
        for (r, &t) in targets.iter().enumerate() {
            if t >= v {
                return Err(Error::IndexOutOfRange {
                    what: "token",
                    index: t,
                    size: v,
                });
            }
            y -= (tp.data()[r * v + t] + T::of(LOG_EPS)).ln();
        }
        Ok(self.push(
            Op::NllRows {
                probs,
                targets: targets.to_vec(),
            },
            Tensor::scalar(y),
            &[probs],
        ))
    }

    /// Inverted dropout. Identity when `rng` is `None` (evaluation) or the rate is 0.
    pub fn dropout(&mut self, x: Var, rate: f64, rng: Option<&mut SeededRng>) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::DropoutRate(rate));
        }
        let Some(rng) = rng else { return Ok(x) };
        if rate == 0.0 {
            return Ok(x);
        }
        let keep = T::of(1.0 / (1.0 - rate));
        let n = self.value(x).len();
        let mask: Vec<T> = (0..n)
            .map(|_| if rng.uniform() < rate { T::zero() } else { keep })
            .collect();
        Ok(self.dropout_with_mask(x, mask))
    }

    /// Multiply by a precomputed mask (already including the `1/(1-rate)` scale).
    pub fn dropout_with_mask(&mut self, x: Var, mask: Vec<T>) -> Var {
        let tx = self.value(x);
        assert_eq!(mask.len(), tx.len(), "dropout mask length");
        let data = tx.data().iter().zip(&mask).map(|(&a, &m)| a * m).collect();
        let t = Tensor::new(tx.shape().to_vec(), data).expect("same shape");
        self.push(Op::Dropout { input: x, mask }, t, &[x])
    }

    /// Rows of a 2-D table selected by `indices`.
    pub fn gather(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let tt = self.value(table);
        let (rows, cols) = tt.as_matrix();
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            if i >= rows {
                return Err(Error::IndexOutOfRange {
                    what: "embedding row",
                    index: i,
                    size: rows,
                });
            }
            data.extend_from_slice(tt.row(i));
        }
        let t = Tensor::new(vec![indices.len(), cols], data)?;
        Ok(self.push(
            Op::Gather {
                table,
                indices: indices.to_vec(),
            },
            t,
            &[table],
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Op::Sum(a), Tensor::scalar(s), &[a])
    }

    /// Collect scalar nodes into a vector.
    pub fn stack(&mut self, scalars: &[Var]) -> Result<Var> {
        let mut data = Vec::with_capacity(scalars.len());
        for &s in scalars {
            let t = self.value(s);
            if t.len() != 1 {
                return Err(shape_err("stack", t.shape(), &[1]));
            }
            data.push(t.item());
        }
        Ok(self.push(Op::Stack(scalars.to_vec()), Tensor::vector(data), scalars))
    }

    /// Sum of scalar nodes.
    pub fn add_scalars(&mut self, scalars: &[Var]) -> Result<Var> {
        let v = self.stack(scalars)?;
        Ok(self.sum(v))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("dot", ta.shape(), tb.shape()));
        }
        let s = ta.data().iter().zip(tb.data()).map(|(&x, &y)| x * y).sum();
        Ok(self.push(Op::Dot(a, b), Tensor::scalar(s), &[a, b]))
    }

    /// Reparameterised sample `mu + exp(logvar / 2) ⊙ eps` with the noise held fixed.
    pub fn gaussian_sample_with(&mut self, mu: Var, logvar: Var, eps: Vec<T>) -> Result<Var> {
        let (tm, tl) = (self.value(mu), self.value(logvar));
        if tm.shape() != tl.shape() || eps.len() != tm.len() {
            return Err(shape_err("gaussian_sample", tm.shape(), tl.shape()));
        }
        let half = T::of(0.5);
        let data = tm
            .data()
            .iter()
            .zip(tl.data())
            .zip(&eps)
            .map(|((&m, &lv), &e)| m + (half * lv).exp() * e)
            .collect();
        let t = Tensor::new(tm.shape().to_vec(), data)?;
        Ok(self.push(Op::GaussianSample { mu, logvar, eps }, t, &[mu, logvar]))
    }

    /// Reparameterised sample with `eps ~ N(0, I)` drawn from `rng`.
    pub fn gaussian_sample(&mut self, mu: Var, logvar: Var, rng: &mut SeededRng) -> Result<Var> {
        let n = self.value(mu).len();
        let eps = (0..n).map(|_| T::of(rng.normal())).collect();
        self.gaussian_sample_with(mu, logvar, eps)
    }

    /// Closed-form `KL(N(mu, exp(logvar)) ‖ N(0, I))`.
    pub fn kl_gaussian(&mut self, mu: Var, logvar: Var) -> Result<Var> {
        let (tm, tl) = (self.value(mu), self.value(logvar));
        if tm.shape() != tl.shape() {
            return Err(shape_err("kl_gaussian", tm.shape(), tl.shape()));
        }
        let kl = kl_gaussian_value(tm.data(), tl.data());
        Ok(self.push(Op::KlGaussian { mu, logvar }, Tensor::scalar(kl), &[mu, logvar]))
    }

    /// Shannon entropy `-Σ p ln(p + ε)` of a probability vector.
    pub fn entropy(&mut self, probs: Var) -> Var {
        let eps = T::of(LOG_EPS);
        let h = -self
            .value(probs)
            .data()
            .iter()
            .map(|&p| p * (p + eps).ln())
            .sum::<T>();
        self.push(Op::Entropy(probs), Tensor::scalar(h), &[probs])
    }

    /// Back-propagate from a scalar `loss`. May run once per record.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        if self.consumed {
            return Err(Error::DoubleBackward);
        }
        let shape = self.value(loss).shape().to_vec();
        if shape.iter().product::<usize>() != 1 {
            return Err(Error::NonScalarLoss(shape));
        }
        self.consumed = true;
        let mut out = Gradients::empty(self.params.len());
        let mut grads: Vec<Option<Tensor<T>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(Tensor::filled(&shape, T::one()));

        for i in (0..=loss.0).rev() {
            let Some(dy) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.backward_node(i, &dy, &mut grads, &mut out)?;
        }
        Ok(out)
    }

    fn backward_node(
        &self,
        i: usize,
        dy: &Tensor<T>,
        grads: &mut [Option<Tensor<T>>],
        out: &mut Gradients<T>,
    ) -> Result<()> {
        let node = &self.nodes[i];
        let y = || node.value.as_ref().expect("op node value");
        // Gradient buffer for `v`, or None when nothing upstream needs it.
        macro_rules! slot {
            ($v:expr) => {{
                let v: Var = $v;
                if self.nodes[v.0].requires_grad {
                    let shape = self.value(v).shape();
                    Some(grads[v.0].get_or_insert_with(|| Tensor::zeros(shape)))
                } else {
                    None
                }
            }};
        }
        match &node.op {
            Op::Constant => {}
            Op::Param(id) => {
                out.slot(*id, dy.shape()).add_assign(dy);
            }
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k) = ta.as_matrix();
                let n = tb.shape()[1];
                if let Some(da) = slot!(*a) {
                    gemm_nt_acc(dy.data(), tb.data(), da.data_mut(), m, n, k);
                }
                if let Some(db) = slot!(*b) {
                    gemm_tn_acc(ta.data(), dy.data(), db.data_mut(), m, k, n);
                }
            }
            Op::Add(a, b) => {
                if let Some(da) = slot!(*a) {
                    da.add_assign(dy);
                }
                if let Some(db) = slot!(*b) {
                    db.add_assign(dy);
                }
            }
            Op::AddBias(a, b) => {
                if let Some(da) = slot!(*a) {
                    da.add_assign(dy);
                }
                if let Some(db) = slot!(*b) {
                    let n = db.len();
                    for row in dy.data().chunks(n) {
                        for (g, &d) in db.data_mut().iter_mut().zip(row) {
                            *g += d;
                        }
                    }
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if let Some(da) = slot!(*a) {
                    for ((g, &d), &x) in da.data_mut().iter_mut().zip(dy.data()).zip(tb.data()) {
                        *g += d * x;
                    }
                }
                if let Some(db) = slot!(*b) {
                    for ((g, &d), &x) in db.data_mut().iter_mut().zip(dy.data()).zip(ta.data()) {
                        *g += d * x;
                    }
                }
            }
            Op::Scale(a, c) => {
                if let Some(da) = slot!(*a) {
                    for (g, &d) in da.data_mut().iter_mut().zip(dy.data()) {
                        *g += *c * d;
                    }
                }
            }
            Op::Act(a, kind) => {
                if let Some(da) = slot!(*a) {
                    for ((g, &d), &yv) in da.data_mut().iter_mut().zip(dy.data()).zip(y().data()) {
                        *g += d * kind.derivative_from_output(yv);
                    }
                }
            }
            Op::Exp(a) => {
                if let Some(da) = slot!(*a) {
                    for ((g, &d), &yv) in da.data_mut().iter_mut().zip(dy.data()).zip(y().data()) {
                        *g += d * yv;
                    }
                }
            }
            Op::Conv1d {
                input,
                filters,
                bias,
                pad_left,
            } => {
                let (ti, tf) = (self.value(*input), self.value(*filters));
                let (m, d) = (ti.shape()[0], ti.shape()[1]);
                let (w, nf) = (tf.shape()[0], tf.shape()[2]);
                let out_len = dy.shape()[0];
                let pad_left = *pad_left;
                if let Some(db) = slot!(*bias) {
                    for row in dy.data().chunks(nf) {
                        for (g, &dv) in db.data_mut().iter_mut().zip(row) {
                            *g += dv;
                        }
                    }
                }
                let ranges: Vec<(usize, usize)> = (0..w)
                    .map(|k| {
                        let lo = pad_left.saturating_sub(k);
                        let hi = (m + pad_left).saturating_sub(k).min(out_len);
                        (lo, hi)
                    })
                    .collect();
                if let Some(df) = slot!(*filters) {
                    for (k, &(lo, hi)) in ranges.iter().enumerate() {
                        if lo >= hi {
                            continue;
                        }
                        let src = lo + k - pad_left;
                        // dF[k] += X[src..]ᵀ · dY[lo..hi]
                        gemm_tn_acc(
                            &ti.data()[src * d..(src + hi - lo) * d],
                            &dy.data()[lo * nf..hi * nf],
                            &mut df.data_mut()[k * d * nf..(k + 1) * d * nf],
                            hi - lo,
                            d,
                            nf,
                        );
                    }
                }
                if let Some(di) = slot!(*input) {
                    for (k, &(lo, hi)) in ranges.iter().enumerate() {
                        if lo >= hi {
                            continue;
                        }
                        let src = lo + k - pad_left;
                        // dX[src..] += dY[lo..hi] · F[k]ᵀ
                        gemm_nt_acc(
                            &dy.data()[lo * nf..hi * nf],
                            &tf.data()[k * d * nf..(k + 1) * d * nf],
                            &mut di.data_mut()[src * d..(src + hi - lo) * d],
                            hi - lo,
                            nf,
                            d,
                        );
                    }
                }
            }
            Op::MaxPoolTime { input, argmax } => {
                if let Some(di) = slot!(*input) {
                    let n = argmax.len();
                    for (f, &t) in argmax.iter().enumerate() {
                        di.data_mut()[t * n + f] += dy.data()[f];
                    }
                }
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    if let Some(dp) = slot!(p) {
                        for (g, &d) in dp.data_mut().iter_mut().zip(&dy.data()[off..off + n]) {
                            *g += d;
                        }
                    }
                    off += n;
                }
            }
            Op::ConcatCols(parts) => {
                let total = dy.shape()[1];
                let mut off = 0;
                for &p in parts {
                    let (rows, cols) = self.value(p).as_matrix();
                    if let Some(dp) = slot!(p) {
                        for r in 0..rows {
                            let src = &dy.data()[r * total + off..r * total + off + cols];
                            for (g, &d) in dp.row_mut(r).iter_mut().zip(src) {
                                *g += d;
                            }
                        }
                    }
                    off += cols;
                }
            }
            Op::Reshape(a) => {
                if let Some(da) = slot!(*a) {
                    for (g, &d) in da.data_mut().iter_mut().zip(dy.data()) {
                        *g += d;
                    }
                }
            }
            Op::Row(a, index) => {
                if let Some(da) = slot!(*a) {
                    for (g, &d) in da.row_mut(*index).iter_mut().zip(dy.data()) {
                        *g += d;
                    }
                }
            }
            Op::Softmax(a) => {
                if let Some(da) = slot!(*a) {
                    let (_, n) = y().as_matrix();
                    for ((grow, drow), yrow) in da
                        .data_mut()
                        .chunks_mut(n)
                        .zip(dy.data().chunks(n))
                        .zip(y().data().chunks(n))
                    {
                        let dot: T = drow.iter().zip(yrow).map(|(&d, &p)| d * p).sum();
                        for ((g, &d), &p) in grow.iter_mut().zip(drow).zip(yrow) {
                            *g += p * (d - dot);
                        }
                    }
                }
            }
            Op::CrossEntropy { probs, target } => {
                let p = self.value(*probs).data()[*target];
                if let Some(dp) = slot!(*probs) {
                    dp.data_mut()[*target] -= dy.item() / (p + T::of(LOG_EPS));
                }
            }
            Op::NllRows { probs, targets } => {
                let tp = self.value(*probs);
                let (_, v) = tp.as_matrix();
                let scale = dy.item();
                if let Some(dp) = slot!(*probs) {
                    for (r, &t) in targets.iter().enumerate() {
                        let p = tp.data()[r * v + t];
                        dp.data_mut()[r * v + t] -= scale / (p + T::of(LOG_EPS));
                    }
                }
            }
            Op::Dropout { input, mask } => {
                if let Some(di) = slot!(*input) {
                    for ((g, &d), &m) in di.data_mut().iter_mut().zip(dy.data()).zip(mask) {
                        *g += d * m;
                    }
                }
            }
            Op::Gather { table, indices } => {
                if let Some(dt) = slot!(*table) {
                    for (r, &i) in indices.iter().enumerate() {
                        for (g, &d) in dt.row_mut(i).iter_mut().zip(dy.row(r)) {
                            *g += d;
                        }
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(da) = slot!(*a) {
                    let d = dy.item();
                    da.data_mut().iter_mut().for_each(|g| *g += d);
                }
            }
            Op::Stack(parts) => {
                for (k, &p) in parts.iter().enumerate() {
                    if let Some(dp) = slot!(p) {
                        dp.data_mut()[0] += dy.data()[k];
                    }
                }
            }
            Op::Dot(a, b) => {
                let d = dy.item();
                let (ta, tb) = (self.value(*a), self.value(*b));
                if let Some(da) = slot!(*a) {
                    for (g, &x) in da.data_mut().iter_mut().zip(tb.data()) {
                        *g += d * x;
                    }
                }
                if let Some(db) = slot!(*b) {
                    for (g, &x) in db.data_mut().iter_mut().zip(ta.data()) {
                        *g += d * x;
                    }
                }
            }
            Op::GaussianSample { mu, logvar, eps } => {
                if let Some(dm) = slot!(*mu) {
                    dm.add_assign(dy);
                }
                let tl = self.value(*logvar);
                let half = T::of(0.5);
                let sig: Vec<T> = tl.data().iter().map(|&lv| (half * lv).exp()).collect();
                if let Some(dl) = slot!(*logvar) {
                    for (((g, &d), &e), &s) in dl.data_mut().iter_mut().zip(dy.data()).zip(eps).zip(&sig) {
                        *g += d * e * half * s;
                    }
                }
            }
            Op::KlGaussian { mu, logvar } => {
                let d = dy.item();
                let (tm, tl) = (self.value(*mu), self.value(*logvar));
                if let Some(dm) = slot!(*mu) {
                    for (g, &m) in dm.data_mut().iter_mut().zip(tm.data()) {
                        *g += d * m;
                    }
                }
                if let Some(dl) = slot!(*logvar) {
                    let half = T::of(0.5);
                    for (g, &lv) in dl.data_mut().iter_mut().zip(tl.data()) {
                        *g += d * half * (lv.exp() - T::one());
                    }
                }
            }
            Op::Entropy(probs) => {
                let d = dy.item();
                let eps = T::of(LOG_EPS);
                let tp = self.value(*probs);
                if let Some(dp) = slot!(*probs) {
                    for (g, &p) in dp.data_mut().iter_mut().zip(tp.data()) {
                        *g -= d * ((p + eps).ln() + p / (p + eps));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `-½ Σ (1 + logvar − mu² − exp(logvar))`, evaluated per dimension as
/// `½ (mu² + expm1(logvar) − logvar)` so round-off cannot make it negative.
pub fn kl_gaussian_value<T: Real>(mu: &[T], logvar: &[T]) -> T {
    let half = T::of(0.5);
    half * mu
        .iter()
        .zip(logvar)
        .map(|(&m, &lv)| m * m + (lv.exp_m1() - lv).max(T::zero()))
        .sum::<T>()
}
