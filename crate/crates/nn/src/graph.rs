//! Tape-based reverse-mode automatic differentiation over rank-2 tensors.
//!
//! A [`Graph`] records every op of one forward pass in topological order.
//! [`Graph::backward`] walks the tape in exact reverse order and accumulates
//! gradients additively wherever a value fans out. Reductions are plain
//! sequential loops, so results are bitwise reproducible.

use crate::error::{NnError, Result};
use crate::tensor::{gemm_nn, gemm_nt, gemm_tn, Scalar, Tensor};

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    Same,
    Row,
    Col,
    Scalar,
}

impl Broadcast {
    #[inline]
    fn index(self, i: usize, j: usize, cols: usize) -> usize {
        match self {
            Broadcast::Same => i * cols + j,
            Broadcast::Row => j,
            Broadcast::Col => i,
            Broadcast::Scalar => 0,
        }
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var, Broadcast),
    Sub(Var, Var, Broadcast),
    Mul(Var, Var, Broadcast),
    Scale(Var, T),
    Shift(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Silu(Var),
    ClampMin(Var, T),
    Sum(Var),
    Mean(Var),
    SumCols(Var),
    Softmax(Var),
    LogSumExp(Var),
    LayerNorm(Var, Vec<T>),
    Concat(Vec<Var>, usize),
    Slice { x: Var, axis: usize, start: usize },
    Reshape(Var),
    Transpose(Var),
    RepeatRows(Var, usize),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    tracked: bool,
}

/// Record of one forward pass.
#[derive(Debug, Clone, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn matrix_dims<T: Scalar>(op: &'static str, t: &Tensor<T>) -> Result<(usize, usize)> {
    if !t.is_matrix() {
        return Err(NnError::Shape {
            op,
            lhs: t.shape().to_vec(),
            rhs: vec![],
        });
    }
    Ok((t.shape()[0], t.shape()[1]))
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// A leaf that receives a gradient.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn dims(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        matrix_dims(op, &self.nodes[v.0].value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims("matmul", a)?;
        let (k2, n) = self.dims("matmul", b)?;
        if k != k2 {
            return Err(NnError::Shape {
                op: "matmul",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let mut out = vec![T::zero(); m * n];
        gemm_nn(
            self.value(a).data(),
            self.value(b).data(),
            &mut out,
            m,
            k,
            n,
        );
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), tracked))
    }

    fn broadcast_kind(&self, op: &'static str, a: Var, b: Var) -> Result<Broadcast> {
        let (m, n) = self.dims(op, a)?;
        let (bm, bn) = self.dims(op, b)?;
        let kind = match (bm, bn) {
            _ if bm == m && bn == n => Broadcast::Same,
            (1, 1) => Broadcast::Scalar,
            (1, c) if c == n => Broadcast::Row,
            (r, 1) if r == m => Broadcast::Col,
            _ => {
                return Err(NnError::Shape {
                    op,
                    lhs: vec![m, n],
                    rhs: vec![bm, bn],
                })
            }
        };
        Ok(kind)
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
        mk: impl FnOnce(Var, Var, Broadcast) -> Op<T>,
    ) -> Result<Var> {
        let kind = self.broadcast_kind(name, a, b)?;
        let (m, n) = self.dims(name, a)?;
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                out.push(f(av[i * n + j], bv[kind.index(i, j, n)]));
            }
        }
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(Tensor::matrix(m, n, out)?, mk(a, b, kind), tracked))
    }

    /// Elementwise `a + b`; `b` may broadcast as `[1,n]`, `[m,1]` or `[1,1]`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul)
    }

    fn unary(&mut self, a: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let value = self.value(a).map(f);
        let tracked = self.tracked(a);
        self.push(value, op, tracked)
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        self.unary(a, |x| x * c, Op::Scale(a, c))
    }

    /// `a + c` for a constant `c`.
    pub fn shift(&mut self, a: Var, c: T) -> Var {
        self.unary(a, |x| x + c, Op::Shift(a))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -T::one())
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.exp(), Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.ln(), Op::Log(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.tanh(), Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(T::zero()), Op::Relu(a))
    }

    pub fn silu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * sigmoid(x), Op::Silu(a))
    }

    /// `max(a, floor)`; the gradient is zero where the floor is active.
    pub fn clamp_min(&mut self, a: Var, floor: T) -> Var {
        self.unary(a, |x| x.max(floor), Op::ClampMin(a, floor))
    }

    /// Sum of all elements as a `[1,1]` tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().fold(T::zero(), |acc, &v| acc + v);
        let tracked = self.tracked(a);
        self.push(Tensor::scalar(s), Op::Sum(a), tracked)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let n = T::of(t.len() as f64);
        let s = t.data().iter().fold(T::zero(), |acc, &v| acc + v) / n;
        let tracked = self.tracked(a);
        self.push(Tensor::scalar(s), Op::Mean(a), tracked)
    }

    /// Row sums: `[m,n] -> [m,1]`.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims("sum_cols", a)?;
        let data = self.value(a).data();
        let out = (0..m)
            .map(|i| data[i * n..(i + 1) * n].iter().fold(T::zero(), |acc, &v| acc + v))
            .collect();
        let tracked = self.tracked(a);
        Ok(self.push(Tensor::matrix(m, 1, out)?, Op::SumCols(a), tracked))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims("softmax", a)?;
        let data = self.value(a).data();
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let row = &data[i * n..(i + 1) * n];
            let lse = log_sum_exp(row);
            for j in 0..n {
                out[i * n + j] = (row[j] - lse).exp();
            }
        }
        let tracked = self.tracked(a);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::Softmax(a), tracked))
    }

    /// Row-wise `log Σ exp`: `[m,n] -> [m,1]`.
    pub fn log_sum_exp(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims("log_sum_exp", a)?;
        let data = self.value(a).data();
        let out = (0..m).map(|i| log_sum_exp(&data[i * n..(i + 1) * n])).collect();
        let tracked = self.tracked(a);
        Ok(self.push(Tensor::matrix(m, 1, out)?, Op::LogSumExp(a), tracked))
    }

    /// Row-wise normalization to zero mean and unit variance (no affine).
    pub fn layer_norm(&mut self, a: Var, eps: T) -> Result<Var> {
        let (m, n) = self.dims("layer_norm", a)?;
        let data = self.value(a).data();
        let nf = T::of(n as f64);
        let mut out = vec![T::zero(); m * n];
        let mut rstds = Vec::with_capacity(m);
        for i in 0..m {
            let row = &data[i * n..(i + 1) * n];
            let mu = row.iter().fold(T::zero(), |acc, &v| acc + v) / nf;
            let var = row
                .iter()
                .fold(T::zero(), |acc, &v| acc + (v - mu) * (v - mu))
                / nf;
            let rstd = T::one() / (var + eps).sqrt();
            for j in 0..n {
                out[i * n + j] = (row[j] - mu) * rstd;
            }
            rstds.push(rstd);
        }
        let tracked = self.tracked(a);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::LayerNorm(a, rstds), tracked))
    }

    /// Concatenate along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        if parts.is_empty() || axis > 1 {
            return Err(NnError::Contract(format!(
                "concat needs at least one part and axis 0 or 1 (got {} parts, axis {axis})",
                parts.len()
            )));
        }
        let (m0, n0) = self.dims("concat", parts[0])?;
        let mut dims = Vec::with_capacity(parts.len());
        for &p in parts {
            let (m, n) = self.dims("concat", p)?;
            let ok = if axis == 0 { n == n0 } else { m == m0 };
            if !ok {
                return Err(NnError::Shape {
                    op: "concat",
                    lhs: vec![m0, n0],
                    rhs: vec![m, n],
                });
            }
            dims.push((m, n));
        }
        let (m, n, data) = if axis == 0 {
            let m: usize = dims.iter().map(|d| d.0).sum();
            let mut data = Vec::with_capacity(m * n0);
            for &p in parts {
                data.extend_from_slice(self.value(p).data());
            }
            (m, n0, data)
        } else {
            let n: usize = dims.iter().map(|d| d.1).sum();
            let mut data = Vec::with_capacity(m0 * n);
            for i in 0..m0 {
                for (&p, &(_, pn)) in parts.iter().zip(&dims) {
                    data.extend_from_slice(&self.value(p).data()[i * pn..(i + 1) * pn]);
                }
            }
            (m0, n, data)
        };
        let tracked = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(
            Tensor::matrix(m, n, data)?,
            Op::Concat(parts.to_vec(), axis),
            tracked,
        ))
    }

    /// `len` rows (axis 0) or columns (axis 1) starting at `start`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let (m, n) = self.dims("slice", a)?;
        let extent = if axis == 0 { m } else { n };
        if axis > 1 || start + len > extent || len == 0 {
            return Err(NnError::Shape {
                op: "slice",
                lhs: vec![m, n],
                rhs: vec![axis, start, len],
            });
        }
        let data = self.value(a).data();
        let (rm, rn, out) = if axis == 0 {
            (len, n, data[start * n..(start + len) * n].to_vec())
        } else {
            let mut out = Vec::with_capacity(m * len);
            for i in 0..m {
                out.extend_from_slice(&data[i * n + start..i * n + start + len]);
            }
            (m, len, out)
        };
        let tracked = self.tracked(a);
        Ok(self.push(
            Tensor::matrix(rm, rn, out)?,
            Op::Slice { x: a, axis, start },
            tracked,
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshaped(shape)?;
        let tracked = self.tracked(a);
        Ok(self.push(value, Op::Reshape(a), tracked))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims("transpose", a)?;
        let data = self.value(a).data();
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = data[i * n + j];
            }
        }
        let tracked = self.tracked(a);
        Ok(self.push(Tensor::matrix(n, m, out)?, Op::Transpose(a), tracked))
    }

    /// Repeat each row `times` times consecutively: `[m,n] -> [m·times, n]`.
    pub fn repeat_rows(&mut self, a: Var, times: usize) -> Result<Var> {
        let (m, n) = self.dims("repeat_rows", a)?;
        if times == 0 {
            return Err(NnError::Contract("repeat_rows with times = 0".into()));
        }
        let data = self.value(a).data();
        let mut out = Vec::with_capacity(m * n * times);
        for i in 0..m {
            for _ in 0..times {
                out.extend_from_slice(&data[i * n..(i + 1) * n]);
            }
        }
        let tracked = self.tracked(a);
        Ok(self.push(
            Tensor::matrix(m * times, n, out)?,
            Op::RepeatRows(a, times),
            tracked,
        ))
    }

    /// Reverse pass from a scalar `[1,1]` output.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let shape = self.shape(loss);
        if shape.iter().product::<usize>() != 1 {
            return Err(NnError::Contract(format!(
                "backward needs a scalar output, got shape {shape:?}"
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(shape, T::one()));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.backprop_node(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, contrib: Tensor<T>) {
        if !self.tracked(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&contrib),
            slot @ None => *slot = Some(contrib),
        }
    }

    /// Gradient buffer for `v`, created zeroed on first use.
    fn grad_slot<'a>(&self, grads: &'a mut [Option<Tensor<T>>], v: Var) -> &'a mut Tensor<T> {
        let shape = self.shape(v).to_vec();
        grads[v.0].get_or_insert_with(|| Tensor::zeros(&shape))
    }

    fn backprop_node(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let gd = g.data();
        let y = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                let (m, k) = (av.shape()[0], av.shape()[1]);
                let n = bv.shape()[1];
                if self.tracked(*a) {
                    let ga = self.grad_slot(grads, *a);
                    gemm_nt(gd, bv.data(), ga.data_mut(), m, k, n);
                }
                if self.tracked(*b) {
                    let gb = self.grad_slot(grads, *b);
                    gemm_tn(av.data(), gd, gb.data_mut(), m, k, n);
                }
            }
            Op::Add(a, b, kind) | Op::Sub(a, b, kind) | Op::Mul(a, b, kind) => {
                let (m, n) = (g.shape()[0], g.shape()[1]);
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                let is_sub = matches!(node.op, Op::Sub(..));
                let is_mul = matches!(node.op, Op::Mul(..));
                if self.tracked(*a) {
                    let ga: Vec<T> = if is_mul {
                        (0..m * n)
                            .map(|e| gd[e] * bv[kind.index(e / n, e % n, n)])
                            .collect()
                    } else {
                        gd.to_vec()
                    };
                    self.accumulate(grads, *a, Tensor::matrix(m, n, ga).expect("shape"));
                }
                if self.tracked(*b) {
                    let gb = self.grad_slot(grads, *b);
                    let gbd = gb.data_mut();
                    for i in 0..m {
                        for j in 0..n {
                            let e = i * n + j;
                            let contrib = if is_mul {
                                gd[e] * av[e]
                            } else if is_sub {
                                -gd[e]
                            } else {
                                gd[e]
                            };
                            let t = kind.index(i, j, n);
                            gbd[t] = gbd[t] + contrib;
                        }
                    }
                }
            }
            Op::Scale(a, c) => {
                let c = *c;
                self.accumulate(grads, *a, g.map(|v| v * c));
            }
            Op::Shift(a) | Op::Reshape(a) => {
                let shape = self.shape(*a).to_vec();
                let t = g.clone().reshaped(&shape).expect("shape");
                self.accumulate(grads, *a, t);
            }
            Op::Exp(a) => self.pointwise(grads, *a, g, |gv, _, yv| gv * yv, y),
            Op::Log(a) => self.pointwise(grads, *a, g, |gv, xv, _| gv / xv, y),
            Op::Square(a) => self.pointwise(grads, *a, g, |gv, xv, _| gv * (xv + xv), y),
            Op::Sigmoid(a) => {
                self.pointwise(grads, *a, g, |gv, _, yv| gv * yv * (T::one() - yv), y)
            }
            Op::Tanh(a) => self.pointwise(grads, *a, g, |gv, _, yv| gv * (T::one() - yv * yv), y),
            Op::Relu(a) => self.pointwise(
                grads,
                *a,
                g,
                |gv, xv, _| if xv > T::zero() { gv } else { T::zero() },
                y,
            ),
            Op::Silu(a) => self.pointwise(
                grads,
                *a,
                g,
                |gv, xv, _| {
                    let s = sigmoid(xv);
                    gv * (s + xv * s * (T::one() - s))
                },
                y,
            ),
            Op::ClampMin(a, floor) => {
                let floor = *floor;
                self.pointwise(
                    grads,
                    *a,
                    g,
                    |gv, xv, _| if xv >= floor { gv } else { T::zero() },
                    y,
                )
            }
            Op::Sum(a) | Op::Mean(a) => {
                let shape = self.shape(*a).to_vec();
                let n: usize = shape.iter().product();
                let mut gv = gd[0];
                if matches!(node.op, Op::Mean(_)) {
                    gv = gv / T::of(n as f64);
                }
                self.accumulate(grads, *a, Tensor::full(&shape, gv));
            }
            Op::SumCols(a) => {
                let shape = self.shape(*a).to_vec();
                let n = shape[1];
                let data = (0..shape[0] * n).map(|e| gd[e / n]).collect();
                self.accumulate(grads, *a, Tensor::new(shape, data).expect("shape"));
            }
            Op::Softmax(a) => {
                let (m, n) = (g.shape()[0], g.shape()[1]);
                let mut out = vec![T::zero(); m * n];
                for i in 0..m {
                    let dot = (0..n).fold(T::zero(), |acc, j| acc + gd[i * n + j] * y[i * n + j]);
                    for j in 0..n {
                        out[i * n + j] = y[i * n + j] * (gd[i * n + j] - dot);
                    }
                }
                self.accumulate(grads, *a, Tensor::matrix(m, n, out).expect("shape"));
            }
            Op::LogSumExp(a) => {
                let xv = self.value(*a);
                let (m, n) = (xv.shape()[0], xv.shape()[1]);
                let x = xv.data();
                let out = (0..m * n)
                    .map(|e| gd[e / n] * (x[e] - y[e / n]).exp())
                    .collect();
                self.accumulate(grads, *a, Tensor::matrix(m, n, out).expect("shape"));
            }
            Op::LayerNorm(a, rstds) => {
                let (m, n) = (g.shape()[0], g.shape()[1]);
                let nf = T::of(n as f64);
                let mut out = vec![T::zero(); m * n];
                for i in 0..m {
                    let gr = &gd[i * n..(i + 1) * n];
                    let yr = &y[i * n..(i + 1) * n];
                    let mg = gr.iter().fold(T::zero(), |acc, &v| acc + v) / nf;
                    let mgy = gr
                        .iter()
                        .zip(yr)
                        .fold(T::zero(), |acc, (&gv, &yv)| acc + gv * yv)
                        / nf;
                    for j in 0..n {
                        out[i * n + j] = rstds[i] * (gr[j] - mg - yr[j] * mgy);
                    }
                }
                self.accumulate(grads, *a, Tensor::matrix(m, n, out).expect("shape"));
            }
            Op::Concat(parts, axis) => {
                let (m, n) = (g.shape()[0], g.shape()[1]);
                let mut offset = 0;
                for &p in parts {
                    let (pm, pn) = (self.shape(p)[0], self.shape(p)[1]);
                    if self.tracked(p) {
                        let data = if *axis == 0 {
                            gd[offset * n..(offset + pm) * n].to_vec()
                        } else {
                            let mut d = Vec::with_capacity(pm * pn);
                            for i in 0..m {
                                d.extend_from_slice(&gd[i * n + offset..i * n + offset + pn]);
                            }
                            d
                        };
                        self.accumulate(grads, p, Tensor::matrix(pm, pn, data).expect("shape"));
                    }
                    offset += if *axis == 0 { pm } else { pn };
                }
            }
            Op::Slice { x, axis, start } => {
                let (sm, sn) = (g.shape()[0], g.shape()[1]);
                let n = self.shape(*x)[1];
                let gx = self.grad_slot(grads, *x);
                let gxd = gx.data_mut();
                for i in 0..sm {
                    for j in 0..sn {
                        let e = if *axis == 0 {
                            (start + i) * n + j
                        } else {
                            i * n + start + j
                        };
                        gxd[e] = gxd[e] + gd[i * sn + j];
                    }
                }
            }
            Op::Transpose(a) => {
                let (m, n) = (g.shape()[0], g.shape()[1]);
                let mut out = vec![T::zero(); m * n];
                for i in 0..m {
                    for j in 0..n {
                        out[j * m + i] = gd[i * n + j];
                    }
                }
                self.accumulate(grads, *a, Tensor::matrix(n, m, out).expect("shape"));
            }
            Op::RepeatRows(a, times) => {
                let (m, n) = (self.shape(*a)[0], self.shape(*a)[1]);
                let mut out = vec![T::zero(); m * n];
                for i in 0..m {
                    for r in 0..*times {
                        let src = (i * times + r) * n;
                        for j in 0..n {
                            out[i * n + j] = out[i * n + j] + gd[src + j];
                        }
                    }
                }
                self.accumulate(grads, *a, Tensor::matrix(m, n, out).expect("shape"));
            }
        }
    }

    fn pointwise(
        &self,
        grads: &mut [Option<Tensor<T>>],
        a: Var,
        g: &Tensor<T>,
        f: impl Fn(T, T, T) -> T,
        y: &[T],
    ) {
        if !self.tracked(a) {
            return;
        }
        let x = self.value(a).data();
        let gx = self.grad_slot(grads, a);
        for (e, o) in gx.data_mut().iter_mut().enumerate() {
            *o = *o + f(g.data()[e], x[e], y[e]);
        }
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable `log Σ exp(xs)`.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let m = xs.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    if !m.is_finite() {
        return m;
    }
    let s = xs.iter().fold(T::zero(), |acc, &v| acc + (v - m).exp());
    m + s.ln()
}
