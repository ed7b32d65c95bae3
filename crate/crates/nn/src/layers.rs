//! Parameterized building blocks. Each layer only stores [`ParamId`]s; the
//! forward pass takes the `Var`s that [`ParamStore::bind`] produced for the
//! current graph.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let bound = 1.0 / (fan_in as f32).sqrt();
        let w = store.add_uniform(format!("{name}.w"), &[fan_in, fan_out], bound, rng)?;
        let b = store.add_uniform(format!("{name}.b"), &[1, fan_out], bound, rng)?;
        Ok(Self {
            w,
            b,
            fan_in,
            fan_out,
        })
    }

    /// Same as [`Linear::new`] but with all-zero weights and bias.
    pub fn zeroed(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize) -> Result<Self> {
        let w = store.add(format!("{name}.w"), Tensor::zeros(&[fan_in, fan_out]))?;
        let b = store.add(format!("{name}.b"), Tensor::zeros(&[1, fan_out]))?;
        Ok(Self {
            w,
            b,
            fan_in,
            fan_out,
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, pv: &[Var], x: Var) -> Result<Var> {
        let h = g.matmul(x, pv[self.w.0])?;
        g.add(h, pv[self.b.0])
    }
}

/// Linear layers with SiLU between them (none after the last).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, sizes: &[usize], rng: &mut R) -> Result<Self> {
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, pv: &[Var], x: Var) -> Result<Var> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(g, pv, h)?;
            if i + 1 < self.layers.len() {
                h = g.silu(h);
            }
        }
        Ok(h)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map(|l| l.fan_out).unwrap_or(0)
    }
}

/// Row-wise layer norm with learned gain and bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Result<Self> {
        let gain = store.add(format!("{name}.gain"), Tensor::full(&[1, dim], 1.0))?;
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[1, dim]))?;
        Ok(Self { gain, bias })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, pv: &[Var], x: Var) -> Result<Var> {
        let n = g.layer_norm(x, T::of(1e-5))?;
        let s = g.mul(n, pv[self.gain.0])?;
        g.add(s, pv[self.bias.0])
    }
}

/// Single LSTM cell with gate order `[input, forget, cell, output]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmCell {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let bound = 1.0 / (hidden as f32).sqrt();
        let w_ih = store.add_uniform(format!("{name}.w_ih"), &[input, 4 * hidden], bound, rng)?;
        let w_hh = store.add_uniform(format!("{name}.w_hh"), &[hidden, 4 * hidden], bound, rng)?;
        // Forget-gate bias starts at 1.
        let mut b = vec![0.0f32; 4 * hidden];
        b[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        let bias = store.add(format!("{name}.bias"), Tensor::row(b))?;
        Ok(Self {
            w_ih,
            w_hh,
            bias,
            input,
            hidden,
        })
    }

    /// One step; returns the new `(h, c)`.
    pub fn step<T: Scalar>(&self, g: &mut Graph<T>, pv: &[Var], x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let hs = self.hidden;
        let xi = g.matmul(x, pv[self.w_ih.0])?;
        let hh = g.matmul(h, pv[self.w_hh.0])?;
        let z = g.add(xi, hh)?;
        let z = g.add(z, pv[self.bias.0])?;
        let i = g.slice(z, 1, 0, hs)?;
        let f = g.slice(z, 1, hs, hs)?;
        let cc = g.slice(z, 1, 2 * hs, hs)?;
        let o = g.slice(z, 1, 3 * hs, hs)?;
        let i = g.sigmoid(i);
        let f = g.sigmoid(f);
        let cc = g.tanh(cc);
        let o = g.sigmoid(o);
        let keep = g.mul(f, c)?;
        let write = g.mul(i, cc)?;
        let c_next = g.add(keep, write)?;
        let tc = g.tanh(c_next);
        let h_next = g.mul(o, tc)?;
        Ok((h_next, c_next))
    }
}

/// Expected 2-D location per keypoint channel.
///
/// `saliency` is `[batch·positions, channels]` (positions of one item are
/// contiguous); `coords` is the constant `[positions, 2]` grid. Returns
/// `[batch, 2·channels]` laid out as `[x₀ … x_{C−1}, y₀ … y_{C−1}]`.
pub fn spatial_softmax<T: Scalar>(g: &mut Graph<T>, saliency: Var, batch: usize, coords: Var) -> Result<Var> {
    let (rows, channels) = (g.shape(saliency)[0], g.shape(saliency)[1]);
    let positions = rows / batch;
    let t = g.transpose(saliency)?; // [C, B·P]
    let t = g.reshape(t, &[channels * batch, positions])?;
    let w = g.softmax(t)?;
    let xy = g.matmul(w, coords)?; // [C·B, 2]
    let xy = g.reshape(xy, &[channels, batch * 2])?;
    let xy = g.transpose(xy)?; // [B·2, C]
    g.reshape(xy, &[batch, 2 * channels])
}
