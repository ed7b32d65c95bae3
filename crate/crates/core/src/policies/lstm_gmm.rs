//! Recurrent Gaussian-mixture policy. An LSTM unrolled over the action
//! horizon reads the observation embedding plus the previous action and
//! emits mixture logits, means and log-stds for the next action.

use std::f64::consts::PI;

use chicgrasp_nn::{log_sum_exp, Graph, Linear, LstmCell, ParamStore, Scalar, Tensor, Var};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::types::ACT_DIM;

use super::batch::Batch;
use super::encoder::{constant, ObsEncoder};
use super::PolicyConfig;

/// Log-stds are clamped from below at this value.
pub const LOG_STD_FLOOR: f64 = -7.0;

/// Component std used at inference when low-noise evaluation is on.
pub const LOW_NOISE_STD: f64 = 1e-4;

/// Mixture over one action: `logits[K]`, `means[K·D]`, `log_stds[K·D]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    pub logits: Vec<f64>,
    pub means: Vec<f64>,
    pub log_stds: Vec<f64>,
}

impl GmmParams {
    pub fn modes(&self) -> usize {
        self.logits.len()
    }

    pub fn dim(&self) -> usize {
        self.means.len() / self.modes()
    }

    /// Mixture weights softmax(logits).
    pub fn weights(&self) -> Vec<f64> {
        let lse = log_sum_exp(&self.logits);
        self.logits.iter().map(|l| (l - lse).exp()).collect()
    }

    pub fn sample(&self, rng: &mut SimRng) -> Vec<f64> {
        let w = self.weights();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = w.len() - 1;
        for (i, wi) in w.iter().enumerate() {
            acc += wi;
            if u < acc {
                k = i;
                break;
            }
        }
        let d = self.dim();
        (0..d)
            .map(|j| {
                let z: f64 = rng.sample(StandardNormal);
                self.means[k * d + j] + self.log_stds[k * d + j].max(LOG_STD_FLOOR).exp() * z
            })
            .collect()
    }
}

/// Negative log-likelihood of `a` under `p` in plain f64 arithmetic.
pub fn gmm_nll(p: &GmmParams, a: &[f64]) -> f64 {
    let d = p.dim();
    let lse_pi = log_sum_exp(&p.logits);
    let terms: Vec<f64> = (0..p.modes())
        .map(|k| {
            let mut lp = p.logits[k] - lse_pi;
            for j in 0..d {
                let ls = p.log_stds[k * d + j].max(LOG_STD_FLOOR);
                let z = (a[j] - p.means[k * d + j]) / ls.exp();
                lp += -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln();
            }
            lp
        })
        .collect();
    -log_sum_exp(&terms)
}

/// Graph form of the mixture NLL: `logits [n,K]`, `means`/`log_stds [n,K·D]`,
/// `target [n,D]` → `[n,1]` per-item NLL. Log-stds must already be clamped.
pub fn gmm_nll_graph<T: Scalar>(
    g: &mut Graph<T>,
    logits: Var,
    means: Var,
    log_stds: Var,
    target: Var,
) -> Result<Var> {
    let n = g.shape(logits)[0];
    let k = g.shape(logits)[1];
    let d = g.shape(target)[1];
    let mu = g.reshape(means, &[n * k, d])?;
    let ls = g.reshape(log_stds, &[n * k, d])?;
    let a = g.repeat_rows(target, k)?;
    let diff = g.sub(a, mu)?;
    let neg_ls = g.neg(ls);
    let inv_std = g.exp(neg_ls);
    let z = g.mul(diff, inv_std)?;
    let z2 = g.square(z);
    let half = g.scale(z2, T::of(-0.5));
    let per = g.sub(half, ls)?;
    let ll = g.sum_cols(per)?; // [n·K, 1]
    let ll = g.shift(ll, T::of(-0.5 * d as f64 * (2.0 * PI).ln()));
    let ll = g.reshape(ll, &[n, k])?;
    let lse = g.log_sum_exp(logits)?;
    let log_w = g.sub(logits, lse)?;
    let joint = g.add(ll, log_w)?;
    let total = g.log_sum_exp(joint)?;
    Ok(g.neg(total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmGmmNet {
    pub encoder: ObsEncoder,
    pub cell: LstmCell,
    pub head: Linear,
    pub modes: usize,
    pub hidden: usize,
    pub horizon: usize,
    #[serde(default)]
    pub low_noise_eval: bool,
}

impl LstmGmmNet {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        cfg: &PolicyConfig,
        image: Option<usize>,
        rng: &mut R,
    ) -> Result<Self> {
        let l = &cfg.lstm_gmm;
        let encoder = ObsEncoder::new(store, cfg, image, rng)?;
        let cell = LstmCell::new(store, "gmm.lstm", encoder.out_dim() + ACT_DIM, l.hidden, rng)?;
        let head = Linear::new(store, "gmm.head", l.hidden, l.modes * (1 + 2 * ACT_DIM), rng)?;
        Ok(Self {
            encoder,
            cell,
            head,
            modes: l.modes,
            hidden: l.hidden,
            horizon: cfg.pred_horizon,
            low_noise_eval: l.low_noise_eval,
        })
    }

    /// Mixture parameters from hidden state `h`: `(logits, means, clamped log_stds)`.
    fn head_out<T: Scalar>(&self, g: &mut Graph<T>, pv: &[Var], h: Var) -> Result<(Var, Var, Var, usize)> {
        let k = self.modes;
        let out = self.head.forward(g, pv, h)?;
        let logits = g.slice(out, 1, 0, k)?;
        let means = g.slice(out, 1, k, k * ACT_DIM)?;
        let raw_ls = g.slice(out, 1, k + k * ACT_DIM, k * ACT_DIM)?;
        let clamped = g
            .value(raw_ls)
            .data()
            .iter()
            .filter(|v| v.as_f64() < LOG_STD_FLOOR)
            .count();
        let ls = g.clamp_min(raw_ls, T::of(LOG_STD_FLOOR));
        Ok((logits, means, ls, clamped))
    }

    /// Mean per-step NLL with teacher forcing, and the number of clamped log-stds.
    pub fn loss<T: Scalar>(&self, g: &mut Graph<T>, pv: &[Var], batch: &Batch) -> Result<(Var, usize)> {
        let n = batch.n;
        let w = self.horizon * ACT_DIM;
        if batch.actions.len() != n * w {
            return Err(Error::Contract("lstm-gmm loss needs full action windows".into()));
        }
        let ctx = self.encoder.forward(g, pv, batch)?;
        let actions = constant(g, n, w, &batch.actions)?;
        let mut h = g.constant(Tensor::zeros(&[n, self.hidden]));
        let mut c = g.constant(Tensor::zeros(&[n, self.hidden]));
        let mut prev = g.constant(Tensor::zeros(&[n, ACT_DIM]));
        let mut total: Option<Var> = None;
        let mut clamped = 0;
        for step in 0..self.horizon {
            let x = g.concat(&[ctx, prev], 1)?;
            (h, c) = self.cell.step(g, pv, x, h, c)?;
            let (logits, means, ls, cl) = self.head_out(g, pv, h)?;
            clamped += cl;
            let target = g.slice(actions, 1, step * ACT_DIM, ACT_DIM)?;
            let nll = gmm_nll_graph(g, logits, means, ls, target)?;
            let m = g.mean(nll);
            total = Some(match total {
                Some(t) => g.add(t, m)?,
                None => m,
            });
            prev = target;
        }
        let total = total.expect("horizon ≥ 1");
        Ok((g.scale(total, T::of(1.0 / self.horizon as f64)), clamped))
    }

    /// Autoregressively sample one normalized window for a single-item `batch`.
    pub fn sample<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        pv: &[Var],
        batch: &Batch,
        rng: &mut SimRng,
    ) -> Result<Vec<f64>> {
        let ctx = self.encoder.forward(g, pv, batch)?;
        let mut h = g.constant(Tensor::zeros(&[1, self.hidden]));
        let mut c = g.constant(Tensor::zeros(&[1, self.hidden]));
        let mut prev = vec![0.0; ACT_DIM];
        let mut out = Vec::with_capacity(self.horizon * ACT_DIM);
        for _ in 0..self.horizon {
            let pv_prev = constant(g, 1, ACT_DIM, &prev)?;
            let x = g.concat(&[ctx, pv_prev], 1)?;
            (h, c) = self.cell.step(g, pv, x, h, c)?;
            let (logits, means, ls, _) = self.head_out(g, pv, h)?;
            let read = |g: &Graph<T>, v: Var| g.value(v).data().iter().map(|x| x.as_f64()).collect::<Vec<_>>();
            let mut params = GmmParams {
                logits: read(g, logits),
                means: read(g, means),
                log_stds: read(g, ls),
            };
            if self.low_noise_eval {
                params.log_stds.fill(LOW_NOISE_STD.ln());
            }
            let mut a = params.sample(rng);
            if !a.iter().all(|v| v.is_finite()) {
                return Err(Error::SamplingFailed("non-finite mixture sample".into()));
            }
            // Training actions all lie in the normalized box.
            a.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
            out.extend(&a);
            prev = a;
        }
        Ok(out)
    }
}
