//! Implicit policy: an energy network over (observation, action window)
//! trained with InfoNCE against uniform counter-examples, and a
//! derivative-free sampler for inference.

use chicgrasp_nn::{Graph, Mlp, ParamStore, Scalar, Var};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

use super::batch::Batch;
use super::encoder::{constant, ObsEncoder};
use super::{IbcConfig, PolicyConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbcNet {
    pub encoder: ObsEncoder,
    pub energy: Mlp,
    pub window: usize,
    pub n_neg: usize,
}

/// Draw `count` points uniformly from `[-1, 1]^dim`, row-major.
pub fn uniform_box(count: usize, dim: usize, rng: &mut SimRng) -> Vec<f64> {
    (0..count * dim).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Sampling-based energy minimization over `[-1, 1]^dim`.
///
/// Starts from `n_samples` uniform candidates. Each of the first
/// `m_iters − 1` rounds resamples candidates in proportion to
/// `softmax(−E/τ)` and perturbs them with Gaussian jitter whose scale halves
/// every round. The final round returns the lowest-energy candidate, so a
/// single round is plain argmin over the initial draw.
pub fn derivative_free_minimize(
    energy: &mut dyn FnMut(&[f64], usize) -> Result<Vec<f64>>,
    dim: usize,
    cfg: &IbcConfig,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    let n = cfg.n_samples;
    let mut cands = uniform_box(n, dim, rng);
    let mut scale = cfg.jitter;
    for iter in 0..cfg.m_iters {
        let e = energy(&cands, n)?;
        if e.len() != n || !e.iter().all(|v| v.is_finite()) {
            return Err(Error::SamplingFailed("energy model produced non-finite values".into()));
        }
        if iter + 1 == cfg.m_iters {
            let best = (0..n)
                .min_by(|&a, &b| e[a].total_cmp(&e[b]))
                .expect("n_samples ≥ 1");
            return Ok(cands[best * dim..(best + 1) * dim].to_vec());
        }
        let logits: Vec<f64> = e.iter().map(|v| -v / cfg.temperature).collect();
        let lse = chicgrasp_nn::log_sum_exp(&logits);
        let mut cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        for l in &logits {
            acc += (l - lse).exp();
            cdf.push(acc);
        }
        let mut next = Vec::with_capacity(n * dim);
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * acc;
            let k = cdf.partition_point(|c| *c <= u).min(n - 1);
            for j in 0..dim {
                let z: f64 = rng.sample(StandardNormal);
                next.push((cands[k * dim + j] + scale * z).clamp(-1.0, 1.0));
            }
        }
        cands = next;
        scale *= 0.5;
    }
    unreachable!("m_iters ≥ 1 is validated")
}

impl IbcNet {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        cfg: &PolicyConfig,
        image: Option<usize>,
        rng: &mut R,
    ) -> Result<Self> {
        let encoder = ObsEncoder::new(store, cfg, image, rng)?;
        let window = cfg.window_dim();
        let mut sizes = vec![encoder.out_dim() + window];
        sizes.extend(&cfg.ibc.hidden);
        sizes.push(1);
        let energy = Mlp::new(store, "ibc.energy", &sizes, rng)?;
        Ok(Self {
            encoder,
            energy,
            window,
            n_neg: cfg.ibc.n_neg,
        })
    }

    /// Energies `[rows, 1]` of `cands` (`[rows, window]`) where each block of
    /// `per_item` consecutive rows shares one row of `obs_emb`.
    pub fn energies<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        pv: &[Var],
        obs_emb: Var,
        cands: Var,
        per_item: usize,
    ) -> Result<Var> {
        let ctx = g.repeat_rows(obs_emb, per_item)?;
        let x = g.concat(&[ctx, cands], 1)?;
        Ok(self.energy.forward(g, pv, x)?)
    }

    /// Candidate rows for InfoNCE: each item's positive followed by its
    /// negatives, `[n·(1+n_neg), window]`.
    pub fn infonce_candidates(&self, batch: &Batch, negatives: &[f64]) -> Result<Vec<f64>> {
        let (n, w, k) = (batch.n, self.window, self.n_neg);
        if batch.actions.len() != n * w || negatives.len() != n * k * w {
            return Err(Error::Contract("InfoNCE inputs disagree in size".into()));
        }
        let mut rows = Vec::with_capacity(n * (k + 1) * w);
        for i in 0..n {
            rows.extend(&batch.actions[i * w..(i + 1) * w]);
            rows.extend(&negatives[i * k * w..(i + 1) * k * w]);
        }
        Ok(rows)
    }

    /// Mean over items of −log softmax(−E)[positive].
    pub fn loss<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        pv: &[Var],
        batch: &Batch,
        negatives: &[f64],
    ) -> Result<Var> {
        let n = batch.n;
        let per = 1 + self.n_neg;
        let rows = self.infonce_candidates(batch, negatives)?;
        let cands = constant(g, n * per, self.window, &rows)?;
        let obs_emb = self.encoder.forward(g, pv, batch)?;
        let e = self.energies(g, pv, obs_emb, cands, per)?;
        let e = g.reshape(e, &[n, per])?;
        let logits = g.neg(e);
        let lse = g.log_sum_exp(logits)?;
        let pos = g.slice(logits, 1, 0, 1)?;
        let nll = g.sub(lse, pos)?;
        Ok(g.mean(nll))
    }

    /// Energy-minimizing normalized window for a single-item `batch`.
    pub fn infer<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        pv: &[Var],
        batch: &Batch,
        cfg: &IbcConfig,
        rng: &mut SimRng,
    ) -> Result<Vec<f64>> {
        let obs_emb = self.encoder.forward(g, pv, batch)?;
        let window = self.window;
        let mut energy = |cands: &[f64], rows: usize| -> Result<Vec<f64>> {
            let c = constant(g, rows, window, cands)?;
            let e = self.energies(g, pv, obs_emb, c, rows)?;
            Ok(g.value(e).data().iter().map(|v| v.as_f64()).collect())
        };
        derivative_free_minimize(&mut energy, window, cfg, rng)
    }
}
