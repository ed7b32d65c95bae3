//! Conditional DDPM over flattened action windows with a FiLM-conditioned
//! residual MLP denoiser predicting the added noise.

use chicgrasp_nn::{sinusoidal_embedding, Graph, LayerNorm, Linear, ParamStore, Scalar, Var};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

use super::batch::Batch;
use super::encoder::{constant, ObsEncoder};
use super::schedule::{make_noise_schedule, NoiseSchedule};
use super::PolicyConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilmBlock {
    pub norm: LayerNorm,
    pub lin1: Linear,
    pub lin2: Linear,
    /// Maps the conditioning vector to `[γ, β]`.
    pub film: Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionNet {
    pub encoder: ObsEncoder,
    pub input: Linear,
    pub blocks: Vec<FilmBlock>,
    pub output: Linear,
    pub hidden: usize,
    pub t_embed: usize,
    pub window: usize,
    pub noise_draws: usize,
    pub clip_sample: bool,
    pub schedule: NoiseSchedule,
}

/// The per-item randomness of one denoising loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionNoise {
    /// Diffusion step per item, in `1..=N`.
    pub t: Vec<usize>,
    /// `[n, window]` unit Gaussian draws.
    pub eps: Vec<f64>,
}

impl DiffusionNoise {
    pub fn draw(n: usize, window: usize, steps: usize, rng: &mut SimRng) -> Self {
        let t = (0..n).map(|_| rng.random_range(1..=steps)).collect();
        let eps = (0..n * window).map(|_| rng.sample(StandardNormal)).collect();
        Self { t, eps }
    }
}

impl DiffusionNet {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        cfg: &PolicyConfig,
        image: Option<usize>,
        rng: &mut R,
    ) -> Result<Self> {
        let d = &cfg.diffusion;
        let encoder = ObsEncoder::new(store, cfg, image, rng)?;
        let window = cfg.window_dim();
        let cond = encoder.out_dim() + d.t_embed;
        let input = Linear::new(store, "diff.in", window, d.hidden, rng)?;
        let blocks = (0..d.blocks)
            .map(|i| {
                Ok(FilmBlock {
                    norm: LayerNorm::new(store, &format!("diff.block{i}.norm"), d.hidden)?,
                    lin1: Linear::new(store, &format!("diff.block{i}.lin1"), d.hidden, d.hidden, rng)?,
                    lin2: Linear::new(store, &format!("diff.block{i}.lin2"), d.hidden, d.hidden, rng)?,
                    film: Linear::new(store, &format!("diff.block{i}.film"), cond, 2 * d.hidden, rng)?,
                })
            })
            .collect::<Result<_>>()?;
        let output = Linear::new(store, "diff.out", d.hidden, window, rng)?;
        Ok(Self {
            encoder,
            input,
            blocks,
            output,
            hidden: d.hidden,
            t_embed: d.t_embed,
            window,
            noise_draws: d.noise_draws,
            clip_sample: d.clip_sample,
            schedule: make_noise_schedule(d.n_diff, d.beta_min, d.beta_max)?,
        })
    }

    fn t_embedding(&self, t: &[usize]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(t.len() * self.t_embed);
        for &ti in t {
            out.extend(sinusoidal_embedding::<f64>(ti, self.t_embed)?);
        }
        Ok(out)
    }

    /// Predicted noise `[n, window]` for noisy windows `x` at steps `t`,
    /// given an already-encoded observation `obs_emb` (`[n, E]`).
    pub fn denoise<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        pv: &[Var],
        x: Var,
        t: &[usize],
        obs_emb: Var,
    ) -> Result<Var> {
        let n = t.len();
        let temb = constant(g, n, self.t_embed, &self.t_embedding(t)?)?;
        let cond = g.concat(&[obs_emb, temb], 1)?;
        let mut h = self.input.forward(g, pv, x)?;
        for b in &self.blocks {
            let u = b.norm.forward(g, pv, h)?;
            let u = g.silu(u);
            let u = b.lin1.forward(g, pv, u)?;
            let fb = b.film.forward(g, pv, cond)?;
            let gamma = g.slice(fb, 1, 0, self.hidden)?;
            let beta = g.slice(fb, 1, self.hidden, self.hidden)?;
            let gamma = g.shift(gamma, T::one());
            let u = g.mul(u, gamma)?;
            let u = g.add(u, beta)?;
            let u = g.silu(u);
            let u = b.lin2.forward(g, pv, u)?;
            h = g.add(h, u)?;
        }
        let h = g.silu(h);
        Ok(self.output.forward(g, pv, h)?)
    }

    /// Mean squared error between the drawn and the predicted noise, per
    /// element. `noise` holds `noise_draws` consecutive draws per window.
    pub fn loss<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        pv: &[Var],
        batch: &Batch,
        noise: &DiffusionNoise,
    ) -> Result<Var> {
        let (n, k, w) = (batch.n, self.noise_draws, self.window);
        let rows = n * k;
        if noise.t.len() != rows || noise.eps.len() != rows * w || batch.actions.len() != n * w {
            return Err(Error::Contract("diffusion loss inputs disagree in size".into()));
        }
        let mut noisy = Vec::with_capacity(rows * w);
        for r in 0..rows {
            let i = r / k;
            noisy.extend(super::schedule::q_sample(
                &batch.actions[i * w..(i + 1) * w],
                noise.t[r],
                &noise.eps[r * w..(r + 1) * w],
                &self.schedule,
            )?);
        }
        let x = constant(g, rows, w, &noisy)?;
        let target = constant(g, rows, w, &noise.eps)?;
        let obs_emb = self.encoder.forward(g, pv, batch)?;
        let obs_emb = if k > 1 { g.repeat_rows(obs_emb, k)? } else { obs_emb };
        let pred = self.denoise(g, pv, x, &noise.t, obs_emb)?;
        let diff = g.sub(pred, target)?;
        let sq = g.square(diff);
        Ok(g.mean(sq))
    }

    /// Ancestral sampling of one normalized window for a single-item `batch`.
    pub fn sample<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        pv: &[Var],
        batch: &Batch,
        rng: &mut SimRng,
    ) -> Result<Vec<f64>> {
        let obs_emb = self.encoder.forward(g, pv, batch)?;
        let mut x: Vec<f64> = (0..self.window).map(|_| rng.sample(StandardNormal)).collect();
        let s = &self.schedule;
        for t in (1..=s.steps()).rev() {
            let xv = constant(g, 1, self.window, &x)?;
            let eps = self.denoise(g, pv, xv, &[t], obs_emb)?;
            let eps = g.value(eps).data().iter().map(|v| v.as_f64()).collect::<Vec<_>>();
            let (a, ab, ab_prev, b) = (s.alpha(t), s.alpha_bar(t), s.alpha_bar(t - 1), s.beta(t));
            // Posterior mean written through the predicted clean window x̂₀.
            let c0 = ab_prev.sqrt() * b / (1.0 - ab);
            let ct = a.sqrt() * (1.0 - ab_prev) / (1.0 - ab);
            let sigma = if t > 1 { s.posterior_variance(t).sqrt() } else { 0.0 };
            for (xi, ei) in x.iter_mut().zip(&eps) {
                let mut x0 = (*xi - (1.0 - ab).sqrt() * ei) / ab.sqrt();
                if self.clip_sample {
                    x0 = x0.clamp(-1.0, 1.0);
                }
                let mean = c0 * x0 + ct * *xi;
                *xi = if t > 1 {
                    mean + sigma * rng.sample::<f64, _>(StandardNormal)
                } else {
                    mean
                };
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::SamplingFailed(format!("non-finite sample at diffusion step {t}")));
            }
        }
        Ok(x)
    }
}
