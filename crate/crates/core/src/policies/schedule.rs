//! Linear-β DDPM noise schedule and the forward noising process.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `betas[t-1]` is β_t for t in `1..=N`; `alpha_bars[0]` is ᾱ_0 = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }

    /// Variance of the reverse step t → t−1: (1−ᾱ_{t−1})/(1−ᾱ_t)·β_t.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        (1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t)) * self.beta(t)
    }
}

pub fn make_noise_schedule(n: usize, beta_min: f64, beta_max: f64) -> Result<NoiseSchedule> {
    if n == 0 || !(0.0 < beta_min && beta_min <= beta_max && beta_max < 1.0) {
        return Err(Error::Config(format!(
            "noise schedule needs N ≥ 1 and 0 < β_min ≤ β_max < 1, got N={n} [{beta_min}, {beta_max}]"
        )));
    }
    let betas: Vec<f64> = (0..n)
        .map(|i| {
            if n == 1 {
                beta_min
            } else {
                beta_min + (beta_max - beta_min) * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bars = Vec::with_capacity(n + 1);
    alpha_bars.push(1.0);
    for a in &alphas {
        let prev = *alpha_bars.last().unwrap();
        alpha_bars.push(prev * a);
    }
    Ok(NoiseSchedule {
        betas,
        alphas,
        alpha_bars,
    })
}

/// a_t = √ᾱ_t·a0 + √(1−ᾱ_t)·eps, for t in `0..=N` (t = 0 is the identity).
pub fn q_sample(a0: &[f64], t: usize, eps: &[f64], sched: &NoiseSchedule) -> Result<Vec<f64>> {
    if t > sched.steps() {
        return Err(Error::Contract(format!(
            "diffusion step {t} outside 0..={}",
            sched.steps()
        )));
    }
    if a0.len() != eps.len() {
        return Err(Error::Contract(format!(
            "q_sample lengths differ: {} vs {}",
            a0.len(),
            eps.len()
        )));
    }
    let ab = sched.alpha_bar(t);
    let (s, n) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(a0.iter().zip(eps).map(|(a, e)| s * a + n * e).collect())
}
