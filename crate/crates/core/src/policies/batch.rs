//! Turning observation stacks and training windows into network inputs.

use crate::datasets::{NormStats, TrainingWindow};
use crate::error::{Error, Result};
use crate::types::{encode_action, Image, Observation, ACT_DIM, STATE_FEATURES};

/// Network inputs for `n` items, all normalized, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub n: usize,
    /// `[n, T_o·STATE_FEATURES]`.
    pub feats: Vec<f64>,
    /// `[n·T_o·patches, patch²]`, image mode only.
    pub patches: Option<Vec<f64>>,
    /// `[n, T_p·ACT_DIM]`; empty when only observations are needed.
    pub actions: Vec<f64>,
}

/// Geometry of the image encoder input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub image: usize,
    pub patch: usize,
}

impl PatchGrid {
    pub fn new(image: usize, patch: usize) -> Result<Self> {
        if patch == 0 || image % patch != 0 {
            return Err(Error::Config(format!(
                "image size {image} is not a multiple of patch size {patch}"
            )));
        }
        Ok(Self { image, patch })
    }

    pub fn per_side(&self) -> usize {
        self.image / self.patch
    }

    pub fn count(&self) -> usize {
        self.per_side() * self.per_side()
    }

    pub fn patch_len(&self) -> usize {
        self.patch * self.patch
    }

    /// Patch centers in `[-1, 1]²`, row-major over the grid, as `(x, y)` with +y up.
    pub fn coords(&self) -> Vec<f64> {
        let k = self.per_side();
        let mut out = Vec::with_capacity(2 * k * k);
        for r in 0..k {
            for c in 0..k {
                out.push(-1.0 + (2 * c + 1) as f64 / k as f64);
                out.push(1.0 - (2 * r + 1) as f64 / k as f64);
            }
        }
        out
    }

    fn append(&self, img: &Image, out: &mut Vec<f64>) -> Result<()> {
        if img.width != self.image || img.height != self.image || img.data.len() != self.image * self.image {
            return Err(Error::Contract(format!(
                "image is {}×{}, encoder expects {}²",
                img.width, img.height, self.image
            )));
        }
        let k = self.per_side();
        for pr in 0..k {
            for pc in 0..k {
                for r in 0..self.patch {
                    let row = pr * self.patch + r;
                    let start = row * self.image + pc * self.patch;
                    out.extend(img.data[start..start + self.patch].iter().map(|v| *v as f64));
                }
            }
        }
        Ok(())
    }
}

fn append_obs(
    frames: &[&Observation],
    norm: &NormStats,
    grid: Option<PatchGrid>,
    feats: &mut Vec<f64>,
    patches: &mut Option<Vec<f64>>,
) -> Result<()> {
    for obs in frames {
        feats.extend(norm.obs.normalize(&obs.state_features()));
        if let (Some(grid), Some(buf)) = (grid, patches.as_mut()) {
            let img = obs
                .image
                .as_ref()
                .ok_or_else(|| Error::Contract("image-mode policy got an observation without image".into()))?;
            grid.append(img, buf)?;
        }
    }
    Ok(())
}

/// One observation stack (oldest first) as a single-item batch.
pub fn obs_batch(frames: &[&Observation], norm: &NormStats, grid: Option<PatchGrid>) -> Result<Batch> {
    let mut feats = Vec::with_capacity(frames.len() * STATE_FEATURES);
    let mut patches = grid.map(|_| Vec::new());
    append_obs(frames, norm, grid, &mut feats, &mut patches)?;
    Ok(Batch {
        n: 1,
        feats,
        patches,
        actions: Vec::new(),
    })
}

pub fn window_batch(windows: &[TrainingWindow], norm: &NormStats, grid: Option<PatchGrid>) -> Result<Batch> {
    let mut feats = Vec::new();
    let mut patches = grid.map(|_| Vec::new());
    let mut actions = Vec::new();
    for w in windows {
        let frames: Vec<&Observation> = w.obs.iter().collect();
        append_obs(&frames, norm, grid, &mut feats, &mut patches)?;
        for a in &w.actions {
            actions.extend(norm.act.normalize(&encode_action(a)));
        }
    }
    debug_assert_eq!(actions.len() % ACT_DIM, 0);
    Ok(Batch {
        n: windows.len(),
        feats,
        patches,
        actions,
    })
}

impl Batch {
    /// Items `idx` of `self`, in that order.
    pub fn select(&self, idx: &[usize]) -> Batch {
        let pick = |data: &[f64], n: usize| -> Vec<f64> {
            if data.is_empty() {
                return Vec::new();
            }
            let w = data.len() / n;
            idx.iter().flat_map(|&i| data[i * w..(i + 1) * w].iter().copied()).collect()
        };
        Batch {
            n: idx.len(),
            feats: pick(&self.feats, self.n),
            patches: self.patches.as_ref().map(|p| pick(p, self.n)),
            actions: pick(&self.actions, self.n),
        }
    }

    pub fn feat_dim(&self) -> usize {
        self.feats.len() / self.n.max(1)
    }

    pub fn action_dim(&self) -> usize {
        self.actions.len() / self.n.max(1)
    }
}
