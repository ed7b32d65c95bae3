//! Observation encoder shared by all three policies: an MLP over the
//! flattened state stack, optionally fed spatial-softmax keypoints from a
//! patch-linear saliency map of each rendered frame.

use chicgrasp_nn::{spatial_softmax, Graph, Linear, Mlp, ParamStore, Scalar, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::types::STATE_FEATURES;

use super::batch::{Batch, PatchGrid};
use super::PolicyConfig;

pub(crate) fn constant<T: Scalar>(g: &mut Graph<T>, rows: usize, cols: usize, data: &[f64]) -> Result<Var> {
    let t = Tensor::matrix(rows, cols, data.iter().map(|v| T::of(*v)).collect())?;
    Ok(g.constant(t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keypoints {
    pub saliency: Linear,
    pub channels: usize,
    pub image: usize,
    pub patch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsEncoder {
    pub mlp: Mlp,
    pub keypoints: Option<Keypoints>,
    pub frames: usize,
}

impl ObsEncoder {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        cfg: &PolicyConfig,
        image: Option<usize>,
        rng: &mut R,
    ) -> Result<Self> {
        let frames = cfg.obs_horizon;
        let keypoints = match image {
            Some(size) => {
                let grid = PatchGrid::new(size, cfg.patch)?;
                Some(Keypoints {
                    saliency: Linear::new(store, "enc.saliency", grid.patch_len(), cfg.keypoints, rng)?,
                    channels: cfg.keypoints,
                    image: size,
                    patch: cfg.patch,
                })
            }
            None => None,
        };
        let kp_dim = keypoints.as_ref().map_or(0, |k| 2 * k.channels * frames);
        let mut sizes = vec![frames * STATE_FEATURES + kp_dim];
        sizes.extend(&cfg.encoder_hidden);
        sizes.push(cfg.obs_embed);
        let mlp = Mlp::new(store, "enc.mlp", &sizes, rng)?;
        Ok(Self {
            mlp,
            keypoints,
            frames,
        })
    }

    pub fn grid(&self) -> Option<PatchGrid> {
        self.keypoints.as_ref().map(|k| PatchGrid {
            image: k.image,
            patch: k.patch,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.mlp.out_dim()
    }

    /// `[batch.n, obs_embed]`.
    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, pv: &[Var], batch: &Batch) -> Result<Var> {
        let n = batch.n;
        let feats = constant(g, n, batch.feat_dim(), &batch.feats)?;
        let input = match (&self.keypoints, &batch.patches) {
            (Some(k), Some(patches)) => {
                let grid = PatchGrid {
                    image: k.image,
                    patch: k.patch,
                };
                let items = n * self.frames;
                let p = constant(g, items * grid.count(), grid.patch_len(), patches)?;
                let sal = k.saliency.forward(g, pv, p)?;
                let coords = constant(g, grid.count(), 2, &grid.coords())?;
                let kp = spatial_softmax(g, sal, items, coords)?; // [items, 2C]
                let kp = g.reshape(kp, &[n, self.frames * 2 * k.channels])?;
                g.concat(&[feats, kp], 1)?
            }
            (Some(_), None) => {
                return Err(crate::Error::Contract("image encoder needs patch input".into()))
            }
            _ => feats,
        };
        Ok(self.mlp.forward(g, pv, input)?)
    }
}
