//! Per-dimension min-max normalization to `[-1, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{encode_action, ACT_DIM, STATE_FEATURES};

use super::DemoSet;

/// Dimensions whose observed range is narrower than this get a span of
/// exactly this width, centered on their midpoint.
pub const MIN_SPAN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl DimStats {
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut it = rows.into_iter();
        let first = it
            .next()
            .ok_or_else(|| Error::Contract("normalization statistics need at least one row".into()))?;
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for row in it {
            if row.len() != min.len() {
                return Err(Error::Contract(format!(
                    "row width {} differs from {}",
                    row.len(),
                    min.len()
                )));
            }
            for (j, v) in row.iter().enumerate() {
                min[j] = min[j].min(*v);
                max[j] = max[j].max(*v);
            }
        }
        for j in 0..min.len() {
            if max[j] - min[j] < MIN_SPAN {
                let mid = 0.5 * (min[j] + max[j]);
                min[j] = mid - MIN_SPAN / 2.0;
                max[j] = mid + MIN_SPAN / 2.0;
            }
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| 2.0 * (v - self.min[j]) / (self.max[j] - self.min[j]) - 1.0)
            .collect()
    }

    pub fn denormalize(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(j, v)| self.min[j] + (v + 1.0) * 0.5 * (self.max[j] - self.min[j]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub obs: DimStats,
    pub act: DimStats,
}

impl NormStats {
    pub fn validate(&self) -> Result<()> {
        let ok = self.obs.dim() == STATE_FEATURES
            && self.act.dim() == ACT_DIM
            && [&self.obs, &self.act].iter().all(|d| {
                d.min.len() == d.max.len()
                    && d.min.iter().zip(&d.max).all(|(a, b)| a.is_finite() && b.is_finite() && a < b)
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Format("normalization statistics are malformed".into()))
        }
    }
}

/// Statistics over the learnable frames of `set`. Jaw action dims are
/// already `±1` and keep the identity map.
pub fn compute_norm_stats(set: &DemoSet) -> Result<NormStats> {
    let frames: Vec<_> = set.demos.iter().flat_map(|d| d.learnable()).collect();
    if frames.is_empty() {
        return Err(Error::Contract("cannot compute statistics of an empty dataset".into()));
    }
    let obs_rows: Vec<[f64; STATE_FEATURES]> = frames.iter().map(|f| f.obs.state_features()).collect();
    let act_rows: Vec<[f64; ACT_DIM]> = frames.iter().map(|f| encode_action(&f.action)).collect();
    let obs = DimStats::from_rows(obs_rows.iter().map(|r| &r[..]))?;
    let mut act = DimStats::from_rows(act_rows.iter().map(|r| &r[..]))?;
    for j in 3..ACT_DIM {
        act.min[j] = -1.0;
        act.max[j] = 1.0;
    }
    Ok(NormStats { obs, act })
}
