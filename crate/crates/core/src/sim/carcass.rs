//! Carcass exemplars and randomized placement.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarcassSpec {
    pub exemplar_id: u8,
    /// Distance between the two leg centers, meters.
    pub leg_spacing: f64,
    pub leg_radius: f64,
    /// Fraction of the capture radius inside which a grasp never slips.
    pub firm_fraction: f64,
    /// Purely cosmetic; kept so exemplar files carry the full profile.
    pub mass_scale: f64,
    pub init_center: [f64; 2],
    /// Orientation of the leg pair, radians (0 = legs along the x axis).
    pub init_yaw: f64,
}

impl CarcassSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.leg_radius > 0.0 && self.leg_spacing > 2.0 * self.leg_radius) {
            return Err(Error::Config(format!(
                "leg_spacing {} must exceed twice leg_radius {}",
                self.leg_spacing, self.leg_radius
            )));
        }
        if !(self.firm_fraction > 0.0 && self.firm_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "firm_fraction {} must lie in (0, 1]",
                self.firm_fraction
            )));
        }
        let finite = [self.mass_scale, self.init_center[0], self.init_center[1], self.init_yaw];
        if !finite.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("carcass spec has non-finite fields".into()));
        }
        Ok(())
    }

    /// Initial `[left, right]` leg centers on the table plane.
    pub fn leg_positions(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.init_yaw.sin_cos();
        let h = self.leg_spacing / 2.0;
        let [cx, cy] = self.init_center;
        [[cx - c * h, cy - s * h], [cx + c * h, cy + s * h]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExemplarProfile {
    pub id: u8,
    pub leg_spacing: f64,
    pub leg_radius: f64,
    pub firm_fraction: f64,
    #[serde(default = "one")]
    pub mass_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl ExemplarProfile {
    pub fn defaults() -> Vec<ExemplarProfile> {
        let p = |id, leg_spacing, firm_fraction, mass_scale| ExemplarProfile {
            id,
            leg_spacing,
            leg_radius: 0.012,
            firm_fraction,
            mass_scale,
        };
        vec![p(1, 0.14, 0.8, 1.0), p(2, 0.13, 0.9, 0.9), p(3, 0.16, 0.5, 1.2)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlacementConfig {
    pub center: [f64; 2],
    /// Half-widths of the uniform placement box around `center`.
    pub half_extent: [f64; 2],
    /// Yaw drawn uniformly in `[-max_yaw_deg, max_yaw_deg]`.
    pub max_yaw_deg: f64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0],
            half_extent: [0.1, 0.1],
            max_yaw_deg: 15.0,
        }
    }
}

impl PlacementConfig {
    pub fn validate(&self) -> Result<()> {
        if self.half_extent.iter().any(|h| !(*h >= 0.0)) || !(self.max_yaw_deg >= 0.0) {
            return Err(Error::Config("placement extents must be non-negative".into()));
        }
        Ok(())
    }
}

/// Draw a placement for exemplar `exemplar_id` from `profiles`.
pub fn sample_carcass(
    exemplar_id: u8,
    profiles: &[ExemplarProfile],
    placement: &PlacementConfig,
    rng: &mut SimRng,
) -> Result<CarcassSpec> {
    let profile = profiles
        .iter()
        .find(|p| p.id == exemplar_id)
        .ok_or_else(|| Error::Config(format!("unknown exemplar {exemplar_id}")))?;
    let mut draw = |half: f64| {
        if half > 0.0 {
            rng.random_range(-half..=half)
        } else {
            0.0
        }
    };
    let dx = draw(placement.half_extent[0]);
    let dy = draw(placement.half_extent[1]);
    let yaw = draw(placement.max_yaw_deg * PI / 180.0);
    let spec = CarcassSpec {
        exemplar_id,
        leg_spacing: profile.leg_spacing,
        leg_radius: profile.leg_radius,
        firm_fraction: profile.firm_fraction,
        mass_scale: profile.mass_scale,
        init_center: [placement.center[0] + dx, placement.center[1] + dy],
        init_yaw: yaw,
    };
    spec.validate()?;
    Ok(spec)
}
