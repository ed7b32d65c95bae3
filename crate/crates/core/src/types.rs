//! Shared vocabulary: actions, observations, workspace bounds and the jaw
//! binarization rule every policy goes through.

use std::collections::VecDeque;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const ACT_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    L,
    R,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::L, Side::R];

    pub fn index(self) -> usize {
        match self {
            Side::L => 0,
            Side::R => 1,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Side::L => 'L',
            Side::R => 'R',
        }
    }
}

/// Binary jaw pair, `true` = closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Jaws {
    pub left: bool,
    pub right: bool,
}

impl Jaws {
    pub const OPEN: Jaws = Jaws {
        left: false,
        right: false,
    };
    pub const CLOSED: Jaws = Jaws {
        left: true,
        right: true,
    };

    pub fn new(left: bool, right: bool) -> Self {
        Self { left, right }
    }

    pub fn get(self, side: Side) -> bool {
        match side {
            Side::L => self.left,
            Side::R => self.right,
        }
    }

    pub fn set(&mut self, side: Side, closed: bool) {
        match side {
            Side::L => self.left = closed,
            Side::R => self.right = closed,
        }
    }

    pub fn both_closed(self) -> bool {
        self.left && self.right
    }

    pub fn bits(self) -> [u8; 2] {
        [self.left as u8, self.right as u8]
    }
}

impl Serialize for Jaws {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.bits().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Jaws {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [l, r] = <[u8; 2]>::deserialize(d)?;
        if l > 1 || r > 1 {
            return Err(serde::de::Error::custom(format!(
                "jaw bits must be 0 or 1, got [{l}, {r}]"
            )));
        }
        Ok(Jaws::new(l == 1, r == 1))
    }
}

/// Five-dimensional command: end-effector target position plus jaw bits.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Action {
    pub pos: [f64; 3],
    pub jaws: Jaws,
}

impl Action {
    pub fn new(pos: [f64; 3], jaws: Jaws) -> Self {
        Self { pos, jaws }
    }
}

// Serialized as `[x, y, z, gL, gR]`.
impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let [gl, gr] = self.jaws.bits();
        (self.pos[0], self.pos[1], self.pos[2], gl, gr).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (x, y, z, gl, gr) = <(f64, f64, f64, u8, u8)>::deserialize(d)?;
        if gl > 1 || gr > 1 {
            return Err(serde::de::Error::custom(format!(
                "jaw bits must be 0 or 1, got [{gl}, {gr}]"
            )));
        }
        Ok(Action::new([x, y, z], Jaws::new(gl == 1, gr == 1)))
    }
}

/// Policy output before jaw binarization.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RawAction {
    pub pos: [f64; 3],
    /// Unbounded jaw logits `[left, right]`.
    pub logits: [f64; 2],
}

impl RawAction {
    pub fn is_finite(&self) -> bool {
        self.pos.iter().chain(&self.logits).all(|v| v.is_finite())
    }
}

/// Closed iff `sigmoid(logit) > 0.5`, which is exactly `logit > 0`.
pub fn threshold_jaws(raw: &RawAction) -> Result<Action> {
    if !raw.is_finite() {
        return Err(Error::InvalidAction(format!("non-finite raw action {raw:?}")));
    }
    Ok(Action::new(
        raw.pos,
        Jaws::new(raw.logits[0] > 0.0, raw.logits[1] > 0.0),
    ))
}

/// `[x, y, z, gL, gR]` with jaw bits mapped to `{-1, +1}`.
pub fn encode_action(a: &Action) -> [f64; ACT_DIM] {
    let pm = |b: bool| if b { 1.0 } else { -1.0 };
    [a.pos[0], a.pos[1], a.pos[2], pm(a.jaws.left), pm(a.jaws.right)]
}

/// Inverse of [`encode_action`]; jaw components are closed iff strictly positive.
pub fn decode_action(v: &[f64; ACT_DIM]) -> Result<Action> {
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidAction(format!("non-finite action vector {v:?}")));
    }
    Ok(Action::new([v[0], v[1], v[2]], Jaws::new(v[3] > 0.0, v[4] > 0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceBounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for WorkspaceBounds {
    fn default() -> Self {
        Self {
            min: [-0.5, -0.5, 0.0],
            max: [0.5, 0.5, 0.6],
        }
    }
}

impl WorkspaceBounds {
    pub fn validate(&self) -> Result<()> {
        for axis in 0..3 {
            if !(self.min[axis] < self.max[axis]) {
                return Err(Error::Config(format!(
                    "workspace axis {axis}: min {} must be < max {}",
                    self.min[axis], self.max[axis]
                )));
            }
        }
        Ok(())
    }

    pub fn clamp(&self, p: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| p[i].clamp(self.min[i], self.max[i]))
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Row-major grayscale raster with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn at(&self, col: usize, row: usize) -> f32 {
        self.data[row * self.width + col]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub ee: [f64; 3],
    pub jaws: Jaws,
    /// Noisy `[left, right]` leg positions on the table plane; absent in image mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legs: Option<[[f64; 2]; 2]>,
    pub lifted_z: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<Image>,
}

/// Width of [`Observation::state_features`].
pub const STATE_FEATURES: usize = 10;
/// Width of [`Observation::proprio_features`].
pub const PROPRIO_FEATURES: usize = 6;

impl Observation {
    /// `[ee(3), jaws(2), leg_L(2), leg_R(2), lifted_z]`. Legs are zero when absent.
    pub fn state_features(&self) -> [f64; STATE_FEATURES] {
        let legs = self.legs.unwrap_or([[0.0; 2]; 2]);
        let [gl, gr] = self.jaws.bits();
        [
            self.ee[0],
            self.ee[1],
            self.ee[2],
            gl as f64,
            gr as f64,
            legs[0][0],
            legs[0][1],
            legs[1][0],
            legs[1][1],
            self.lifted_z,
        ]
    }

    /// `[ee(3), jaws(2), lifted_z]`.
    pub fn proprio_features(&self) -> [f64; PROPRIO_FEATURES] {
        let [gl, gr] = self.jaws.bits();
        [
            self.ee[0],
            self.ee[1],
            self.ee[2],
            gl as f64,
            gr as f64,
            self.lifted_z,
        ]
    }

    pub fn is_finite(&self) -> bool {
        let legs_ok = self
            .legs
            .map(|l| l.iter().flatten().all(|v| v.is_finite()))
            .unwrap_or(true);
        let img_ok = self
            .image
            .as_ref()
            .map(|im| im.data.iter().all(|v| v.is_finite()))
            .unwrap_or(true);
        self.ee.iter().all(|v| v.is_finite()) && self.lifted_z.is_finite() && legs_ok && img_ok
    }
}

/// The last `depth` observations, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationStack {
    frames: VecDeque<Observation>,
    depth: usize,
}

impl ObservationStack {
    /// A stack at episode start: `first` repeated `depth` times.
    pub fn new(depth: usize, first: Observation) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("observation stack depth must be ≥ 1".into()));
        }
        Ok(Self {
            frames: std::iter::repeat_n(first, depth).collect(),
            depth,
        })
    }

    pub fn from_frames(frames: Vec<Observation>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Config("observation stack needs at least one frame".into()));
        }
        Ok(Self {
            depth: frames.len(),
            frames: frames.into(),
        })
    }

    pub fn push(&mut self, obs: Observation) {
        self.frames.pop_front();
        self.frames.push_back(obs);
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn frames(&self) -> impl Iterator<Item = &Observation> {
        self.frames.iter()
    }

    pub fn latest(&self) -> &Observation {
        self.frames.back().expect("stack is never empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(l: f64, r: f64) -> RawAction {
        RawAction {
            pos: [0.1, 0.2, 0.3],
            logits: [l, r],
        }
    }

    #[test]
    fn zero_logit_is_open() {
        assert!(!threshold_jaws(&raw(0.0, 0.0)).unwrap().jaws.left);
    }

    #[test]
    fn sign_rule() {
        let a = threshold_jaws(&raw(2.0, -3.0)).unwrap();
        assert_eq!(a.jaws, Jaws::new(true, false));
        assert_eq!(a.pos, [0.1, 0.2, 0.3]);
    }

    #[test]
    fn tiny_positive_logit_closes() {
        // Reference sigmoid in f64: 1/(1+e^{-1e-12}) = 0.5 + 2.5e-13 > 0.5.
        let s = 1.0 / (1.0 + (-1e-12f64).exp());
        assert!(s > 0.5);
        assert!(threshold_jaws(&raw(1e-12, 0.0)).unwrap().jaws.left);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            threshold_jaws(&raw(f64::NAN, 0.0)),
            Err(Error::InvalidAction(_))
        ));
        let mut r = raw(0.0, 0.0);
        r.pos[2] = f64::INFINITY;
        assert!(threshold_jaws(&r).is_err());
        assert!(decode_action(&[0.0, 0.0, f64::NAN, 1.0, 1.0]).is_err());
    }

    #[test]
    fn encode_examples() {
        let a = Action::new([0.1, 0.2, 0.3], Jaws::new(true, false));
        assert_eq!(encode_action(&a), [0.1, 0.2, 0.3, 1.0, -1.0]);
        assert_eq!(encode_action(&Action::default()), [0.0, 0.0, 0.0, -1.0, -1.0]);
    }

    #[test]
    fn decode_examples() {
        let a = decode_action(&[0.1, 0.2, 0.3, 0.7, -0.2]).unwrap();
        assert_eq!(a, Action::new([0.1, 0.2, 0.3], Jaws::new(true, false)));
        assert_eq!(decode_action(&[0.0; 5]).unwrap().jaws, Jaws::OPEN);
    }

    #[test]
    fn action_json_is_five_array() {
        let a = Action::new([0.5, -0.25, 0.125], Jaws::new(false, true));
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[0.5,-0.25,0.125,0,1]");
        assert_eq!(serde_json::from_str::<Action>(&s).unwrap(), a);
        assert!(serde_json::from_str::<Action>("[0,0,0,2,0]").is_err());
    }

    #[test]
    fn stack_pads_and_keeps_depth() {
        let obs = |x: f64| Observation {
            ee: [x, 0.0, 0.0],
            jaws: Jaws::OPEN,
            legs: None,
            lifted_z: 0.0,
            image: None,
        };
        let mut st = ObservationStack::new(3, obs(0.0)).unwrap();
        assert_eq!(st.frames().count(), 3);
        for i in 1..10 {
            st.push(obs(i as f64));
            assert_eq!(st.frames().count(), 3);
        }
        let xs: Vec<f64> = st.frames().map(|o| o.ee[0]).collect();
        assert_eq!(xs, vec![7.0, 8.0, 9.0]);
        assert!(ObservationStack::new(0, obs(0.0)).is_err());
    }

    #[test]
    fn bounds_validate() {
        assert!(WorkspaceBounds::default().validate().is_ok());
        let bad = WorkspaceBounds {
            min: [0.0; 3],
            max: [1.0, 0.0, 1.0],
        };
        assert!(bad.validate().is_err());
    }
}
