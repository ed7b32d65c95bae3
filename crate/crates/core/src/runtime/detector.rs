use crate::types::Jaws;

/// Consecutive both-closed frames needed before the scripted handoff.
pub const DETECTOR_FRAMES: u32 = 3;

/// Counts consecutive frames with both jaws closed; any open jaw resets it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GraspDetector {
    pub consecutive_closed: u32,
}

impl GraspDetector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feed one frame; returns whether the last [`DETECTOR_FRAMES`] frames
    /// all had both jaws closed.
    pub fn update(&mut self, jaws: Jaws) -> bool {
        if jaws.both_closed() {
            self.consecutive_closed = self.consecutive_closed.saturating_add(1);
        } else {
            self.consecutive_closed = 0;
        }
        self.fired()
    }

    pub fn fired(&self) -> bool {
        self.consecutive_closed >= DETECTOR_FRAMES
    }
}

/// Functional form of [`GraspDetector::update`].
pub fn detector_update(det: GraspDetector, jaws: Jaws) -> (GraspDetector, bool) {
    let mut d = det;
    let fired = d.update(jaws);
    (d, fired)
}
