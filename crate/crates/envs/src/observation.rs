use crate::grid::NUM_CHANNELS;

/// What the agent perceives after each step.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// Channel-major `NUM_CHANNELS x view_len` intensities in `[0, 1]`.
    pub view: Vec<f64>,
    pub view_len: usize,
    /// Instruction token ids; empty when the task has no instruction.
    pub instruction: Vec<usize>,
    /// Action that led to this observation, `NOOP_ACTION` after a reset.
    pub prev_action: usize,
    /// Raw reward received together with this observation.
    pub reward: f64,
}

impl Observation {
    pub fn channels(&self) -> usize {
        NUM_CHANNELS
    }

    pub fn intensity(&self, channel: usize, ray: usize) -> f64 {
        self.view[channel * self.view_len + ray]
    }

    /// Canonical byte encoding, used for exact equality checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * (self.view.len() + self.instruction.len() + 3));
        out.extend((self.view_len as u64).to_le_bytes());
        for v in &self.view {
            out.extend(v.to_bits().to_le_bytes());
        }
        out.extend((self.instruction.len() as u64).to_le_bytes());
        for t in &self.instruction {
            out.extend((*t as u64).to_le_bytes());
        }
        out.extend((self.prev_action as u64).to_le_bytes());
        out.extend(self.reward.to_bits().to_le_bytes());
        out
    }
}
