use pebble_autodiff::{ParamId, ParamStore, Tape, Var};
use pebble_envs::Observation;
use rand::Rng;

use crate::nn::{EncoderSpec, ObservationEncoder};
use crate::Result;

/// Randomly initialised encoder whose parameters are registered frozen, so
/// optimizers refuse to touch them.
#[derive(Clone, Debug)]
pub struct FrozenTargets {
    encoder: ObservationEncoder,
}

impl FrozenTargets {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, rng: &mut R, name: &str, spec: EncoderSpec) -> Result<Self> {
        Ok(Self {
            encoder: ObservationEncoder::new(store, rng, name, spec, true)?,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.encoder.params()
    }

    pub fn encoder(&self) -> &ObservationEncoder {
        &self.encoder
    }

    /// Random-projection latents, already behind a stop-gradient.
    pub fn latents(&self, tape: &mut Tape, store: &ParamStore, obs: &[&Observation]) -> Result<Var> {
        let z = self.encoder.encode(tape, store, obs)?;
        Ok(tape.stop_gradient(z)?)
    }
}

/// Learned and frozen latents for the same observations.
pub fn grounded_dual_targets(
    tape: &mut Tape,
    store: &ParamStore,
    learned: &ObservationEncoder,
    frozen: &FrozenTargets,
    obs: &[&Observation],
) -> Result<(Var, Var)> {
    let z = learned.encode(tape, store, obs)?;
    let z_rp = frozen.latents(tape, store, obs)?;
    Ok((z, z_rp))
}
