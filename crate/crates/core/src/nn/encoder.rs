use pebble_autodiff::{glorot_uniform, ParamId, ParamStore, Tape, Tensor, Var};
use pebble_envs::Observation;
use rand::Rng;

use super::{add_param, Lstm, LstmSpec, Mlp, MlpSpec, StateVars};
use crate::rl::transform_reward;
use crate::{Error, Result};

/// Shapes of the multimodal observation encoder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncoderSpec {
    pub channels: usize,
    pub view_len: usize,
    /// Widths of the view MLP; its last layer is rectified too.
    pub view_widths: Vec<usize>,
    pub vocab: usize,
    pub embed: usize,
    pub instr_width: usize,
    pub max_instr_len: usize,
    /// Slots of the previous-action one-hot, including the no-op slot.
    pub actions: usize,
}

impl EncoderSpec {
    pub fn validate(&self) -> Result<()> {
        MlpSpec::new(self.channels * self.view_len, self.view_widths.clone()).validate()?;
        if self.vocab == 0 || self.embed == 0 || self.instr_width == 0 || self.actions == 0 {
            return Err(Error::Invalid("encoder widths must be positive".into()));
        }
        Ok(())
    }

    pub fn view_width(&self) -> usize {
        *self.view_widths.last().expect("validated spec")
    }

    /// `d_Z`: view block, instruction block, action one-hot, reward slot.
    pub fn latent_width(&self) -> usize {
        self.view_width() + self.instr_width + self.actions + 1
    }

    /// `(name, offset, width)` of every block of the latent.
    pub fn blocks(&self) -> [(&'static str, usize, usize); 4] {
        let v = self.view_width();
        let i = self.instr_width;
        [
            ("view", 0, v),
            ("instruction", v, i),
            ("action", v + i, self.actions),
            ("reward", v + i + self.actions, 1),
        ]
    }
}

/// One-hot rows for a batch of action indices.
pub fn action_one_hot(actions: &[usize], count: usize) -> Result<Tensor> {
    let mut t = Tensor::zeros(vec![actions.len(), count]);
    for (r, &a) in actions.iter().enumerate() {
        if a >= count {
            return Err(Error::ActionIndex { index: a, count });
        }
        t.data_mut()[r * count + a] = 1.0;
    }
    Ok(t)
}

#[derive(Clone, Debug)]
pub struct ObservationEncoder {
    spec: EncoderSpec,
    view: Mlp,
    embedding: ParamId,
    instr: Lstm,
}

impl ObservationEncoder {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        spec: EncoderSpec,
        frozen: bool,
    ) -> Result<Self> {
        spec.validate()?;
        let view = Mlp::build(
            store,
            rng,
            &format!("{name}.view"),
            MlpSpec::new(spec.channels * spec.view_len, spec.view_widths.clone()),
            frozen,
        )?
        .with_output_relu();
        let embedding = add_param(
            store,
            format!("{name}.embedding"),
            glorot_uniform(rng, spec.vocab, spec.embed),
            frozen,
        )?;
        let instr = Lstm::build(
            store,
            rng,
            &format!("{name}.instruction"),
            LstmSpec {
                input: spec.embed,
                layers: vec![spec.instr_width],
                skip: false,
            },
            frozen,
        )?;
        Ok(Self {
            spec,
            view,
            embedding,
            instr,
        })
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = self.view.params();
        p.push(self.embedding);
        p.extend(self.instr.params());
        p
    }

    /// Encodes a batch of observations into `[n, d_Z]` latents.
    pub fn encode(&self, tape: &mut Tape, store: &ParamStore, obs: &[&Observation]) -> Result<Var> {
        let s = &self.spec;
        let n = obs.len();
        let flat = s.channels * s.view_len;
        let mut view = Vec::with_capacity(n * flat);
        let mut actions = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        for o in obs {
            if o.view.len() != flat {
                return Err(Error::Width {
                    context: "observation view",
                    expected: flat,
                    got: o.view.len(),
                });
            }
            if o.instruction.len() > s.max_instr_len {
                return Err(Error::InstructionTooLong {
                    len: o.instruction.len(),
                    max: s.max_instr_len,
                });
            }
            if let Some(&token) = o.instruction.iter().find(|&&t| t >= s.vocab) {
                return Err(Error::UnknownToken { token, vocab: s.vocab });
            }
            view.extend_from_slice(&o.view);
            actions.push(o.prev_action);
            rewards.push(transform_reward(o.reward));
        }
        let view = tape.constant(Tensor::matrix(n, flat, view)?);
        let view = self.view.apply(tape, store, view)?;
        let instr = self.encode_instructions(tape, store, obs)?;
        let action = tape.constant(action_one_hot(&actions, s.actions)?);
        let reward = tape.constant(Tensor::matrix(n, 1, rewards)?);
        Ok(tape.concat(&[view, instr, action, reward], 1)?)
    }

    /// Runs the instruction LSTM over padded token sequences and sums the
    /// outputs at real (unpadded) positions.
    fn encode_instructions(&self, tape: &mut Tape, store: &ParamStore, obs: &[&Observation]) -> Result<Var> {
        let s = &self.spec;
        let n = obs.len();
        let longest = obs.iter().map(|o| o.instruction.len()).max().unwrap_or(0);
        if longest == 0 {
            return Ok(tape.constant(Tensor::zeros(vec![n, s.instr_width])));
        }
        let table = tape.param(store, self.embedding);
        let mut state: StateVars = self.instr.zero_state(tape, n);
        let mut total: Option<Var> = None;
        for pos in 0..longest {
            let mut one_hot = Tensor::zeros(vec![n, s.vocab]);
            let mut mask = Tensor::zeros(vec![n, 1]);
            for (r, o) in obs.iter().enumerate() {
                if let Some(&tok) = o.instruction.get(pos) {
                    one_hot.data_mut()[r * s.vocab + tok] = 1.0;
                    mask.data_mut()[r] = 1.0;
                }
            }
            let one_hot = tape.constant(one_hot);
            let x = tape.matmul(one_hot, table)?;
            let (next, out) = self.instr.step(tape, store, &state, x)?;
            state = next;
            let mask = tape.constant(mask);
            let masked = tape.mul(out, mask)?;
            total = Some(match total {
                None => masked,
                Some(t) => tape.add(t, masked)?,
            });
        }
        Ok(total.expect("longest > 0"))
    }
}
