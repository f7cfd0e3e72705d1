//! Full-history and partial-history compression.
//!
//! `h_f` folds every encoded observation into the agent state `B_t`. `h_p`
//! starts from the LSTM state `h_f` produced at time `t` and consumes only
//! one-hot actions, giving `B_{t,k}` after `k` steps.

use pebble_autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use rand::Rng;

use crate::nn::{action_one_hot, Lstm, LstmSpec, RecurrentState, StateVars};
use crate::{Error, Result};

/// `B_t`: LSTM state plus the skip-concatenated output.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentState {
    pub state: RecurrentState,
    pub output: Tensor,
}

/// `B_{t,k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialState {
    pub base_time: usize,
    pub offset: usize,
    pub state: RecurrentState,
    pub output: Tensor,
}

/// All-zero state and output for `rows` batch entries.
pub fn initial_state(spec: &LstmSpec, rows: usize) -> AgentState {
    AgentState {
        state: RecurrentState::zeros(spec, rows),
        output: Tensor::zeros(vec![rows, spec.output_width()]),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Consumer {
    Mlp,
    Rnn,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Representation<'a> {
    Output(&'a Tensor),
    State(&'a RecurrentState),
}

/// MLP heads read the LSTM output; recurrent consumers read the state.
pub fn state_or_output(b: &AgentState, consumer: Consumer) -> Representation<'_> {
    match consumer {
        Consumer::Mlp => Representation::Output(&b.output),
        Consumer::Rnn => Representation::State(&b.state),
    }
}

/// Tape-side result of [`HistoryModel::unroll_full`], one entry per step.
#[derive(Clone, Debug)]
pub struct FullUnroll {
    pub states: Vec<StateVars>,
    pub outputs: Vec<Var>,
}

/// The twin recurrent networks. Their parameter sets are disjoint.
#[derive(Clone, Debug)]
pub struct HistoryModel {
    pub full: Lstm,
    pub partial: Lstm,
    pub num_actions: usize,
}

impl HistoryModel {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        input: usize,
        layers: Vec<usize>,
        skip: bool,
        num_actions: usize,
    ) -> Result<Self> {
        let full = Lstm::new(
            store,
            rng,
            &format!("{name}.full"),
            LstmSpec {
                input,
                layers: layers.clone(),
                skip,
            },
        )?;
        let partial = Lstm::new(
            store,
            rng,
            &format!("{name}.partial"),
            LstmSpec {
                input: num_actions,
                layers,
                skip,
            },
        )?;
        Ok(Self {
            full,
            partial,
            num_actions,
        })
    }

    pub fn spec(&self) -> &LstmSpec {
        self.full.spec()
    }

    /// Width of `B_t` as seen by MLP heads.
    pub fn output_width(&self) -> usize {
        self.full.spec().output_width()
    }

    pub fn full_params(&self) -> Vec<ParamId> {
        self.full.params()
    }

    pub fn partial_params(&self) -> Vec<ParamId> {
        self.partial.params()
    }

    /// Runs `h_f` over `inputs` (`[batch, d_in]` per step). `resets[t][b]`
    /// replaces the state entering step `t` for row `b` with zeros, so a new
    /// episode never sees the previous one.
    pub fn unroll_full(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        start: &StateVars,
        inputs: &[Var],
        resets: &[Vec<bool>],
    ) -> Result<FullUnroll> {
        if inputs.len() != resets.len() {
            return Err(Error::Length {
                context: "unroll inputs vs reset flags",
                a: inputs.len(),
                b: resets.len(),
            });
        }
        let mut state = start.clone();
        let mut states = Vec::with_capacity(inputs.len());
        let mut outputs = Vec::with_capacity(inputs.len());
        for (&x, reset) in inputs.iter().zip(resets) {
            let rows = state.rows(tape);
            if reset.len() != rows {
                return Err(Error::Length {
                    context: "reset flags vs batch",
                    a: reset.len(),
                    b: rows,
                });
            }
            if reset.iter().any(|&r| r) {
                state = zero_rows(tape, &state, reset)?;
            }
            let (next, out) = self.full.step(tape, store, &state, x)?;
            states.push(next.clone());
            outputs.push(out);
            state = next;
        }
        Ok(FullUnroll { states, outputs })
    }

    /// Runs `h_p` from `base` for `actions.len()` steps; `actions[k]` holds
    /// one action per row of `base`. Returns state and output per offset.
    pub fn unroll_partial(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        base: &StateVars,
        actions: &[Vec<usize>],
    ) -> Result<Vec<(StateVars, Var)>> {
        if actions.is_empty() {
            return Err(Error::Invalid("partial unroll needs a horizon of at least 1".into()));
        }
        let mut state = base.clone();
        let mut out = Vec::with_capacity(actions.len());
        for step in actions {
            let x = tape.constant(action_one_hot(step, self.num_actions)?);
            let (next, o) = self.partial.step(tape, store, &state, x)?;
            out.push((next.clone(), o));
            state = next;
        }
        Ok(out)
    }

    /// Value-level [`HistoryModel::unroll_full`].
    pub fn unroll_full_values(
        &self,
        store: &ParamStore,
        start: &AgentState,
        inputs: &[Tensor],
        resets: &[Vec<bool>],
    ) -> Result<Vec<AgentState>> {
        start.state.check(self.full.spec())?;
        let mut tape = Tape::new();
        let s = StateVars::constant(&mut tape, &start.state);
        let xs: Vec<Var> = inputs.iter().map(|x| tape.constant(x.clone())).collect();
        let run = self.unroll_full(&mut tape, store, &s, &xs, resets)?;
        Ok(run
            .states
            .iter()
            .zip(&run.outputs)
            .map(|(s, &o)| AgentState {
                state: s.values(&tape),
                output: tape.value(o).clone(),
            })
            .collect())
    }

    /// Value-level [`HistoryModel::unroll_partial`] from the agent state at
    /// time `base_time`.
    pub fn unroll_partial_values(
        &self,
        store: &ParamStore,
        base: &AgentState,
        base_time: usize,
        actions: &[Vec<usize>],
    ) -> Result<Vec<PartialState>> {
        base.state.check(self.partial.spec())?;
        let mut tape = Tape::new();
        let s = StateVars::constant(&mut tape, &base.state);
        let run = self.unroll_partial(&mut tape, store, &s, actions)?;
        Ok(run
            .iter()
            .enumerate()
            .map(|(k, (s, o))| PartialState {
                base_time,
                offset: k + 1,
                state: s.values(&tape),
                output: tape.value(*o).clone(),
            })
            .collect())
    }
}

/// Zeroes the rows flagged in `reset`. Adding `+0.0` after the mask turns
/// `-0.0` into `+0.0`, so a reset row is bit-identical to a fresh state.
fn zero_rows(tape: &mut Tape, state: &StateVars, reset: &[bool]) -> Result<StateVars> {
    let keep: Vec<f64> = reset.iter().map(|&r| if r { 0.0 } else { 1.0 }).collect();
    let keep = tape.constant(Tensor::matrix(reset.len(), 1, keep)?);
    let masked = state.mask_rows(tape, keep)?;
    let mut layers = Vec::with_capacity(masked.layers.len());
    for (c, h) in masked.layers {
        layers.push((tape.add_scalar(c, 0.0)?, tape.add_scalar(h, 0.0)?));
    }
    Ok(StateVars { layers })
}
