use pebble_autodiff::{Tape, Tensor, Var};

use crate::{Error, Result};

pub const BASELINE_WEIGHT: f64 = 0.4;
pub const ENTROPY_COST: f64 = 5e-3;

/// Unweighted actor-critic terms; weights are applied by the caller's
/// loss report.
#[derive(Clone, Copy, Debug)]
pub struct ActorCriticTerms {
    /// `-mean(adv * log pi(a))`.
    pub policy: Var,
    /// Mean squared error between the task's normalized value output and
    /// its normalized target.
    pub value: Var,
    /// Mean per-step policy entropy.
    pub entropy: Var,
}

/// `logits: [n, actions]`, `values: [n, tasks]` (normalized space). The
/// targets and advantages are plain numbers, so no gradient reaches them.
pub fn actor_critic_loss(
    tape: &mut Tape,
    logits: Var,
    values: Var,
    actions: &[usize],
    tasks: &[usize],
    value_targets: &[f64],
    advantages: &[f64],
) -> Result<ActorCriticTerms> {
    let (n, num_actions) = tape.value(logits).dims2();
    for len in [actions.len(), tasks.len(), value_targets.len(), advantages.len(), tape.value(values).rows()] {
        if len != n {
            return Err(Error::Length {
                context: "actor-critic inputs",
                a: len,
                b: n,
            });
        }
    }
    if !tape.value(logits).is_finite() {
        return Err(Error::NonFinite {
            what: "policy logits".into(),
        });
    }
    if let Some(&a) = actions.iter().find(|&&a| a >= num_actions) {
        return Err(Error::ActionIndex {
            index: a,
            count: num_actions,
        });
    }
    let num_tasks = tape.value(values).cols();
    if let Some(&t) = tasks.iter().find(|&&t| t >= num_tasks) {
        return Err(Error::Invalid(format!("task id {t} out of range for {num_tasks} value outputs")));
    }

    let logp = tape.log_softmax(logits)?;
    let chosen = tape.pick_columns(logp, actions.to_vec())?;
    let adv = tape.constant(Tensor::matrix(n, 1, advantages.to_vec())?);
    let weighted = tape.mul(chosen, adv)?;
    let policy = tape.mean(weighted)?;
    let policy = tape.scale(policy, -1.0)?;

    let v = tape.pick_columns(values, tasks.to_vec())?;
    let target = tape.constant(Tensor::matrix(n, 1, value_targets.to_vec())?);
    let err = tape.squared_difference(v, target)?;
    let value = tape.mean(err)?;

    let p = tape.softmax(logits)?;
    let plogp = tape.mul(p, logp)?;
    let neg_h = tape.sum_rows(plogp)?;
    let neg_h = tape.mean(neg_h)?;
    let entropy = tape.scale(neg_h, -1.0)?;
    Ok(ActorCriticTerms { policy, value, entropy })
}
