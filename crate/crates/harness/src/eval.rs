//! Policy evaluation and the per-task score baselines.

use pebble_core::nn::RecurrentState;
use pebble_core::rng::stream;
use pebble_envs::{scripted_optimal_action, uniform_random_policy, Observation};
use rand::Rng as _;

use crate::agent::Agent;
use crate::config::ExperimentConfig;
use crate::envs::{sample_actions, AnyEnv};
use crate::{HarnessError, Result};

const EVAL_ACTION_STREAM: u64 = 5;
const EVAL_RESET_STREAM: u64 = 6;

pub enum EvalPolicy<'a> {
    /// Actions sampled from the agent's policy.
    Agent(&'a Agent),
    Uniform,
    /// Shortest path with knowledge of the hidden task; key-door only.
    Scripted,
}

/// Mean raw episodic return per task. Episode `i` runs task `i mod K`,
/// so every task gets `episodes / K` episodes (rounded up for the first
/// ones).
pub fn evaluate(cfg: &ExperimentConfig, policy: EvalPolicy<'_>, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    if episodes == 0 {
        return Err(HarnessError::Invalid("evaluation needs at least one episode".into()));
    }
    cfg.validate()?;
    let tasks = cfg.num_tasks();
    let mut env = AnyEnv::new(cfg)?;
    let mut action_rng = stream(seed, EVAL_ACTION_STREAM);
    let mut reset_rng = stream(seed, EVAL_RESET_STREAM);
    let mut sums = vec![0.0; tasks];
    let mut counts = vec![0usize; tasks];
    for i in 0..episodes {
        let task = i % tasks;
        let reset_seed: u64 = reset_rng.gen();
        let mut obs = match &mut env {
            AnyEnv::KeyDoor(e) => e.reset_with_task(reset_seed, task),
            AnyEnv::CubeRoom(_) => env.reset(reset_seed),
        };
        let mut state = match &policy {
            EvalPolicy::Agent(a) => Some(RecurrentState::zeros(&a.cfg.lstm_spec(), 1)),
            _ => None,
        };
        let mut first = true;
        let mut ret = 0.0;
        loop {
            let action = match &policy {
                EvalPolicy::Agent(a) => {
                    let refs: [&Observation; 1] = [&obs];
                    let (next, out) = a.observe(state.as_ref().expect("agent state"), &refs, &[first])?;
                    state = Some(next);
                    sample_actions(&a.logits(&out)?, &mut action_rng).0[0]
                }
                EvalPolicy::Uniform => uniform_random_policy(&mut action_rng),
                EvalPolicy::Scripted => match &env {
                    AnyEnv::KeyDoor(e) => scripted_optimal_action(e),
                    AnyEnv::CubeRoom(_) => {
                        return Err(HarnessError::Invalid("the scripted policy needs the key-door room".into()))
                    }
                },
            };
            first = false;
            let step = env.step(action)?;
            ret += step.reward;
            if !step.cont {
                break;
            }
            obs = step.observation;
        }
        sums[task] += ret;
        counts[task] += 1;
    }
    Ok(sums.iter().zip(&counts).map(|(s, &c)| if c == 0 { f64::NAN } else { s / c as f64 }).collect())
}

/// `(u_i, h_i)` per task: uniform-policy and scripted-policy returns.
pub fn reference_returns(cfg: &ExperimentConfig, episodes: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let u = evaluate(cfg, EvalPolicy::Uniform, episodes, seed)?;
    let h = evaluate(cfg, EvalPolicy::Scripted, episodes, seed)?;
    Ok(u.into_iter().zip(h).collect())
}
