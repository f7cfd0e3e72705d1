//! Batched environment stepping and unroll collection.

use pebble_autodiff::Tensor;
use pebble_core::losses::pseudo_rewards;
use pebble_core::nn::RecurrentState;
use pebble_core::rng::{stream, Rng};
use pebble_envs::{
    uniform_random_policy, CubeRoom, CubeRoomConfig, Environment, GroundTruth, KeyDoor, KeyDoorConfig,
    Observation, Step, NUM_ACTIONS,
};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;

use crate::agent::Agent;
use crate::config::{Behaviour, EnvKind, ExperimentConfig};
use crate::Result;

const ACTION_STREAM: u64 = 3;
const RESET_STREAM_BASE: u64 = 100;

/// Either gridworld, with the key-door extras reachable.
#[derive(Clone, Debug)]
pub enum AnyEnv {
    CubeRoom(CubeRoom),
    KeyDoor(KeyDoor),
}

impl AnyEnv {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let e = &cfg.env;
        Ok(match e.kind {
            EnvKind::CubeRoom => AnyEnv::CubeRoom(CubeRoom::new(CubeRoomConfig {
                grid: e.grid,
                episode_limit: e.episode_limit,
                random_start: e.random_start,
            })?),
            EnvKind::KeyDoor => AnyEnv::KeyDoor(KeyDoor::new(KeyDoorConfig {
                grid: e.grid,
                episode_limit: e.episode_limit,
                tasks: e.tasks.clone(),
                instructions: e.instructions,
            })?),
        })
    }

    pub fn env(&self) -> &dyn Environment {
        match self {
            AnyEnv::CubeRoom(e) => e,
            AnyEnv::KeyDoor(e) => e,
        }
    }

    pub fn env_mut(&mut self) -> &mut dyn Environment {
        match self {
            AnyEnv::CubeRoom(e) => e,
            AnyEnv::KeyDoor(e) => e,
        }
    }

    pub fn reset(&mut self, seed: u64) -> Observation {
        self.env_mut().reset(seed)
    }

    pub fn step(&mut self, action: usize) -> Result<Step> {
        Ok(self.env_mut().step(action)?)
    }

    pub fn ground_truth(&self) -> GroundTruth {
        self.env().ground_truth()
    }
}

/// Object cell and steps since it was last seen, for cube-room probes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProbeTarget {
    pub cell: usize,
    pub steps_since_seen: Option<usize>,
}

fn probe_target(gt: &GroundTruth) -> Option<ProbeTarget> {
    match *gt {
        GroundTruth::CubeRoom {
            object_cell,
            steps_since_seen,
            ..
        } => Some(ProbeTarget {
            cell: object_cell,
            steps_since_seen,
        }),
        GroundTruth::KeyDoor { .. } => None,
    }
}

/// One `T x B` minibatch in time-major order. Per-observation fields have
/// `T + 1` rows: the last one is the bootstrap observation, which also
/// opens the next unroll.
#[derive(Clone, Debug)]
pub struct Unroll {
    pub t_len: usize,
    pub batch: usize,
    /// `(T + 1) * B` observations, row `t * B + b`.
    pub obs: Vec<Observation>,
    /// `resets[t][b]`: observation `t` starts a new episode.
    pub resets: Vec<Vec<bool>>,
    /// Task id behind each observation.
    pub tasks: Vec<Vec<usize>>,
    pub probe_targets: Vec<Vec<Option<ProbeTarget>>>,
    pub actions: Vec<Vec<usize>>,
    /// Raw rewards.
    pub rewards: Vec<Vec<f64>>,
    pub conts: Vec<Vec<bool>>,
    pub behaviour_logp: Vec<Vec<f64>>,
    /// Per-cell pixel-change rewards between the observation and the one
    /// the environment returned for the action, before any reset.
    pub pixel_rewards: Vec<Vec<Vec<f64>>>,
    /// Recurrent state entering observation 0.
    pub start: RecurrentState,
    /// `(task, raw return)` of episodes that ended inside this unroll.
    pub finished: Vec<(usize, f64)>,
}

impl Unroll {
    pub fn obs_refs(&self, rows: usize) -> Vec<&Observation> {
        self.obs[..rows].iter().collect()
    }
}

/// `B` environment slots that persist across unrolls.
pub struct Collector {
    envs: Vec<AnyEnv>,
    reset_rngs: Vec<Rng>,
    action_rng: Rng,
    current: Vec<Observation>,
    fresh: Vec<bool>,
    returns: Vec<f64>,
    /// State that closed the previous unroll, per slot.
    pub state: RecurrentState,
}

impl Collector {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let b = cfg.train.batch;
        let mut envs = Vec::with_capacity(b);
        let mut reset_rngs = Vec::with_capacity(b);
        let mut current = Vec::with_capacity(b);
        for slot in 0..b {
            let mut env = AnyEnv::new(cfg)?;
            let mut rng = stream(seed, RESET_STREAM_BASE + slot as u64);
            current.push(env.reset(rng.gen()));
            envs.push(env);
            reset_rngs.push(rng);
        }
        Ok(Self {
            envs,
            reset_rngs,
            action_rng: stream(seed, ACTION_STREAM),
            current,
            fresh: vec![true; b],
            returns: vec![0.0; b],
            state: RecurrentState::zeros(&cfg.lstm_spec(), b),
        })
    }

    /// Steps every slot `t_len` times. With [`Behaviour::Agent`] actions
    /// are sampled from the current policy; the returned unroll records the
    /// recurrent state it started from.
    pub fn collect(&mut self, agent: &Agent, behaviour: Behaviour, t_len: usize) -> Result<Unroll> {
        let b = self.envs.len();
        let pixel = agent.cfg.pixel_control_spec();
        let want_pixels = agent.cfg.method == crate::Method::PixelControl;
        let mut u = Unroll {
            t_len,
            batch: b,
            obs: Vec::with_capacity((t_len + 1) * b),
            resets: Vec::with_capacity(t_len + 1),
            tasks: Vec::with_capacity(t_len + 1),
            probe_targets: Vec::with_capacity(t_len + 1),
            actions: Vec::with_capacity(t_len),
            rewards: Vec::with_capacity(t_len),
            conts: Vec::with_capacity(t_len),
            behaviour_logp: Vec::with_capacity(t_len),
            pixel_rewards: Vec::with_capacity(t_len),
            start: self.state.clone(),
            finished: Vec::new(),
        };
        let mut state = self.state.clone();
        for t in 0..=t_len {
            u.obs.extend(self.current.iter().cloned());
            u.resets.push(self.fresh.clone());
            let truths: Vec<GroundTruth> = self.envs.iter().map(AnyEnv::ground_truth).collect();
            u.tasks.push(truths.iter().map(GroundTruth::task_id).collect());
            u.probe_targets.push(truths.iter().map(probe_target).collect());
            if t == t_len {
                break;
            }
            let (actions, logp) = match behaviour {
                Behaviour::Random => (
                    (0..b).map(|_| uniform_random_policy(&mut self.action_rng)).collect(),
                    vec![-(NUM_ACTIONS as f64).ln(); b],
                ),
                Behaviour::Agent => {
                    let obs: Vec<&Observation> = self.current.iter().collect();
                    let (next, out) = agent.observe(&state, &obs, &self.fresh)?;
                    state = next;
                    let logits = agent.logits(&out)?;
                    sample_actions(&logits, &mut self.action_rng)
                }
            };
            let mut rewards = Vec::with_capacity(b);
            let mut conts = Vec::with_capacity(b);
            let mut pixels = Vec::with_capacity(if want_pixels { b } else { 0 });
            for slot in 0..b {
                let step = self.envs[slot].step(actions[slot])?;
                if want_pixels {
                    pixels.push(pseudo_rewards(&pixel, &self.current[slot].view, &step.observation.view)?);
                }
                self.returns[slot] += step.reward;
                rewards.push(step.reward);
                conts.push(step.cont);
                if step.cont {
                    self.current[slot] = step.observation;
                    self.fresh[slot] = false;
                } else {
                    u.finished.push((truths[slot].task_id(), self.returns[slot]));
                    self.returns[slot] = 0.0;
                    let seed = self.reset_rngs[slot].gen();
                    self.current[slot] = self.envs[slot].reset(seed);
                    self.fresh[slot] = true;
                }
            }
            u.actions.push(actions);
            u.behaviour_logp.push(logp);
            u.rewards.push(rewards);
            u.conts.push(conts);
            u.pixel_rewards.push(pixels);
        }
        self.state = state;
        Ok(u)
    }
}

/// Softmax sampling per row; returns actions and their log-probabilities.
pub fn sample_actions(logits: &Tensor, rng: &mut Rng) -> (Vec<usize>, Vec<f64>) {
    let (rows, cols) = logits.dims2();
    let mut actions = Vec::with_capacity(rows);
    let mut logp = Vec::with_capacity(rows);
    for r in 0..rows {
        let lp = log_softmax(&logits.data()[r * cols..(r + 1) * cols]);
        let probs: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
        let a = WeightedIndex::new(&probs).expect("softmax weights are positive").sample(rng);
        actions.push(a);
        logp.push(lp[a]);
    }
    (actions, logp)
}

pub fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}
