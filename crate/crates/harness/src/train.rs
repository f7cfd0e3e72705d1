//! The training loop.

use std::collections::VecDeque;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pebble_autodiff::{Tape, Tensor, Var};
use pebble_core::history::FullUnroll;
use pebble_core::losses::{
    cpc_loss, discriminator_accuracy, pbl_forward_loss, pbl_reverse_loss, pixel_control_loss,
    sample_subsample_indices, unroll_selected, valid_pair_mask, LossReport, LossTerms, PartialBatch,
};
use pebble_core::nn::StateVars;
use pebble_core::probes::{collapse_metrics, CollapseMetrics, Probe};
use pebble_core::rl::{actor_critic_loss, transform_reward, vtrace, Adam};
use pebble_core::rng::{stream, Rng};
use pebble_core::Error as CoreError;
use pebble_envs::NUM_ACTIONS;
use rand::Rng as _;

use crate::agent::Agent;
use crate::config::{Behaviour, ExperimentConfig, Method};
use crate::envs::{log_softmax, Collector, ProbeTarget, Unroll};
use crate::log::{LogRecord, LogWriter};
use crate::{HarnessError, Result};

const AUX_STREAM: u64 = 4;
const PROBE_REPLAY_STREAM: u64 = 7;
const EVAL_STREAM_OFFSET: u64 = 1 << 40;

/// Value-level results of the agent's forward pass over an unroll.
pub struct Forward {
    pub z_all: Var,
    pub run: FullUnroll,
    /// `B_t` for all `T + 1` observations.
    pub outputs_all: Var,
    /// `B_t` for the first `T` observations.
    pub outputs: Var,
}

/// Encodes every observation with the torso and runs `h_f` from the
/// unroll's start state with its reset flags.
pub fn forward(tape: &mut Tape, agent: &Agent, u: &Unroll) -> Result<Forward> {
    let b = u.batch;
    let obs = u.obs_refs(u.obs.len());
    let z_all = agent.torso.encode(tape, &agent.store, &obs)?;
    let inputs = (0..=u.t_len)
        .map(|t| tape.slice(z_all, 0, t * b, b))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let start = StateVars::constant(tape, &u.start);
    let run = agent
        .history
        .unroll_full(tape, &agent.store, &start, &inputs, &u.resets)?;
    let outputs_all = tape.concat(&run.outputs, 0)?;
    let outputs = tape.slice(outputs_all, 0, 0, u.t_len * b)?;
    Ok(Forward {
        z_all,
        run,
        outputs_all,
        outputs,
    })
}

/// Statistics of one update.
#[derive(Clone, Debug)]
pub struct UpdateStats {
    pub report: LossReport,
    pub collapse: Option<CollapseMetrics>,
    pub probe_loss: Option<f64>,
    /// Discriminator accuracy on this minibatch, for CPC.
    pub cpc_accuracy: Option<f64>,
}

/// Probe cross-entropy on fresh data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeScore {
    pub loss: f64,
    pub steps: usize,
    /// Loss over steps at least `probe.memory_gap` after the object was
    /// last in view; `None` when no such step occurred.
    pub memory_loss: Option<f64>,
    pub memory_steps: usize,
}

pub struct Trainer {
    pub cfg: ExperimentConfig,
    pub agent: Agent,
    pub probe: Option<Probe>,
    adam: Adam,
    collector: Collector,
    aux_rng: Rng,
    /// Recent `(state, object cell)` pairs the probe trains on.
    probe_replay: VecDeque<(Vec<f64>, usize)>,
    probe_rng: Rng,
    pub frames: u64,
    pub updates: u64,
    pub episodes: u64,
}

fn zero(tape: &mut Tape) -> Var {
    tape.constant(Tensor::scalar(0.0))
}

/// Empty pair sets contribute a zero term so the report keeps its names.
fn or_empty<T>(r: pebble_core::Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(CoreError::EmptyIndexSet) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

impl Trainer {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let agent = Agent::new(cfg)?;
        let probe = if cfg.probe_active() {
            Some(agent.new_probe()?)
        } else {
            None
        };
        Ok(Self {
            cfg: cfg.clone(),
            adam: Adam::new(cfg.optim),
            collector: Collector::new(cfg, cfg.seed)?,
            aux_rng: stream(cfg.seed, AUX_STREAM),
            probe_replay: VecDeque::new(),
            probe_rng: stream(cfg.seed, PROBE_REPLAY_STREAM),
            agent,
            probe,
            frames: 0,
            updates: 0,
            episodes: 0,
        })
    }

    pub fn done(&self) -> bool {
        self.frames >= self.cfg.train.total_frames
    }

    /// Collects one unroll and takes one optimizer step. `diagnostics`
    /// also computes collapse metrics. Returns the finished episodes too.
    pub fn update(&mut self, diagnostics: bool) -> Result<(UpdateStats, Vec<(usize, f64)>)> {
        let t_len = self.cfg.train.unroll;
        let u = self.collector.collect(&self.agent, self.cfg.behaviour, t_len)?;
        let stats = self.learn(&u, diagnostics)?;
        self.frames += self.cfg.frames_per_update();
        self.updates += 1;
        self.episodes += u.finished.len() as u64;
        Ok((stats, u.finished))
    }

    fn learn(&mut self, u: &Unroll, diagnostics: bool) -> Result<UpdateStats> {
        let cfg = self.cfg.clone();
        let (t_len, b) = (u.t_len, u.batch);
        let n = t_len * b;
        let mut tape = Tape::new();
        let fw = forward(&mut tape, &self.agent, u)?;
        let mut terms = LossTerms::new();
        let mut value_rescale = None;

        if cfg.rl.enabled {
            value_rescale = Some(self.rl_terms(&mut tape, &fw, u, &mut terms)?);
        }

        let agent = &self.agent;
        let store = &agent.store;
        let obs = u.obs_refs(n);
        let resets = &u.resets[..t_len];
        let mut cpc_accuracy = None;
        let mut collapse_z = None;
        let partial = |tape: &mut Tape, rng: &mut Rng| -> Result<(PartialBatch, Vec<f64>)> {
            let idx = sample_subsample_indices(
                rng,
                t_len,
                cfg.pbl.horizon,
                cfg.pbl.time_subsample,
                cfg.pbl.future_subsample,
            )?;
            let pb = unroll_selected(tape, store, &agent.history, &fw.run.states[..t_len], &u.actions, &idx)?;
            let mask = valid_pair_mask(&pb.rows, resets);
            Ok((pb, mask))
        };
        match cfg.method {
            Method::RlOnly => {}
            Method::Pbl | Method::PblGrounded => {
                let z = agent.latent.encode(&mut tape, store, &obs)?;
                collapse_z = Some(z);
                let (pb, mask) = partial(&mut tape, &mut self.aux_rng)?;
                let fwd = or_empty(pbl_forward_loss(&mut tape, store, &agent.forward_head, &pb, z, &mask))?;
                let (l, r) = fwd.map_or_else(|| (zero(&mut tape), zero(&mut tape)), |f| (f.loss, f.regularizer));
                terms.add("pbl_forward", cfg.pbl.forward_weight, l);
                terms.add("forward_regularizer", 1.0, r);
                if cfg.method == Method::PblGrounded {
                    let z_rp = agent.projection.latents(&mut tape, store, &obs)?;
                    let fwd = or_empty(pbl_forward_loss(&mut tape, store, &agent.projection_head, &pb, z_rp, &mask))?;
                    let (l, r) = fwd.map_or_else(|| (zero(&mut tape), zero(&mut tape)), |f| (f.loss, f.regularizer));
                    terms.add("pbl_forward_projection", cfg.pbl.forward_weight, l);
                    terms.add("projection_regularizer", 1.0, r);
                }
                let rev = pbl_reverse_loss(&mut tape, store, &agent.reverse_head, z, fw.outputs)?;
                terms.add("pbl_reverse", cfg.pbl.reverse_weight, rev.loss);
                terms.add("reverse_regularizer", 1.0, rev.regularizer);
            }
            Method::PblRandomProjection => {
                let z = agent.projection.latents(&mut tape, store, &obs)?;
                collapse_z = Some(z);
                let (pb, mask) = partial(&mut tape, &mut self.aux_rng)?;
                let fwd = or_empty(pbl_forward_loss(&mut tape, store, &agent.forward_head, &pb, z, &mask))?;
                let (l, r) = fwd.map_or_else(|| (zero(&mut tape), zero(&mut tape)), |f| (f.loss, f.regularizer));
                terms.add("pbl_forward", cfg.pbl.forward_weight, l);
                terms.add("forward_regularizer", 1.0, r);
            }
            Method::Cpc => {
                let z = tape.slice(fw.z_all, 0, 0, n)?;
                let (pb, mask) = partial(&mut tape, &mut self.aux_rng)?;
                let out = or_empty(cpc_loss(
                    &mut tape,
                    store,
                    &agent.discriminator,
                    &pb,
                    z,
                    &mask,
                    cfg.cpc.negatives,
                    &mut self.aux_rng,
                ))?;
                let l = match out {
                    Some(o) => {
                        cpc_accuracy = Some(discriminator_accuracy(&o.positive_logits, &o.negative_logits));
                        o.loss
                    }
                    None => zero(&mut tape),
                };
                terms.add("cpc", cfg.cpc.weight, l);
            }
            Method::PixelControl => {
                let pc = &cfg.pixel_control;
                let l = pixel_control_loss(
                    &mut tape,
                    store,
                    &agent.pixel_head,
                    fw.outputs_all,
                    &u.actions,
                    &u.pixel_rewards,
                    &u.conts,
                    pc.n_steps,
                    pc.gamma,
                    NUM_ACTIONS,
                )?;
                terms.add("pixel_control", pc.weight, l);
            }
        }

        let total = terms.total(&mut tape)?;
        let mut report = terms.report(&tape);
        let total_value = tape.value(total).item();
        report.entries.push(pebble_core::losses::LossEntry {
            name: "total",
            weight: 0.0,
            value: total_value,
        });
        if !report.is_finite() {
            return Err(HarnessError::NonFiniteLoss {
                frames: self.frames,
                report: report.describe(),
            });
        }

        let collapse = if diagnostics {
            let rows = cfg.collapse_batch.min(n);
            let z = collapse_z.unwrap_or(fw.z_all);
            let zt = tape.value(z);
            let bt = tape.value(fw.outputs);
            let zs: Vec<Vec<f64>> = (0..rows).map(|i| zt.row(i).to_vec()).collect();
            let bs: Vec<Vec<f64>> = (0..rows).map(|i| bt.row(i).to_vec()).collect();
            let keys: Vec<Vec<u8>> = obs[..rows].iter().map(|o| o.to_bytes()).collect();
            Some(collapse_metrics(&zs, &bs, &keys)?)
        } else {
            None
        };

        let outputs = tape.value(fw.outputs).clone();
        let closing = fw.run.states[t_len - 1].values(&tape);

        let (w, bias) = self.agent.value_output_layer();
        let store = &mut self.agent.store;
        store.zero_grads();
        tape.backward(total, store)?;
        if let Some(scale) = value_rescale {
            for id in [w, bias] {
                let g = store.grad_mut(id);
                let k = scale.len();
                for (i, v) in g.data_mut().iter_mut().enumerate() {
                    *v /= scale[i % k];
                }
            }
        }
        self.adam.step(store)?;
        self.collector.state = closing;

        let probe_loss = match &mut self.probe {
            Some(p) => {
                let cells: Vec<usize> = u.probe_targets[..t_len]
                    .iter()
                    .flatten()
                    .map(|t| t.expect("cube-room target").cell)
                    .collect();
                // scored before the probe has seen these states
                let fresh = p.loss(&outputs, &cells)?;
                let capacity = self.cfg.probe.replay.max(cells.len());
                for (r, &c) in cells.iter().enumerate() {
                    if self.probe_replay.len() == capacity {
                        self.probe_replay.pop_front();
                    }
                    self.probe_replay.push_back((outputs.row(r).to_vec(), c));
                }
                for _ in 0..self.cfg.probe.steps_per_update {
                    let picks: Vec<usize> = (0..cells.len())
                        .map(|_| self.probe_rng.gen_range(0..self.probe_replay.len()))
                        .collect();
                    let rows: Vec<Vec<f64>> = picks.iter().map(|&i| self.probe_replay[i].0.clone()).collect();
                    let targets: Vec<usize> = picks.iter().map(|&i| self.probe_replay[i].1).collect();
                    p.train_step(&Tensor::from_rows(&rows)?, &targets)?;
                }
                Some(fresh)
            }
            None => None,
        };
        Ok(UpdateStats {
            report,
            collapse,
            probe_loss,
            cpc_accuracy,
        })
    }

    /// Adds the actor-critic terms. PopArt statistics are updated here, so
    /// the value outputs recorded on the tape (old parameters) are mapped
    /// to the new normalization in-graph; the returned per-task factors
    /// `sigma_old / sigma_new` turn the output-layer gradients into
    /// gradients with respect to the rescaled parameters.
    fn rl_terms(&mut self, tape: &mut Tape, fw: &Forward, u: &Unroll, terms: &mut LossTerms) -> Result<Vec<f64>> {
        let cfg = &self.cfg;
        let agent = &self.agent;
        let (t_len, b) = (u.t_len, u.batch);
        let n = t_len * b;
        let logits = agent.policy.apply(tape, &agent.store, fw.outputs)?;
        let values_all = agent.value.apply(tape, &agent.store, fw.outputs_all)?;
        let lv = tape.value(logits).clone();
        let vv = tape.value(values_all).clone();
        let k = vv.cols();
        let popart = &agent.popart;

        let mut targets = vec![0.0; n];
        let mut advantages = vec![0.0; n];
        let mut pairs = Vec::with_capacity(n);
        for col in 0..b {
            let values: Vec<f64> = (0..=t_len)
                .map(|t| {
                    let task = u.tasks[t][col];
                    popart.unnormalize(task, vv.row(t * b + col)[task])
                })
                .collect();
            let rewards: Vec<f64> = (0..t_len).map(|t| transform_reward(u.rewards[t][col])).collect();
            let blogp: Vec<f64> = (0..t_len).map(|t| u.behaviour_logp[t][col]).collect();
            let tlogp: Vec<f64> = (0..t_len)
                .map(|t| log_softmax(lv.row(t * b + col))[u.actions[t][col]])
                .collect();
            let conts: Vec<bool> = (0..t_len).map(|t| u.conts[t][col]).collect();
            let out = vtrace(&cfg.rl.vtrace, &values, &rewards, &blogp, &tlogp, &conts)?;
            for t in 0..t_len {
                let row = t * b + col;
                targets[row] = out.vs[t];
                advantages[row] = out.advantages[t];
                pairs.push((u.tasks[t][col], out.vs[t]));
            }
        }
        // keep the update independent of column order
        pairs.sort_by_key(|p| p.0);

        let old_mu = self.agent.popart.mu.clone();
        let old_sigma: Vec<f64> = (0..k).map(|i| self.agent.popart.sigma(i)).collect();
        let (w, bias) = self.agent.value_output_layer();
        self.agent.popart.update(&pairs, &mut self.agent.store, w, bias)?;
        let popart = &self.agent.popart;
        let new_sigma: Vec<f64> = (0..k).map(|i| popart.sigma(i)).collect();
        let scale: Vec<f64> = (0..k).map(|i| old_sigma[i] / new_sigma[i]).collect();
        let shift: Vec<f64> = (0..k).map(|i| (old_mu[i] - popart.mu[i]) / new_sigma[i]).collect();

        let tasks: Vec<usize> = u.tasks[..t_len].iter().flatten().copied().collect();
        let actions: Vec<usize> = u.actions.iter().flatten().copied().collect();
        for row in 0..n {
            let task = tasks[row];
            targets[row] = popart.normalize(task, targets[row]);
            advantages[row] /= new_sigma[task];
        }
        let values = tape.slice(values_all, 0, 0, n)?;
        let s = tape.constant(Tensor::matrix(1, k, scale.clone())?);
        let c = tape.constant(Tensor::matrix(1, k, shift)?);
        let values = tape.mul(values, s)?;
        let values = tape.add(values, c)?;
        let ac = actor_critic_loss(tape, logits, values, &actions, &tasks, &targets, &advantages)?;
        terms.add("rl_policy", 1.0, ac.policy);
        terms.add("rl_value", cfg.rl.baseline_weight, ac.value);
        terms.add("rl_entropy", -cfg.rl.entropy_cost, ac.entropy);
        Ok(scale)
    }

    /// Probe loss of the current agent and probe on a fresh rollout.
    pub fn probe_evaluation(&self) -> Result<ProbeScore> {
        let probe = self
            .probe
            .as_ref()
            .ok_or_else(|| HarnessError::Invalid("probes run on the cube room only".into()))?;
        let samples = probe_rollout(&self.agent, self.cfg.seed + EVAL_STREAM_OFFSET)?;
        probe_score(probe, &samples, self.cfg.probe.memory_gap)
    }

    /// Discriminator accuracy on `unrolls` fresh minibatches.
    pub fn cpc_heldout_accuracy(&self, unrolls: usize) -> Result<f64> {
        let mut collector = Collector::new(&self.cfg, self.cfg.seed + EVAL_STREAM_OFFSET)?;
        let mut rng = stream(self.cfg.seed + EVAL_STREAM_OFFSET, AUX_STREAM);
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        let cfg = self.cfg.clone();
        for _ in 0..unrolls {
            let u = collector.collect(&self.agent, cfg.behaviour, cfg.train.unroll)?;
            let mut tape = Tape::new();
            let fw = forward(&mut tape, &self.agent, &u)?;
            collector.state = fw.run.states[u.t_len - 1].values(&tape);
            let n = u.t_len * u.batch;
            let z = tape.slice(fw.z_all, 0, 0, n)?;
            let idx = sample_subsample_indices(&mut rng, u.t_len, cfg.pbl.horizon, cfg.pbl.time_subsample, cfg.pbl.future_subsample)?;
            let store = &self.agent.store;
            let pb = unroll_selected(&mut tape, store, &self.agent.history, &fw.run.states[..u.t_len], &u.actions, &idx)?;
            let mask = valid_pair_mask(&pb.rows, &u.resets[..u.t_len]);
            if let Some(out) = or_empty(cpc_loss(&mut tape, store, &self.agent.discriminator, &pb, z, &mask, cfg.cpc.negatives, &mut rng))? {
                pos.extend(out.positive_logits);
                neg.extend(out.negative_logits);
            }
        }
        Ok(discriminator_accuracy(&pos, &neg))
    }
}

/// Agent state and probe target of one step of a probe rollout.
#[derive(Clone, Debug)]
pub struct ProbeSample {
    pub slot: usize,
    /// Step index within the rollout.
    pub step: usize,
    pub target: ProbeTarget,
    pub output: Vec<f64>,
}

/// Runs the frozen agent over about `probe.eval_steps` steps per slot of
/// uniform-policy cube-room play and records every agent state.
pub fn probe_rollout(agent: &Agent, seed: u64) -> Result<Vec<ProbeSample>> {
    let cfg = &agent.cfg;
    if !cfg.probe_active() {
        return Err(HarnessError::Invalid("probes run on the cube room only".into()));
    }
    let mut collector = Collector::new(cfg, seed)?;
    let chunks = cfg.probe.eval_steps.div_ceil(cfg.train.unroll);
    let mut out = Vec::with_capacity(chunks * cfg.train.unroll * cfg.train.batch);
    for chunk in 0..chunks {
        let u = collector.collect(agent, Behaviour::Random, cfg.train.unroll)?;
        let mut tape = Tape::new();
        let fw = forward(&mut tape, agent, &u)?;
        collector.state = fw.run.states[u.t_len - 1].values(&tape);
        let outputs = tape.value(fw.outputs);
        for t in 0..u.t_len {
            for slot in 0..u.batch {
                out.push(ProbeSample {
                    slot,
                    step: chunk * u.t_len + t,
                    target: u.probe_targets[t][slot].expect("cube-room target"),
                    output: outputs.row(t * u.batch + slot).to_vec(),
                });
            }
        }
    }
    Ok(out)
}

fn mean_probe_loss(probe: &Probe, samples: &[&ProbeSample]) -> Result<f64> {
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.output.clone()).collect();
    let cells: Vec<usize> = samples.iter().map(|s| s.target.cell).collect();
    Ok(probe.loss(&Tensor::from_rows(&rows)?, &cells)?)
}

/// Mean cross-entropy over all samples and over the memory subset.
pub fn probe_score(probe: &Probe, samples: &[ProbeSample], memory_gap: usize) -> Result<ProbeScore> {
    if samples.is_empty() {
        return Err(HarnessError::Invalid("no probe samples".into()));
    }
    let all: Vec<&ProbeSample> = samples.iter().collect();
    let memory: Vec<&ProbeSample> = samples
        .iter()
        .filter(|s| s.target.steps_since_seen.is_some_and(|k| k >= memory_gap))
        .collect();
    Ok(ProbeScore {
        loss: mean_probe_loss(probe, &all)?,
        steps: all.len(),
        memory_loss: if memory.is_empty() {
            None
        } else {
            Some(mean_probe_loss(probe, &memory)?)
        },
        memory_steps: memory.len(),
    })
}

pub struct TrainOutcome {
    pub trainer: Trainer,
    pub records: Vec<LogRecord>,
    pub last_report: LossReport,
}

fn checkpoint_path(dir: &Path, frames: u64) -> PathBuf {
    dir.join(format!("checkpoint-{frames:012}.ckpt"))
}

/// Trains `cfg` with `seed`. With `out`, writes `config.txt`, `log.csv`,
/// `timing.csv`, periodic checkpoints and `final.ckpt` into it.
pub fn run_training(cfg: &ExperimentConfig, seed: u64, out: Option<&Path>) -> Result<TrainOutcome> {
    let mut cfg = cfg.clone();
    cfg.seed = seed;
    let mut trainer = Trainer::new(&cfg)?;
    let tasks = cfg.num_tasks();
    let mut log = match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("config.txt"), cfg.to_text())?;
            Some((LogWriter::create(&dir.join("log.csv"), tasks)?, fs::File::create(dir.join("timing.csv"))?))
        }
        None => None,
    };
    if let Some((_, timing)) = &mut log {
        writeln!(timing, "frames,wall_seconds")?;
    }
    let started = Instant::now();
    let log_every = cfg.log_every();
    let ck_every = cfg.checkpoint_every();
    let per_update = cfg.frames_per_update();
    let mut records = Vec::new();
    let mut window_returns: Vec<Vec<f64>> = vec![Vec::new(); tasks];
    let mut window_probe = Vec::new();
    let mut last_report = LossReport::default();
    log::info!(
        "training {} on {} for {} frames, seed {seed}",
        cfg.method.name(),
        cfg.env.kind.name(),
        cfg.train.total_frames
    );
    while !trainer.done() {
        let before = trainer.frames;
        let after = before + per_update;
        let last = after >= cfg.train.total_frames;
        let due = last || after / log_every > before / log_every;
        let (stats, finished) = trainer.update(due)?;
        for (task, ret) in finished {
            window_returns[task].push(ret);
        }
        window_probe.extend(stats.probe_loss);
        log::debug!("frames {after}: {}", stats.report.describe());
        if due {
            let record = LogRecord::new(
                trainer.frames,
                trainer.updates,
                &stats.report,
                &window_returns,
                trainer.episodes,
                stats.collapse.as_ref(),
                (!window_probe.is_empty()).then(|| window_probe.iter().sum::<f64>() / window_probe.len() as f64),
            );
            log::info!(
                "frames {} total loss {:.4e} episodes {}",
                trainer.frames,
                stats.report.value("total").unwrap_or(f64::NAN),
                trainer.episodes
            );
            if let Some((writer, timing)) = &mut log {
                writer.append(&record)?;
                writeln!(timing, "{},{:.3}", trainer.frames, started.elapsed().as_secs_f64())?;
            }
            records.push(record);
            window_returns.iter_mut().for_each(Vec::clear);
            window_probe.clear();
        }
        if let Some(dir) = out {
            if !last && after / ck_every > before / ck_every {
                let ck = trainer.agent.checkpoint(trainer.probe.as_ref());
                ck.save(&checkpoint_path(dir, trainer.frames))?;
            }
        }
        last_report = stats.report;
    }
    if let Some(dir) = out {
        let ck = trainer.agent.checkpoint(trainer.probe.as_ref());
        ck.save(&checkpoint_path(dir, trainer.frames))?;
        ck.save(&dir.join("final.ckpt"))?;
    }
    Ok(TrainOutcome {
        trainer,
        records,
        last_report,
    })
}
