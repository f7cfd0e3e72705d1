//! Every network of the agent in one parameter store.

use pebble_autodiff::{ParamId, ParamStore, Tape, Tensor};
use pebble_core::history::HistoryModel;
use pebble_core::losses::FrozenTargets;
use pebble_core::nn::{Checkpoint, Mlp, MlpSpec, ObservationEncoder, RecurrentState, StateVars};
use pebble_core::probes::{Probe, ProbeSpec};
use pebble_core::rl::PopArt;
use pebble_core::rng::stream;
use pebble_envs::{Observation, NUM_ACTIONS};

use crate::config::ExperimentConfig;
use crate::{HarnessError, Result};

pub(crate) const INIT_STREAM: u64 = 1;
pub(crate) const PROBE_STREAM: u64 = 2;

const POPART_MU: &str = "popart.mu";
const POPART_NU: &str = "popart.nu";
const PROBE_MEAN: &str = "probe_input.mean";
const PROBE_VAR: &str = "probe_input.var";

/// Torso `f` (shared with CPC), `h_f`/`h_p`, RL heads and every auxiliary
/// head. All modules are built for every method so checkpoints share one
/// layout; a method only puts the ones it uses on the tape.
#[derive(Clone, Debug)]
pub struct Agent {
    pub cfg: ExperimentConfig,
    pub store: ParamStore,
    pub torso: ObservationEncoder,
    pub history: HistoryModel,
    pub policy: Mlp,
    /// One normalized output per task.
    pub value: Mlp,
    /// PBL's own latent encoder.
    pub latent: ObservationEncoder,
    pub projection: FrozenTargets,
    pub forward_head: Mlp,
    pub projection_head: Mlp,
    pub reverse_head: Mlp,
    pub discriminator: Mlp,
    pub pixel_head: Mlp,
    pub popart: PopArt,
}

fn widths(hidden: &[usize], out: usize) -> Vec<usize> {
    let mut w = hidden.to_vec();
    w.push(out);
    w
}

impl Agent {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream(cfg.seed, INIT_STREAM);
        let mut store = ParamStore::new();
        let spec = cfg.encoder_spec();
        let dz = spec.latent_width();
        let lstm = cfg.lstm_spec();
        let n = &cfg.net;

        let torso = ObservationEncoder::new(&mut store, &mut rng, "torso", spec.clone(), false)?;
        let history = HistoryModel::new(&mut store, &mut rng, "history", dz, lstm.layers.clone(), lstm.skip, NUM_ACTIONS)?;
        let db = history.output_width();
        let policy = Mlp::new(&mut store, &mut rng, "policy", MlpSpec::new(db, widths(&n.head_hidden, NUM_ACTIONS)))?;
        let value = Mlp::new(&mut store, &mut rng, "value", MlpSpec::new(db, widths(&n.head_hidden, cfg.num_tasks())))?;
        let latent = ObservationEncoder::new(&mut store, &mut rng, "latent", spec.clone(), false)?;
        let projection = FrozenTargets::new(&mut store, &mut rng, "projection", spec)?;
        let forward_head = Mlp::new(&mut store, &mut rng, "forward", MlpSpec::new(db, widths(&n.g_hidden, dz)))?;
        let projection_head = Mlp::new(&mut store, &mut rng, "forward_projection", MlpSpec::new(db, widths(&n.g_hidden, dz)))?;
        let reverse_head = Mlp::new(&mut store, &mut rng, "reverse", MlpSpec::new(dz, widths(&n.g_hidden, db)))?;
        let discriminator = Mlp::new(&mut store, &mut rng, "discriminator", MlpSpec::new(db + dz, widths(&n.d_hidden, 1)))?;
        let cells = cfg.pixel_control_spec().cells();
        let pixel_head = Mlp::new(&mut store, &mut rng, "pixel", MlpSpec::new(db, widths(&n.q_hidden, cells * NUM_ACTIONS)))?;
        let popart = PopArt::new(cfg.popart, cfg.num_tasks());
        Ok(Self {
            cfg: cfg.clone(),
            store,
            torso,
            history,
            policy,
            value,
            latent,
            projection,
            forward_head,
            projection_head,
            reverse_head,
            discriminator,
            pixel_head,
            popart,
        })
    }

    pub fn output_width(&self) -> usize {
        self.history.output_width()
    }

    /// Weight and bias of the value head's output layer.
    pub fn value_output_layer(&self) -> (ParamId, ParamId) {
        let last = self.value.layers().last().expect("value head has a layer");
        (last.weight, last.bias)
    }

    /// Parameters with this name prefix.
    pub fn params_named(&self, prefix: &str) -> Vec<ParamId> {
        self.store
            .ids()
            .filter(|&id| {
                let name = self.store.name(id);
                name.starts_with(prefix) && name[prefix.len()..].starts_with('.')
            })
            .collect()
    }

    /// One recurrent step over a batch of observations: zero the flagged
    /// rows, encode, advance `h_f`. Returns the new state and `B_t`.
    pub fn observe(&self, state: &RecurrentState, obs: &[&Observation], resets: &[bool]) -> Result<(RecurrentState, Tensor)> {
        let mut tape = Tape::new();
        let z = self.torso.encode(&mut tape, &self.store, obs)?;
        let sv = StateVars::constant(&mut tape, state);
        let run = self.history.unroll_full(&mut tape, &self.store, &sv, &[z], &[resets.to_vec()])?;
        Ok((run.states[0].values(&tape), tape.value(run.outputs[0]).clone()))
    }

    /// Policy logits for agent-state outputs.
    pub fn logits(&self, b: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let x = tape.constant(b.clone());
        let l = self.policy.apply(&mut tape, &self.store, x)?;
        Ok(tape.value(l).clone())
    }

    pub fn new_probe(&self) -> Result<Probe> {
        let mut rng = stream(self.cfg.seed, PROBE_STREAM);
        Ok(Probe::new(
            &mut rng,
            ProbeSpec {
                input: self.output_width(),
                hidden: self.cfg.probe.hidden.clone(),
                grid: self.cfg.env.grid,
                learning_rate: self.cfg.probe.learning_rate,
            },
        )?)
    }

    pub fn checkpoint(&self, probe: Option<&Probe>) -> Checkpoint {
        let mut ck = Checkpoint::new(self.cfg.to_text());
        ck.add_store(&self.store);
        ck.push(POPART_MU, Tensor::vector(self.popart.mu.clone()));
        ck.push(POPART_NU, Tensor::vector(self.popart.nu.clone()));
        if let Some(p) = probe {
            ck.add_store(&p.store);
            let (mean, var) = p.normalizer();
            ck.push(PROBE_MEAN, Tensor::vector(mean.to_vec()));
            ck.push(PROBE_VAR, Tensor::vector(var.to_vec()));
        }
        ck
    }

    /// Rebuilds the agent a checkpoint was written from. The probe comes
    /// back too when the checkpoint carries one.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, Option<Probe>)> {
        let cfg = ExperimentConfig::parse(&ck.config)?;
        let mut agent = Self::new(&cfg)?;
        agent.load(ck)?;
        let probe = if cfg.probe_active() && ck.get("probe.l0.w").is_some() {
            let mut p = agent.new_probe()?;
            ck.load_store(&mut p.store)?;
            if let (Some(mean), Some(var)) = (ck.get(PROBE_MEAN), ck.get(PROBE_VAR)) {
                p.set_normalizer(mean.data().to_vec(), var.data().to_vec())?;
            }
            Some(p)
        } else {
            None
        };
        Ok((agent, probe))
    }

    /// Loads parameters and PopArt statistics; fails on any width mismatch.
    pub fn load(&mut self, ck: &Checkpoint) -> Result<()> {
        ck.load_store(&mut self.store)?;
        let tasks = self.popart.tasks();
        for (name, slot) in [(POPART_MU, &mut self.popart.mu), (POPART_NU, &mut self.popart.nu)] {
            let t = ck
                .get(name)
                .ok_or_else(|| HarnessError::Invalid(format!("checkpoint lacks {name}")))?;
            if t.len() != tasks {
                return Err(HarnessError::Invalid(format!(
                    "{name} has {} entries, the config has {tasks} tasks",
                    t.len()
                )));
            }
            *slot = t.data().to_vec();
        }
        Ok(())
    }
}
