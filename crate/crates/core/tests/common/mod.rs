#![allow(dead_code)]

use pebble_autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use pebble_core::history::{FullUnroll, HistoryModel};
use pebble_core::losses::{unroll_selected, valid_pair_mask, FrozenTargets, PartialBatch, SubsampleIndices};
use pebble_core::nn::{EncoderSpec, Mlp, MlpSpec, ObservationEncoder, StateVars};
use pebble_envs::{uniform_random_policy, CubeRoom, CubeRoomConfig, Environment, Observation, NUM_ACTIONS, NUM_CHANNELS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRID: usize = 5;

pub fn encoder_spec() -> EncoderSpec {
    EncoderSpec {
        channels: NUM_CHANNELS,
        view_len: 2 * GRID - 1,
        view_widths: vec![6, 4],
        vocab: 16,
        embed: 3,
        instr_width: 2,
        max_instr_len: 6,
        actions: NUM_ACTIONS + 1,
    }
}

/// A small PBL model and one `T x B` minibatch of cube-room experience.
pub struct Fixture {
    pub store: ParamStore,
    pub torso: ObservationEncoder,
    pub history: HistoryModel,
    pub f: ObservationEncoder,
    pub frozen: FrozenTargets,
    pub g: Mlp,
    pub g2: Mlp,
    pub g_rev: Mlp,
    pub d: Mlp,
    pub t_len: usize,
    pub batch: usize,
    /// Time-major observations, `T * B` of them.
    pub obs: Vec<Observation>,
    pub actions: Vec<Vec<usize>>,
    pub resets: Vec<Vec<bool>>,
}

pub struct Graph {
    pub z_torso: Var,
    pub unroll: FullUnroll,
    /// `[T * B, d_B]`.
    pub outputs: Var,
}

impl Fixture {
    pub fn new(seed: u64, t_len: usize, batch: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let spec = encoder_spec();
        let dz = spec.latent_width();
        let torso = ObservationEncoder::new(&mut store, &mut rng, "torso", spec.clone(), false).unwrap();
        let history = HistoryModel::new(&mut store, &mut rng, "history", dz, vec![3, 3], true, NUM_ACTIONS).unwrap();
        let db = history.output_width();
        let f = ObservationEncoder::new(&mut store, &mut rng, "f", spec.clone(), false).unwrap();
        let frozen = FrozenTargets::new(&mut store, &mut rng, "f_rp", spec).unwrap();
        let g = Mlp::new(&mut store, &mut rng, "g", MlpSpec::new(db, vec![5, dz])).unwrap();
        let g2 = Mlp::new(&mut store, &mut rng, "g2", MlpSpec::new(db, vec![5, dz])).unwrap();
        let g_rev = Mlp::new(&mut store, &mut rng, "g_rev", MlpSpec::new(dz, vec![5, db])).unwrap();
        let d = Mlp::new(&mut store, &mut rng, "d", MlpSpec::new(db + dz, vec![5, 1])).unwrap();

        // perturb the biases so nothing sits exactly at a ReLU kink or zero
        let ids: Vec<ParamId> = store.ids().collect();
        for id in ids {
            if store.is_frozen(id) {
                continue;
            }
            let name = store.name(id).to_string();
            if name.ends_with(".b") {
                let t = store.value(id);
                let data = t.data().iter().map(|v| v + rng.gen_range(-0.1..0.1)).collect();
                let t = Tensor::new(t.shape().to_vec(), data).unwrap();
                store.set_value(id, t).unwrap();
            }
        }

        let mut envs: Vec<CubeRoom> = (0..batch)
            .map(|_| {
                CubeRoom::new(CubeRoomConfig {
                    grid: GRID,
                    episode_limit: 6,
                    random_start: true,
                })
                .unwrap()
            })
            .collect();
        let mut current: Vec<Observation> = envs.iter_mut().enumerate().map(|(b, e)| e.reset(seed * 100 + b as u64)).collect();
        let mut obs = Vec::new();
        let mut actions = Vec::new();
        let mut resets = Vec::new();
        let mut fresh = vec![false; batch];
        let mut episode = 1;
        for _ in 0..t_len {
            let mut row = Vec::new();
            resets.push(fresh.clone());
            for b in 0..batch {
                obs.push(current[b].clone());
                let a = uniform_random_policy(&mut rng);
                row.push(a);
                let step = envs[b].step(a).unwrap();
                if step.cont {
                    current[b] = step.observation;
                    fresh[b] = false;
                } else {
                    current[b] = envs[b].reset(seed * 100 + 50 + episode);
                    episode += 1;
                    fresh[b] = true;
                }
            }
            actions.push(row);
        }
        Self {
            store,
            torso,
            history,
            f,
            frozen,
            g,
            g2,
            g_rev,
            d,
            t_len,
            batch,
            obs,
            actions,
            resets,
        }
    }

    pub fn obs_refs(&self) -> Vec<&Observation> {
        self.obs.iter().collect()
    }

    pub fn agent_graph(&self, tape: &mut Tape, store: &ParamStore) -> Graph {
        let z_torso = self.torso.encode(tape, store, &self.obs_refs()).unwrap();
        let inputs: Vec<Var> = (0..self.t_len)
            .map(|t| tape.slice(z_torso, 0, t * self.batch, self.batch).unwrap())
            .collect();
        let start = self.history.full.zero_state(tape, self.batch);
        let unroll = self.history.unroll_full(tape, store, &start, &inputs, &self.resets).unwrap();
        let outputs = tape.concat(&unroll.outputs, 0).unwrap();
        Graph {
            z_torso,
            unroll,
            outputs,
        }
    }

    pub fn partial(&self, tape: &mut Tape, store: &ParamStore, graph: &Graph, idx: &SubsampleIndices) -> (PartialBatch, Vec<f64>) {
        let pb = unroll_selected(tape, store, &self.history, &graph.unroll.states, &self.actions, idx).unwrap();
        let mask = valid_pair_mask(&pb.rows, &self.resets);
        (pb, mask)
    }

    pub fn params_of(&self, prefix: &str) -> Vec<ParamId> {
        self.store.ids().filter(|&id| self.store.name(id).starts_with(prefix)).collect()
    }

    pub fn state_values(tape: &Tape, s: &StateVars) -> Vec<u64> {
        s.values(tape)
            .layers
            .iter()
            .flat_map(|l| l.cell.data().iter().chain(l.hidden.data()).map(|v| v.to_bits()).collect::<Vec<_>>())
            .collect()
    }
}

pub fn all_zero(store: &ParamStore, ids: &[ParamId]) -> bool {
    ids.iter().all(|&id| store.grad(id).data().iter().all(|&g| g == 0.0))
}

pub fn any_nonzero(store: &ParamStore, ids: &[ParamId]) -> bool {
    ids.iter().any(|&id| store.grad(id).data().iter().any(|&g| g != 0.0))
}
