//! Finite-difference checks for every differentiable building block. Each
//! entry runs `TRIALS` randomized instances and reports the worst relative
//! error seen.

use crate::common::{encoder_spec, Fixture};
use pebble_autodiff::{finite_diff_check, ParamStore, Result as AdResult, Tape, Tensor, Var};
use pebble_core::history::HistoryModel;
use pebble_core::losses::{cpc_loss, pbl_forward_loss, pbl_reverse_loss, pixel_control_loss, SubsampleIndices};
use pebble_core::nn::{
    l2_normalize_rows, unit_norm_penalty_rows, Lstm, LstmSpec, Mlp, MlpSpec, ObservationEncoder, RecurrentState, StateVars,
};
use pebble_core::probes::{Probe, ProbeSpec};
use pebble_core::rl::{actor_critic_loss, BASELINE_WEIGHT, ENTROPY_COST};
use pebble_envs::{Observation, NUM_ACTIONS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
pub const TRIALS: u64 = 20;

fn ad<T>(r: pebble_core::Result<T>) -> AdResult<T> {
    r.map_err(|e| e.into_autodiff())
}

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

/// Random-weighted sum, so every output coordinate carries gradient.
fn project(tape: &mut Tape, x: Var, seed: u64) -> AdResult<Var> {
    let (m, n) = tape.value(x).dims2();
    let w = random(&mut ChaCha8Rng::seed_from_u64(seed), m, n);
    let w = tape.constant(w);
    let p = tape.mul(x, w)?;
    tape.sum(p)
}

fn worst(mut trial: impl FnMut(u64) -> f64) -> f64 {
    (0..TRIALS).map(&mut trial).fold(0.0, f64::max)
}

fn mlp() -> f64 {
    worst(|trial| {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let input = rng.gen_range(1..5);
        let widths: Vec<usize> = (0..rng.gen_range(1..4)).map(|_| rng.gen_range(1..6)).collect();
        let mut store = ParamStore::new();
        let net = Mlp::new(&mut store, &mut rng, "m", MlpSpec::new(input, widths)).unwrap();
        perturb_biases(&mut store, &mut rng);
        let x = random(&mut rng, 3, input);
        finite_diff_check(
            &mut store,
            |tape, store| {
                let xv = tape.constant(x.clone());
                let y = ad(net.apply(tape, store, xv))?;
                project(tape, y, trial)
            },
            STEP,
        )
        .unwrap()
    })
}

fn perturb_biases(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        if store.name(id).ends_with(".b") && !store.is_frozen(id) {
            let t = store.value(id).clone();
            let data = t.data().iter().map(|v| v + rng.gen_range(-0.2..0.2)).collect();
            store.set_value(id, Tensor::new(t.shape().to_vec(), data).unwrap()).unwrap();
        }
    }
}

fn lstm() -> f64 {
    worst(|trial| {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + trial);
        let skip = trial % 2 == 0;
        let spec = LstmSpec {
            input: 3,
            layers: vec![4, 3],
            skip,
        };
        let mut store = ParamStore::new();
        let cell = Lstm::new(&mut store, &mut rng, "lstm", spec.clone()).unwrap();
        let xs: Vec<Tensor> = (0..3).map(|_| random(&mut rng, 2, 3)).collect();
        let mut start = RecurrentState::zeros(&spec, 2);
        for l in &mut start.layers {
            l.cell = random(&mut rng, 2, l.cell.cols());
            l.hidden = random(&mut rng, 2, l.hidden.cols());
        }
        finite_diff_check(
            &mut store,
            |tape, store| {
                let mut s = StateVars::constant(tape, &start);
                let mut total = None;
                for (i, x) in xs.iter().enumerate() {
                    let xv = tape.constant(x.clone());
                    let (next, out) = ad(cell.step(tape, store, &s, xv))?;
                    s = next;
                    let sq = tape.mul(out, out)?;
                    let l = project(tape, sq, trial * 10 + i as u64)?;
                    total = Some(match total {
                        None => l,
                        Some(t) => tape.add(t, l)?,
                    });
                }
                Ok(total.unwrap())
            },
            STEP,
        )
        .unwrap()
    })
}

fn random_observation(rng: &mut ChaCha8Rng) -> Observation {
    let spec = encoder_spec();
    let len = rng.gen_range(0..=spec.max_instr_len);
    Observation {
        view: (0..spec.channels * spec.view_len).map(|_| rng.gen_range(0.0..1.0)).collect(),
        view_len: spec.view_len,
        instruction: (0..len).map(|_| rng.gen_range(1..spec.vocab)).collect(),
        prev_action: rng.gen_range(0..spec.actions),
        reward: rng.gen_range(-2.0..2.0),
    }
}

fn encoder() -> f64 {
    worst(|trial| {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + trial);
        let mut store = ParamStore::new();
        let enc = ObservationEncoder::new(&mut store, &mut rng, "f", encoder_spec(), false).unwrap();
        perturb_biases(&mut store, &mut rng);
        let obs: Vec<Observation> = (0..3).map(|_| random_observation(&mut rng)).collect();
        finite_diff_check(
            &mut store,
            |tape, store| {
                let refs: Vec<&Observation> = obs.iter().collect();
                let z = ad(enc.encode(tape, store, &refs))?;
                project(tape, z, trial)
            },
            STEP,
        )
        .unwrap()
    })
}

fn history() -> f64 {
    worst(|trial| {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + trial);
        let mut store = ParamStore::new();
        let h = HistoryModel::new(&mut store, &mut rng, "h", 3, vec![3, 2], true, NUM_ACTIONS).unwrap();
        let (t_len, batch) = (4, 2);
        let xs: Vec<Tensor> = (0..t_len).map(|_| random(&mut rng, batch, 3)).collect();
        let resets: Vec<Vec<bool>> = (0..t_len).map(|_| (0..batch).map(|_| rng.gen_bool(0.3)).collect()).collect();
        let actions: Vec<Vec<usize>> = (0..3).map(|_| (0..batch).map(|_| rng.gen_range(0..NUM_ACTIONS)).collect()).collect();
        finite_diff_check(
            &mut store,
            |tape, store| {
                let inputs: Vec<Var> = xs.iter().map(|x| tape.constant(x.clone())).collect();
                let start = h.full.zero_state(tape, batch);
                let run = ad(h.unroll_full(tape, store, &start, &inputs, &resets))?;
                let outs = tape.concat(&run.outputs, 0)?;
                let full = project(tape, outs, trial)?;
                let partial = ad(h.unroll_partial(tape, store, &run.states[1], &actions))?;
                let last = partial.last().unwrap().1;
                let p = project(tape, last, trial + 7)?;
                tape.add(full, p)
            },
            STEP,
        )
        .unwrap()
    })
}

fn forward_loss() -> f64 {
    worst(|trial| {
        let mut fx = Fixture::new(400 + trial, 4, 2);
        // targets sit behind a stop-gradient, so they enter as constants
        let mut tape = Tape::new();
        let z = fx.f.encode(&mut tape, &fx.store, &fx.obs_refs()).unwrap();
        let z = tape.value(z).clone();
        let idx = SubsampleIndices::full(4, 2);
        let fx_ref = &fx;
        let mut store = fx.store.clone();
        let err = finite_diff_check(
            &mut store,
            |tape, store| {
                let graph = fx_ref.agent_graph(tape, store);
                let (pb, mask) = fx_ref.partial(tape, store, &graph, &idx);
                let zv = tape.constant(z.clone());
                let t = ad(pbl_forward_loss(tape, store, &fx_ref.g, &pb, zv, &mask))?;
                tape.add(t.loss, t.regularizer)
            },
            STEP,
        )
        .unwrap();
        fx.store = store;
        err
    })
}

fn reverse_loss() -> f64 {
    worst(|trial| {
        let fx = Fixture::new(500 + trial, 4, 2);
        let mut tape = Tape::new();
        let graph = fx.agent_graph(&mut tape, &fx.store);
        let b = tape.value(graph.outputs).clone();
        let mut store = fx.store.clone();
        finite_diff_check(
            &mut store,
            |tape, store| {
                let z = ad(fx.f.encode(tape, store, &fx.obs_refs()))?;
                let bv = tape.constant(b.clone());
                let t = ad(pbl_reverse_loss(tape, store, &fx.g_rev, z, bv))?;
                tape.add(t.loss, t.regularizer)
            },
            STEP,
        )
        .unwrap()
    })
}

fn cpc() -> f64 {
    worst(|trial| {
        let fx = Fixture::new(600 + trial, 4, 2);
        let mut store = fx.store.clone();
        let idx = SubsampleIndices::full(4, 2);
        finite_diff_check(
            &mut store,
            |tape, store| {
                let mut rng = ChaCha8Rng::seed_from_u64(trial);
                let graph = fx.agent_graph(tape, store);
                let (pb, mut mask) = fx.partial(tape, store, &graph, &idx);
                mask[0] = 1.0;
                let out = ad(cpc_loss(tape, store, &fx.d, &pb, graph.z_torso, &mask, 3, &mut rng))?;
                Ok(out.loss)
            },
            STEP,
        )
        .unwrap()
    })
}

/// With zero discount the bootstrap values drop out of the targets, which
/// are otherwise computed off the tape.
fn pixel_control() -> f64 {
    worst(|trial| {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + trial);
        let (t_len, batch, cells, width) = (3, 2, 2, 4);
        let mut store = ParamStore::new();
        let head = Mlp::new(&mut store, &mut rng, "q", MlpSpec::new(width, vec![5, cells * NUM_ACTIONS])).unwrap();
        perturb_biases(&mut store, &mut rng);
        let outs = random(&mut rng, (t_len + 1) * batch, width);
        let actions: Vec<Vec<usize>> = (0..t_len).map(|_| (0..batch).map(|_| rng.gen_range(0..NUM_ACTIONS)).collect()).collect();
        let rewards: Vec<Vec<Vec<f64>>> = (0..t_len)
            .map(|_| (0..batch).map(|_| (0..cells).map(|_| rng.gen_range(0.0..1.0)).collect()).collect())
            .collect();
        let conts: Vec<Vec<bool>> = (0..t_len).map(|_| (0..batch).map(|_| rng.gen_bool(0.8)).collect()).collect();
        finite_diff_check(
            &mut store,
            |tape, store| {
                let o = tape.constant(outs.clone());
                ad(pixel_control_loss(tape, store, &head, o, &actions, &rewards, &conts, 2, 0.0, NUM_ACTIONS))
            },
            STEP,
        )
        .unwrap()
    })
}

fn actor_critic() -> f64 {
    worst(|trial| {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + trial);
        let (n, tasks) = (5, 2);
        let mut store = ParamStore::new();
        let pi = Mlp::new(&mut store, &mut rng, "pi", MlpSpec::new(3, vec![4, NUM_ACTIONS])).unwrap();
        let v = Mlp::new(&mut store, &mut rng, "v", MlpSpec::new(3, vec![4, tasks])).unwrap();
        perturb_biases(&mut store, &mut rng);
        let x = random(&mut rng, n, 3);
        let actions: Vec<usize> = (0..n).map(|_| rng.gen_range(0..NUM_ACTIONS)).collect();
        let task_ids: Vec<usize> = (0..n).map(|_| rng.gen_range(0..tasks)).collect();
        let targets: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let adv: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        finite_diff_check(
            &mut store,
            |tape, store| {
                let xv = tape.constant(x.clone());
                let logits = ad(pi.apply(tape, store, xv))?;
                let values = ad(v.apply(tape, store, xv))?;
                let t = ad(actor_critic_loss(tape, logits, values, &actions, &task_ids, &targets, &adv))?;
                let value = tape.scale(t.value, BASELINE_WEIGHT)?;
                let entropy = tape.scale(t.entropy, -ENTROPY_COST)?;
                let total = tape.add(t.policy, value)?;
                tape.add(total, entropy)
            },
            STEP,
        )
        .unwrap()
    })
}

fn probe() -> f64 {
    worst(|trial| {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + trial);
        let mut probe = Probe::new(
            &mut rng,
            ProbeSpec {
                input: 4,
                hidden: vec![5],
                grid: 3,
                learning_rate: pebble_core::probes::PROBE_LEARNING_RATE,
            },
        )
        .unwrap();
        perturb_biases(&mut probe.store, &mut rng);
        let b = random(&mut rng, 6, 4);
        let cells: Vec<usize> = (0..6).map(|_| rng.gen_range(0..9)).collect();
        // the probe reads its own store, so each evaluation runs on a copy
        // carrying the perturbed values
        let template = probe.clone();
        finite_diff_check(
            &mut probe.store,
            |tape, store| {
                let mut p = template.clone();
                p.store = store.clone();
                let bv = tape.constant(b.clone());
                ad(p.loss_on(tape, bv, &cells))
            },
            STEP,
        )
        .unwrap()
    })
}

fn normalization() -> f64 {
    worst(|trial| {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let mut store = ParamStore::new();
        let x = store.add("x", random(&mut rng, 3, 4)).unwrap();
        finite_diff_check(
            &mut store,
            |tape, store| {
                let xv = tape.param(store, x);
                let n = ad(l2_normalize_rows(tape, xv))?;
                let a = project(tape, n, trial)?;
                let p = ad(unit_norm_penalty_rows(tape, xv))?;
                let p = tape.sum(p)?;
                tape.add(a, p)
            },
            STEP,
        )
        .unwrap()
    })
}

/// Every check with its worst relative error.
pub fn run_all() -> Vec<(&'static str, f64)> {
    vec![
        ("mlp", mlp()),
        ("lstm", lstm()),
        ("encoder", encoder()),
        ("history", history()),
        ("forward_loss", forward_loss()),
        ("reverse_loss", reverse_loss()),
        ("cpc", cpc()),
        ("pixel_control", pixel_control()),
        ("actor_critic", actor_critic()),
        ("probe", probe()),
        ("normalization", normalization()),
    ]
}
