#![allow(dead_code)]

//! Measurements behind the loss, return and normalization guarantees.
//! Each function returns the quantity a caller compares to its tolerance,
//! so unit tests and the acceptance report share one oracle.

use crate::common::{all_zero, any_nonzero, Fixture};
use pebble_autodiff::{ParamId, ParamStore, Tape, Tensor};
use pebble_core::losses::{
    cpc_loss, pbl_forward_loss, pbl_reverse_loss, sample_subsample_indices, SubsampleIndices,
};
use pebble_core::rl::{transform_reward, vtrace, PopArt, PopArtConfig, VTraceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest absolute gradient entry over `ids`.
fn max_grad(store: &ParamStore, ids: &[ParamId]) -> f64 {
    ids.iter()
        .flat_map(|&id| store.grad(id).data())
        .fold(0.0, |m: f64, g| m.max(g.abs()))
}

pub struct OneWayFlow {
    /// Minibatches with at least one valid pair.
    pub checked: usize,
    /// Largest `|d forward / d f|` entry seen.
    pub forward_into_f: f64,
    /// Largest `|d reverse / d (h_f, h_p, g)|` entry seen.
    pub reverse_into_h: f64,
    /// Minibatches where the reverse loss did move `f`.
    pub f_reached: usize,
    /// Every minibatch moved `h_p`, `g` and `g'`.
    pub heads_reached: bool,
}

pub fn one_way_flow(minibatches: u64) -> OneWayFlow {
    let mut out = OneWayFlow {
        checked: 0,
        forward_into_f: 0.0,
        reverse_into_h: 0.0,
        f_reached: 0,
        heads_reached: true,
    };
    for seed in 0..minibatches {
        let fx = Fixture::new(seed, 6, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx = sample_subsample_indices(&mut rng, 6, 3, 3, 2).unwrap();
        let f_params = fx.params_of("f.");
        let h_params = [fx.params_of("history."), fx.params_of("torso."), fx.params_of("g.")].concat();

        let mut store = fx.store.clone();
        let mut tape = Tape::new();
        let graph = fx.agent_graph(&mut tape, &store);
        let (pb, mask) = fx.partial(&mut tape, &store, &graph, &idx);
        if mask.iter().all(|&m| m == 0.0) {
            continue;
        }
        out.checked += 1;
        let z = fx.f.encode(&mut tape, &store, &fx.obs_refs()).unwrap();
        let fwd = pbl_forward_loss(&mut tape, &store, &fx.g, &pb, z, &mask).unwrap();
        let root = tape.add(fwd.loss, fwd.regularizer).unwrap();
        tape.backward(root, &mut store).unwrap();
        out.forward_into_f = out.forward_into_f.max(max_grad(&store, &f_params));
        out.heads_reached &= any_nonzero(&store, &fx.params_of("history.partial"))
            && any_nonzero(&store, &fx.params_of("g."));

        store.zero_grads();
        let mut tape = Tape::new();
        let graph = fx.agent_graph(&mut tape, &store);
        let z = fx.f.encode(&mut tape, &store, &fx.obs_refs()).unwrap();
        let rev = pbl_reverse_loss(&mut tape, &store, &fx.g_rev, z, graph.outputs).unwrap();
        let root = tape.add(rev.loss, rev.regularizer).unwrap();
        tape.backward(root, &mut store).unwrap();
        out.reverse_into_h = out.reverse_into_h.max(max_grad(&store, &h_params));
        // a tiny view MLP can have every output unit dead on a batch
        if !all_zero(&store, &f_params) {
            out.f_reached += 1;
        }
        out.heads_reached &= any_nonzero(&store, &fx.params_of("g_rev."));
    }
    out
}

/// Forward loss on the fixture's minibatch with learned `f` targets; an
/// index set without valid pairs contributes zero.
pub fn forward_value(fx: &Fixture, idx: &SubsampleIndices) -> f64 {
    let mut tape = Tape::new();
    let graph = fx.agent_graph(&mut tape, &fx.store);
    let (pb, mask) = fx.partial(&mut tape, &fx.store, &graph, idx);
    let z = fx.f.encode(&mut tape, &fx.store, &fx.obs_refs()).unwrap();
    match pbl_forward_loss(&mut tape, &fx.store, &fx.g, &pb, z, &mask) {
        Ok(t) => tape.value(t.loss).item(),
        Err(pebble_core::Error::EmptyIndexSet) => 0.0,
        Err(e) => panic!("{e}"),
    }
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    (k - 1..n)
        .flat_map(|last| {
            combinations(last, k - 1).into_iter().map(move |mut c| {
                c.push(last);
                c
            })
        })
        .collect()
}

/// Worst relative gap between the full `T = 4, H = 3` forward loss and
/// the mean over every subsample of several sizes.
pub fn exhaustive_subsampling_error() -> f64 {
    let (t_len, horizon) = (4, 3);
    let fx = Fixture::new(7, t_len, 2);
    let full = forward_value(&fx, &SubsampleIndices::full(t_len, horizon));
    let mut worst: f64 = 0.0;
    for (n_time, n_future) in [(1, 1), (2, 2), (2, 1), (3, 2), (3, 3)] {
        let mut total = 0.0;
        let mut count = 0;
        for times in combinations(t_len - 1, n_time) {
            for offsets in combinations(horizon, n_future) {
                let offsets = offsets.into_iter().map(|k| k + 1).collect();
                total += forward_value(&fx, &SubsampleIndices { times: times.clone(), offsets });
                count += 1;
            }
        }
        worst = worst.max((total / count as f64 - full).abs() / full.abs());
    }
    worst
}

/// Relative gap between the full `T = 20, H = 8` forward loss and the
/// mean of `draws` random 6-time, 2-offset subsamples.
pub fn monte_carlo_subsampling_error(draws: usize) -> f64 {
    let (t_len, horizon) = (20, 8);
    let fx = Fixture::new(3, t_len, 2);
    let full = forward_value(&fx, &SubsampleIndices::full(t_len, horizon));
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mean = (0..draws)
        .map(|_| forward_value(&fx, &sample_subsample_indices(&mut rng, t_len, horizon, 6, 2).unwrap()))
        .sum::<f64>()
        / draws as f64;
    (mean - full).abs() / full
}

pub struct Sequence {
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub behaviour: Vec<f64>,
    pub target: Vec<f64>,
    pub conts: Vec<bool>,
}

/// Length 1 to 10, optional episode ends.
pub fn random_sequence(rng: &mut ChaCha8Rng, on_policy: bool, with_ends: bool) -> Sequence {
    let n = rng.gen_range(1..=10);
    let behaviour: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..-0.05)).collect();
    let target = if on_policy {
        behaviour.clone()
    } else {
        (0..n).map(|_| rng.gen_range(-3.0..-0.05)).collect()
    };
    Sequence {
        values: (0..=n).map(|_| rng.gen_range(-5.0..5.0)).collect(),
        rewards: (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        behaviour,
        target,
        conts: (0..n).map(|_| !with_ends || rng.gen_bool(0.8)).collect(),
    }
}

/// Sum of discounted rewards up to the end of the sequence or episode,
/// plus the discounted bootstrap value if the episode is still running.
pub fn n_step_return(s: &Sequence, gamma: f64, from: usize, steps: usize) -> f64 {
    let mut ret = 0.0;
    let mut discount = 1.0;
    for t in from..from + steps {
        ret += discount * s.rewards[t];
        if !s.conts[t] {
            return ret;
        }
        discount *= gamma;
    }
    ret + discount * s.values[from + steps]
}

/// Weighted mixture of n-step returns.
pub fn lambda_return(s: &Sequence, gamma: f64, lambda: f64, from: usize) -> f64 {
    let remaining = s.rewards.len() - from;
    let mut total = 0.0;
    for k in 1..remaining {
        total += (1.0 - lambda) * lambda.powi(k as i32 - 1) * n_step_return(s, gamma, from, k);
    }
    total + lambda.powi(remaining as i32 - 1) * n_step_return(s, gamma, from, remaining)
}

/// `v_s = V(x_s) + sum_t (prod_{i<t} gamma_i c_i) delta_t`, evaluated
/// literally as a double sum.
pub fn direct_vtrace(s: &Sequence, cfg: &VTraceConfig) -> Vec<f64> {
    let n = s.rewards.len();
    let ratio = |t: usize| (s.target[t] - s.behaviour[t]).exp();
    let disc = |t: usize| if s.conts[t] { cfg.gamma } else { 0.0 };
    (0..n)
        .map(|start| {
            let mut v = s.values[start];
            for t in start..n {
                let mut weight = 1.0;
                for i in start..t {
                    weight *= disc(i) * cfg.lambda * ratio(i).min(cfg.c_bar);
                }
                let delta = ratio(t).min(cfg.rho_bar) * (s.rewards[t] + disc(t) * s.values[t + 1] - s.values[t]);
                v += weight * delta;
            }
            v
        })
        .collect()
}

pub fn run_vtrace(s: &Sequence, cfg: &VTraceConfig) -> Vec<f64> {
    vtrace(cfg, &s.values, &s.rewards, &s.behaviour, &s.target, &s.conts).unwrap().vs
}

/// Largest `|v_s - n-step return|` over `sequences` on-policy sequences
/// with `lambda = 1`.
pub fn vtrace_on_policy_error(sequences: u64) -> f64 {
    let cfg = VTraceConfig {
        lambda: 1.0,
        ..VTraceConfig::default()
    };
    let mut worst: f64 = 0.0;
    for seed in 0..sequences {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_sequence(&mut rng, true, false);
        for (start, v) in run_vtrace(&s, &cfg).iter().enumerate() {
            worst = worst.max((v - n_step_return(&s, cfg.gamma, start, s.rewards.len() - start)).abs());
        }
    }
    worst
}

/// Largest `|v_s - direct double sum|` over off-policy sequences, half of
/// them with episode ends.
pub fn vtrace_off_policy_error(sequences: u64) -> f64 {
    let cfg = VTraceConfig::default();
    let mut worst: f64 = 0.0;
    for seed in 0..sequences {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let s = random_sequence(&mut rng, false, seed % 2 == 0);
        for (v, o) in run_vtrace(&s, &cfg).iter().zip(direct_vtrace(&s, &cfg)) {
            worst = worst.max((v - o).abs());
        }
    }
    worst
}

fn popart_outputs(store: &ParamStore, p: &PopArt, x: &[f64], w: ParamId, b: ParamId) -> Vec<f64> {
    let wv = store.value(w);
    let bv = store.value(b);
    let (h, k) = wv.dims2();
    (0..k)
        .map(|i| {
            let norm: f64 = (0..h).map(|r| x[r] * wv.data()[r * k + i]).sum::<f64>() + bv.data()[i];
            p.unnormalize(i, norm)
        })
        .collect()
}

pub struct PopArtRun {
    /// Worst `|after - before| / |before|` of any unnormalized output.
    pub preservation: f64,
    pub min_sigma: f64,
    pub max_sigma: f64,
}

/// Random target batches spanning seven orders of magnitude.
pub fn popart_run(updates: usize) -> PopArtRun {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (tasks, hidden) = (3, 4);
    let mut store = ParamStore::new();
    let w = store
        .add("w", Tensor::matrix(hidden, tasks, (0..hidden * tasks).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
        .unwrap();
    let b = store.add("b", Tensor::matrix(1, tasks, vec![0.1, -0.3, 0.7]).unwrap()).unwrap();
    let mut p = PopArt::new(
        PopArtConfig {
            step: 0.05,
            ..PopArtConfig::default()
        },
        tasks,
    );
    let x: Vec<f64> = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut out = PopArtRun {
        preservation: 0.0,
        min_sigma: f64::INFINITY,
        max_sigma: 0.0,
    };
    for _ in 0..updates {
        let before = popart_outputs(&store, &p, &x, w, b);
        let scale = 10f64.powf(rng.gen_range(-3.0..4.0));
        let targets: Vec<(usize, f64)> = (0..rng.gen_range(1..10))
            .map(|_| (rng.gen_range(0..tasks), rng.gen_range(-1.0..1.0) * scale))
            .collect();
        p.update(&targets, &mut store, w, b).unwrap();
        let after = popart_outputs(&store, &p, &x, w, b);
        for (a, c) in before.iter().zip(&after) {
            out.preservation = out.preservation.max((a - c).abs() / a.abs().max(1e-12));
        }
        for i in 0..tasks {
            out.min_sigma = out.min_sigma.min(p.sigma(i));
            out.max_sigma = out.max_sigma.max(p.sigma(i));
        }
    }
    out
}

/// Largest gap between the transform and its piecewise definition at the
/// reference rewards.
pub fn reward_reference_error() -> f64 {
    [0.0, 5.0, -5.0, 50.0, -50.0]
        .iter()
        .map(|&r: &f64| {
            let t = (r / 5.0).tanh();
            let direct = if r < 0.0 { 0.3 * t } else { 1.5 * t };
            (transform_reward(r) - direct).abs()
        })
        .fold(0.0, f64::max)
}

/// Whether the transform strictly increases along an evenly spaced grid.
pub fn reward_strictly_increasing(points: usize, lo: f64, hi: f64) -> bool {
    let grid: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    grid.windows(2).all(|w| transform_reward(w[1]) > transform_reward(w[0]))
}

/// Largest `|L - 2 ln 2|` with a zeroed discriminator, over several
/// negative counts.
pub fn cpc_zero_logit_error() -> f64 {
    let mut fx = Fixture::new(4, 5, 2);
    for id in fx.params_of("d.") {
        let shape = fx.store.value(id).shape().to_vec();
        fx.store.set_value(id, Tensor::zeros(shape)).unwrap();
    }
    let mut worst: f64 = 0.0;
    for negatives in [1, 20, 40] {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut tape = Tape::new();
        let graph = fx.agent_graph(&mut tape, &fx.store);
        let (pb, mut mask) = fx.partial(&mut tape, &fx.store, &graph, &SubsampleIndices::full(5, 2));
        mask.iter_mut().for_each(|m| *m = 1.0);
        let out = cpc_loss(&mut tape, &fx.store, &fx.d, &pb, graph.z_torso, &mask, negatives, &mut rng).unwrap();
        worst = worst.max((tape.value(out.loss).item() - 2.0 * 2f64.ln()).abs());
    }
    worst
}
