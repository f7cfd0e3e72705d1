mod common;
mod suites {
    pub mod criteria;
}

use common::{all_zero, any_nonzero, Fixture};
use suites::criteria;
use pebble_autodiff::{ParamStore, Tape, Tensor};
use pebble_core::losses::{
    pbl_forward_loss, pbl_reverse_loss, pixel_control_loss, sample_negatives,
    PairRow, PartialBatch, SubsampleIndices,
};
use pebble_core::nn::{Mlp, MlpSpec};
use pebble_core::rl::{Adam, OptimizerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn one_way_gradient_flow() {
    let r = criteria::one_way_flow(50);
    assert!(r.checked >= 45, "{}", r.checked);
    assert_eq!(r.forward_into_f, 0.0);
    assert_eq!(r.reverse_into_h, 0.0);
    assert!(r.heads_reached);
    assert!(r.f_reached >= 40, "{}", r.f_reached);
}

#[test]
fn exhaustive_subsampling_matches_full_loss() {
    let err = criteria::exhaustive_subsampling_error();
    assert!(err <= 1e-12, "{err}");
}

#[test]
fn monte_carlo_subsampling_is_unbiased() {
    let err = criteria::monte_carlo_subsampling_error(10_000);
    assert!(err < 0.01, "{err}");
}

#[test]
fn cpc_at_zero_logits_is_two_ln_two() {
    assert!(criteria::cpc_zero_logit_error() < 1e-12);
}

/// `g` as an identity map on two-dimensional states.
fn identity_g(store: &mut ParamStore) -> Mlp {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let g = Mlp::new(store, &mut rng, "g", MlpSpec::new(2, vec![2])).unwrap();
    store
        .set_value(g.layers()[0].weight, Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap())
        .unwrap();
    g
}

fn single_pair(tape: &mut Tape, b: [f64; 2]) -> PartialBatch {
    PartialBatch {
        outputs: tape.constant(Tensor::matrix(1, 2, b.to_vec()).unwrap()),
        rows: vec![PairRow { t: 0, k: 1, b: 0 }],
        batch: 1,
        t_len: 2,
    }
}

#[test]
fn forward_loss_reference_values() {
    let mut store = ParamStore::new();
    let g = identity_g(&mut store);
    let mut tape = Tape::new();
    let pb = single_pair(&mut tape, [0.6, 0.8]);
    let z = tape.constant(Tensor::matrix(2, 2, vec![9.0, 9.0, 0.6, 0.8]).unwrap());
    let t = pbl_forward_loss(&mut tape, &store, &g, &pb, z, &[1.0]).unwrap();
    assert!(tape.value(t.loss).item().abs() < 1e-15);
    assert!(tape.value(t.regularizer).item().abs() < 1e-15);

    let mut tape = Tape::new();
    let pb = single_pair(&mut tape, [3.0, 0.0]);
    let z = tape.constant(Tensor::matrix(2, 2, vec![0.0, 0.0, 0.0, -2.0]).unwrap());
    let t = pbl_forward_loss(&mut tape, &store, &g, &pb, z, &[1.0]).unwrap();
    // normalisation carries a 1e-8 epsilon
    assert!((tape.value(t.loss).item() - 2.0).abs() < 1e-7);
    assert!((tape.value(t.regularizer).item() - 0.02 * 64.0).abs() < 1e-12);

    assert!(matches!(
        pbl_forward_loss(&mut tape, &store, &g, &pb, z, &[0.0]),
        Err(pebble_core::Error::EmptyIndexSet)
    ));
}

#[test]
fn reverse_loss_reference_values() {
    let mut store = ParamStore::new();
    let g = identity_g(&mut store);
    let mut tape = Tape::new();
    let z = tape.constant(Tensor::matrix(2, 2, vec![0.6, 0.8, 1.0, 0.0]).unwrap());
    // identity g' on unit latents reproduces them exactly
    let b = tape.constant(Tensor::matrix(2, 2, vec![0.6, 0.8, 1.0, 0.0]).unwrap());
    let t = pbl_reverse_loss(&mut tape, &store, &g, z, b).unwrap();
    assert!(tape.value(t.loss).item() < 1e-15);
    assert!(tape.value(t.regularizer).item() < 1e-15);
}

#[test]
fn target_rows_are_unit_norm() {
    let fx = Fixture::new(5, 5, 2);
    let mut tape = Tape::new();
    let z = fx.f.encode(&mut tape, &fx.store, &fx.obs_refs()).unwrap();
    let n = tape.l2_normalize_rows(z).unwrap();
    for r in 0..tape.value(n).rows() {
        let norm: f64 = tape.value(n).row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
    }
}

#[test]
fn random_projection_targets_stay_frozen() {
    let fx = Fixture::new(1, 5, 2);
    let mut store = fx.store.clone();
    let frozen_ids = fx.frozen.params();
    let encode = |store: &ParamStore| {
        let mut tape = Tape::new();
        let z = fx.frozen.latents(&mut tape, store, &fx.obs_refs()).unwrap();
        tape.value(z).clone()
    };
    let before = encode(&store);
    let mut adam = Adam::new(OptimizerConfig {
        learning_rate: 1e-2,
        ..OptimizerConfig::default()
    });
    let idx = SubsampleIndices::full(5, 2);
    for _ in 0..3 {
        store.zero_grads();
        let mut tape = Tape::new();
        let graph = fx.agent_graph(&mut tape, &store);
        let (pb, mask) = fx.partial(&mut tape, &store, &graph, &idx);
        let z = fx.frozen.latents(&mut tape, &store, &fx.obs_refs()).unwrap();
        let t = pbl_forward_loss(&mut tape, &store, &fx.g, &pb, z, &mask).unwrap();
        tape.backward(t.loss, &mut store).unwrap();
        assert!(all_zero(&store, &frozen_ids));
        assert!(any_nonzero(&store, &fx.params_of("history.")));
        assert!(any_nonzero(&store, &fx.params_of("g.")));
        adam.step(&mut store).unwrap();
    }
    assert_eq!(encode(&store), before);
    assert!(store.set_value(frozen_ids[0], store.value(frozen_ids[0]).clone()).is_err());
}

#[test]
fn grounded_branches_agree_when_weights_are_copied() {
    let mut fx = Fixture::new(2, 5, 2);
    // copy f_rp into f and g into g2
    let pairs: Vec<_> = fx.params_of("f_rp.").into_iter().zip(fx.params_of("f.")).collect();
    for (src, dst) in pairs {
        let v = fx.store.value(src).clone();
        fx.store.set_value(dst, v).unwrap();
    }
    let pairs: Vec<_> = fx.params_of("g.").into_iter().zip(fx.params_of("g2.")).collect();
    for (src, dst) in pairs {
        let v = fx.store.value(src).clone();
        fx.store.set_value(dst, v).unwrap();
    }
    let mut tape = Tape::new();
    let store = fx.store.clone();
    let graph = fx.agent_graph(&mut tape, &store);
    let (pb, mask) = fx.partial(&mut tape, &store, &graph, &SubsampleIndices::full(5, 2));
    let (z, z_rp) =
        pebble_core::losses::grounded_dual_targets(&mut tape, &store, &fx.f, &fx.frozen, &fx.obs_refs()).unwrap();
    let learned = pbl_forward_loss(&mut tape, &store, &fx.g, &pb, z, &mask).unwrap();
    let projected = pbl_forward_loss(&mut tape, &store, &fx.g2, &pb, z_rp, &mask).unwrap();
    assert_eq!(tape.value(learned.loss).item(), tape.value(projected.loss).item());

    // the frozen branch equals the plain random-projection loss with the same head
    let z_rp2 = fx.frozen.latents(&mut tape, &store, &fx.obs_refs()).unwrap();
    let rp = pbl_forward_loss(&mut tape, &store, &fx.g2, &pb, z_rp2, &mask).unwrap();
    assert_eq!(tape.value(rp.loss).item(), tape.value(projected.loss).item());

    let total = tape.add(learned.loss, projected.loss).unwrap();
    let mut grads = store.clone();
    tape.backward(total, &mut grads).unwrap();
    assert!(all_zero(&grads, &fx.frozen.params()));
}

#[test]
fn confident_discriminator_has_tiny_loss() {
    let mut tape = Tape::new();
    let pos = tape.constant(Tensor::vector(vec![30.0]));
    let neg = tape.constant(Tensor::vector(vec![-30.0; 20]));
    let lp = tape.sigmoid_cross_entropy(pos, vec![1.0]).unwrap();
    let ln = tape.sigmoid_cross_entropy(neg, vec![0.0; 20]).unwrap();
    let lp = tape.sum(lp).unwrap();
    let ln = tape.mean(ln).unwrap();
    let total = tape.add(lp, ln).unwrap();
    assert!(tape.value(total).item() < 1e-10);
}

#[test]
fn negatives_never_hit_the_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws = sample_negatives(&mut rng, 10, 3, 100_000).unwrap();
    let mut counts = [0usize; 10];
    for d in draws {
        counts[d] += 1;
    }
    assert_eq!(counts[3], 0);
    for (i, &c) in counts.iter().enumerate() {
        if i != 3 {
            assert!((c as f64 / 100_000.0 - 1.0 / 9.0).abs() < 0.01);
        }
    }
    assert!(sample_negatives(&mut rng, 1, 0, 1).is_err());
}

#[test]
fn pixel_control_one_step_zero_discount() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let head = Mlp::new(&mut store, &mut rng, "q", MlpSpec::new(3, vec![2 * 4])).unwrap();
    for id in head.params() {
        let shape = store.value(id).shape().to_vec();
        store.set_value(id, Tensor::zeros(shape)).unwrap();
    }
    let (t_len, batch) = (3, 2);
    let mut tape = Tape::new();
    let outputs = tape.constant(Tensor::full(vec![(t_len + 1) * batch, 3], 0.5));
    let rewards: Vec<Vec<Vec<f64>>> = (0..t_len)
        .map(|t| (0..batch).map(|b| vec![0.1 * (t + b) as f64, 0.3]).collect())
        .collect();
    let actions = vec![vec![0, 3]; t_len];
    let conts = vec![vec![true; batch]; t_len];
    let loss = pixel_control_loss(&mut tape, &store, &head, outputs, &actions, &rewards, &conts, 1, 0.0, 4).unwrap();
    let expect: f64 = rewards.iter().flatten().flatten().map(|r| r * r).sum::<f64>() / (t_len * batch * 2) as f64;
    assert!((tape.value(loss).item() - expect).abs() < 1e-15);
}
