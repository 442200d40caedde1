mod common;

use common::oracles;
use parking_planner::env::Observation;
use parking_planner::policy::{PolicyConfig, PolicyNet};
use parking_planner::ppo::{gae, ppo_update, train_with, Adam, GaeStep, OutputDir, TrainConfig, Transition};
use parking_planner::scenario::synthetic_pack;
use parking_planner::geometry::VehicleSpec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_policy() -> PolicyConfig {
    PolicyConfig { d_model: 8, heads: 2, hidden: 8, ..PolicyConfig::default() }
}

fn obs(rng: &mut ChaCha8Rng) -> Observation {
    Observation {
        ego_steer: rng.gen_range(-1.0..1.0),
        goal: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0, 1.0],
        tokens: (0..4).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect(),
        mask: vec![true, true, true, false],
        gear: 0.0,
    }
}

/// Transitions whose stored log-probabilities come from `net`, so the ratio is 1.
fn on_policy_buffer(net: &PolicyNet, n: usize, seed: u64) -> Vec<Transition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let o = obs(&mut rng);
            let (d, v) = net.forward(&o).unwrap();
            let choices = d.sample(&mut rng);
            let (lp, _) = d.log_prob_and_entropy(&choices).unwrap();
            Transition {
                obs: o,
                choices,
                reward: rng.gen_range(-1.0..1.0),
                terminal: i % 5 == 4,
                truncated: false,
                log_prob: lp,
                value: v,
                bootstrap: None,
                worker: 0,
                primitives: 4,
            }
        })
        .collect()
}

proptest! {
    #[test]
    fn gae_matches_recursive_definition(
        steps in prop::collection::vec((-3.0..3.0f64, -2.0..2.0f64, 0u8..6, -2.0..2.0f64), 1..40),
        gamma in 0.5..1.0f64,
        lambda in 0.0..1.0f64,
    ) {
        let rewards: Vec<f64> = steps.iter().map(|s| s.0).collect();
        let values: Vec<f64> = steps.iter().map(|s| s.1).collect();
        let terminal: Vec<bool> = steps.iter().map(|s| s.2 == 0).collect();
        let bootstrap: Vec<Option<f64>> = steps.iter().map(|s| (s.2 == 1).then_some(s.3)).collect();
        let input: Vec<GaeStep> = (0..steps.len())
            .map(|i| GaeStep { reward: rewards[i], value: values[i], terminal: terminal[i], bootstrap: bootstrap[i] })
            .collect();
        let (adv, ret) = gae(&input, gamma, lambda);
        let expected = oracles::gae_recursive(&rewards, &values, &terminal, &bootstrap, gamma, lambda);
        for i in 0..steps.len() {
            prop_assert!((adv[i] - expected[i]).abs() <= 1e-12, "step {}: {} vs {}", i, adv[i], expected[i]);
            prop_assert!((ret[i] - (expected[i] + values[i])).abs() <= 1e-12);
        }
    }
}

#[test]
fn first_surrogate_at_unit_ratio_is_negative_mean_advantage() {
    let mut net = PolicyNet::new(tiny_policy(), 1).unwrap();
    let buffer = on_policy_buffer(&net, 32, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let adv: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ret = vec![0.0; 32];
    let cfg = TrainConfig { batch_size: 32, ppo_epochs: 1, ..TrainConfig::default() };
    let mut opt = Adam::new(net.num_params(), cfg.learning_rate, cfg.adam_eps);
    let stats = ppo_update(&mut net, &mut opt, &buffer, &adv, &ret, &cfg, &mut rng).unwrap();
    let mean = adv.iter().sum::<f64>() / 32.0;
    assert!((stats.first_surrogate + mean).abs() < 1e-12);
    assert_eq!(stats.clip_fraction, 0.0);
}

#[test]
fn first_step_matches_vanilla_policy_gradient() {
    let net = PolicyNet::new(tiny_policy(), 4).unwrap();
    let buffer = on_policy_buffer(&net, 16, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let adv: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let cfg = TrainConfig {
        batch_size: 16,
        ppo_epochs: 1,
        entropy_coef: 0.0,
        value_coef: 0.0,
        max_grad_norm: 1e9,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };

    // Plain REINFORCE gradient of -mean(A * log pi).
    let batch: Vec<Observation> = buffer.iter().map(|t| t.obs.clone()).collect();
    let (_, g) = net
        .gradients(&batch, |i, d, _| {
            let (lp, _) = d.log_prob_and_entropy(&buffer[i].choices).unwrap();
            let w = -adv[i] / 16.0;
            (w * lp, d.logit_grad(&buffer[i].choices, w, 0.0), 0.0)
        })
        .unwrap();

    let mut updated = net.clone();
    let mut opt = Adam::new(net.num_params(), cfg.learning_rate, cfg.adam_eps);
    ppo_update(&mut updated, &mut opt, &buffer, &adv, &vec![0.0; 16], &cfg, &mut rng).unwrap();
    for k in 0..net.num_params() {
        // A first Adam step moves by lr * g / (|g| + eps).
        let expected = -cfg.learning_rate * g[k] / (g[k].abs() + cfg.adam_eps);
        let moved = updated.params[k] - net.params[k];
        assert!((moved - expected).abs() <= 1e-9 * cfg.learning_rate, "param {k}: {moved} vs {expected}");
    }
}

#[test]
fn positive_advantage_raises_probability() {
    let mut net = PolicyNet::new(tiny_policy(), 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let o = obs(&mut rng);
    let (d0, _) = net.forward(&o).unwrap();
    let mut buffer = Vec::new();
    let mut adv = Vec::new();
    for (a, sign) in [(3usize, 1.0), (5, -1.0)] {
        for _ in 0..8 {
            let (lp, _) = d0.log_prob_and_entropy(&[a]).unwrap();
            buffer.push(Transition {
                obs: o.clone(),
                choices: vec![a],
                reward: sign,
                terminal: true,
                truncated: false,
                log_prob: lp,
                value: 0.0,
                bootstrap: None,
                worker: 0,
                primitives: 4,
            });
            adv.push(sign);
        }
    }
    let cfg = TrainConfig { batch_size: 16, ppo_epochs: 4, ..TrainConfig::default() };
    let mut opt = Adam::new(net.num_params(), 1e-2, cfg.adam_eps);
    ppo_update(&mut net, &mut opt, &buffer, &adv, &vec![0.0; 16], &cfg, &mut rng).unwrap();
    let (d1, _) = net.forward(&o).unwrap();
    assert!(d1.probs(0)[3] > d0.probs(0)[3]);
    assert!(d1.probs(0)[5] < d0.probs(0)[5]);
}

#[test]
fn empty_buffer_is_a_no_op() {
    let mut net = PolicyNet::new(tiny_policy(), 9).unwrap();
    let before = net.params.clone();
    let cfg = TrainConfig::default();
    let mut opt = Adam::new(net.num_params(), cfg.learning_rate, cfg.adam_eps);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let stats = ppo_update(&mut net, &mut opt, &[], &[], &[], &cfg, &mut rng).unwrap();
    assert_eq!(stats.minibatches, 0);
    assert_eq!(net.params, before);
}

fn short_run() -> TrainConfig {
    TrainConfig {
        buffer_size: 64,
        batch_size: 32,
        ppo_epochs: 2,
        total_steps: 128,
        n_envs: 2,
        seed: 5,
        stage_override: Some(1),
        policy: tiny_policy(),
        ..TrainConfig::default()
    }
}

#[test]
fn training_writes_one_log_row_per_update_and_is_deterministic() {
    let pack = synthetic_pack(&VehicleSpec::default()).unwrap();
    let scenarios = &pack[..2];
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_run();
    let a = train_with(&cfg, scenarios, &OutputDir(Some(dir.path().to_path_buf())), |_, _| true).unwrap();
    assert_eq!(a.log.len(), cfg.num_updates());
    assert_eq!(a.macro_steps, 128);
    assert!(a.primitive_steps >= 128);
    let csv = std::fs::read_to_string(dir.path().join("train_log.csv")).unwrap();
    assert_eq!(csv.lines().count(), cfg.num_updates() + 1);
    assert!(dir.path().join("final.json").exists());

    let b = train_with(&cfg, scenarios, &OutputDir(None), |_, _| true).unwrap();
    assert_eq!(a.policy.params, b.policy.params);
    assert_eq!(a.log, b.log);
}

#[test]
fn early_stop_callback_ends_training() {
    let pack = synthetic_pack(&VehicleSpec::default()).unwrap();
    let cfg = TrainConfig { total_steps: 256, ..short_run() };
    let out = train_with(&cfg, &pack[..1], &OutputDir(None), |_, row| row.update < 1).unwrap();
    assert_eq!(out.log.len(), 2);
}
