use mwsn_marl::nn::{argmax, target_from_values, Adam, AdamConfig, Architecture, QNetwork, TargetMode};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small() -> Architecture {
    Architecture { obs_dim: 7, trunk: vec![6, 5], head_hidden: 4, n_actions: 5 }
}

// Plain loop forward pass written from the layer layout alone.
fn reference_q(net: &QNetwork, obs: &[f64]) -> Vec<f64> {
    let arch = net.architecture().clone();
    let p = net.params();
    let mut off = 0;
    let mut layer = |x: &[f64], fan_in: usize, fan_out: usize, relu: bool| -> Vec<f64> {
        let w = &p[off..off + fan_in * fan_out];
        let b = &p[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
        off += fan_in * fan_out + fan_out;
        (0..fan_out)
            .map(|o| {
                let z = b[o] + (0..fan_in).map(|i| w[o * fan_in + i] * x[i]).sum::<f64>();
                if relu {
                    z.max(0.0)
                } else {
                    z
                }
            })
            .collect()
    };
    let shapes = arch.layer_shapes();
    let depth = arch.trunk.len();
    let mut h = obs.to_vec();
    for &(i, o) in &shapes[..depth] {
        h = layer(&h, i, o, true);
    }
    let vh = layer(&h, shapes[depth].0, shapes[depth].1, true);
    let v = layer(&vh, shapes[depth + 1].0, 1, false)[0];
    let ah = layer(&h, shapes[depth + 2].0, shapes[depth + 2].1, true);
    let a = layer(&ah, shapes[depth + 3].0, arch.n_actions, false);
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    a.iter().map(|x| v + x - mean).collect()
}

fn random_obs(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn loss(net: &QNetwork, obs: &[f64], actions: &[usize], targets: &[f64], weights: &[f64]) -> f64 {
    let na = net.n_actions();
    let q = net.forward_batch(obs, actions.len()).q;
    actions.iter().enumerate().map(|(b, &a)| weights[b] * (targets[b] - q[b * na + a]).powi(2)).sum::<f64>()
        / actions.len() as f64
}

#[test]
fn zero_network_outputs_value_bias() {
    let mut net = QNetwork::zeros(small());
    let n = net.params().len();
    // Value output bias sits just before the advantage head.
    let arch = small();
    let adv_len =
        arch.head_hidden * arch.n_actions + arch.n_actions + arch.trunk[1] * arch.head_hidden + arch.head_hidden;
    net.params_mut()[n - adv_len - 1] = 2.5;
    let q = net.forward(&[0.3; 7]).unwrap();
    assert!(q.iter().all(|v| (v - 2.5).abs() < 1e-12), "{q:?}");
}

#[test]
fn finite_difference_gradient_all_parameters() {
    for seed in 0..10u64 {
        let mut net = QNetwork::new(small(), seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        // Zero biases plus a dead trunk row put pre-activations exactly on the ReLU kink,
        // where central differences are meaningless. Jitter every parameter off it.
        for p in net.params_mut() {
            *p += rng.gen_range(-0.05..0.05);
        }
        let batch = 4;
        let obs = random_obs(&mut rng, batch * 7);
        let actions: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..5)).collect();
        let targets: Vec<f64> = (0..batch).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let weights: Vec<f64> = (0..batch).map(|_| rng.gen_range(0.2..1.0)).collect();
        let (grad, _) = net.batch_gradient(&obs, &actions, &targets, &weights);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        #[allow(clippy::needless_range_loop)]
        for k in 0..net.params().len() {
            let mut plus = net.clone();
            plus.params_mut()[k] += h;
            let mut minus = net.clone();
            minus.params_mut()[k] -= h;
            let fd = (loss(&plus, &obs, &actions, &targets, &weights)
                - loss(&minus, &obs, &actions, &targets, &weights))
                / (2.0 * h);
            let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst <= 1e-4, "seed {seed}: worst relative error {worst}");
    }
}

#[test]
fn vanilla_max_overestimates_relative_to_double() {
    // True values are all zero; both networks see independent noise.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let draws = 2000;
    let diffs: Vec<f64> = (0..draws)
        .map(|_| {
            let online: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let target: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
            target_from_values(&online, &target, 0.0, 0.99, TargetMode::VanillaMax)
                - target_from_values(&online, &target, 0.0, 0.99, TargetMode::Double)
        })
        .collect();
    assert!(diffs.iter().all(|d| *d >= 0.0));
    let mean = diffs.iter().sum::<f64>() / draws as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let z = mean / (var / draws as f64).sqrt();
    assert!(z > 2.326, "z = {z}");
}

#[test]
fn adam_reduces_loss_on_fixed_batch() {
    let mut net = QNetwork::new(small(), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let obs = random_obs(&mut rng, 16 * 7);
    let actions: Vec<usize> = (0..16).map(|i| i % 5).collect();
    let targets: Vec<f64> = (0..16).map(|i| (i as f64 * 0.3).sin()).collect();
    let w = vec![1.0; 16];
    let before = loss(&net, &obs, &actions, &targets, &w);
    let mut adam = Adam::new(net.params().len(), AdamConfig { learning_rate: 1e-2, ..AdamConfig::default() });
    for _ in 0..300 {
        let (g, _) = net.batch_gradient(&obs, &actions, &targets, &w);
        adam.step(net.params_mut(), &g).unwrap();
    }
    assert!(loss(&net, &obs, &actions, &targets, &w) < 0.2 * before);
}

#[test]
fn corrupted_checkpoint_is_an_error() {
    let net = QNetwork::new(small(), 1);
    let mut bytes = Vec::new();
    net.save(&mut bytes).unwrap();
    let back = QNetwork::load(bytes.as_slice(), Some(&small())).unwrap();
    assert_eq!(back, net);
    let truncated = &bytes[..bytes.len() / 2];
    assert!(QNetwork::load(truncated, Some(&small())).is_err());
    let other = Architecture { n_actions: 9, ..small() };
    let err = QNetwork::load(bytes.as_slice(), Some(&other)).unwrap_err().to_string();
    assert!(err.contains('5') && err.contains('9'), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_reference_forward(seed in 0u64..1000, obs in prop::collection::vec(-1.0f64..1.0, 7)) {
        let net = QNetwork::new(small(), seed);
        let q = net.forward(&obs).unwrap();
        let r = reference_q(&net, &obs);
        for (a, b) in q.iter().zip(&r) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn advantage_shift_leaves_q_unchanged(seed in 0u64..1000, c in -50.0f64..50.0, obs in prop::collection::vec(-1.0f64..1.0, 7)) {
        let net = QNetwork::new(small(), seed);
        let mut shifted = net.clone();
        let n = shifted.params().len();
        for b in &mut shifted.params_mut()[n - 5..] {
            *b += c;
        }
        let q0 = net.forward(&obs).unwrap();
        let q1 = shifted.forward(&obs).unwrap();
        for (a, b) in q0.iter().zip(&q1) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn argmax_invariant_under_positive_affine(values in prop::collection::vec(-100.0f64..100.0, 1..12), s in 0.01f64..100.0, t in -100.0f64..100.0) {
        let scaled: Vec<f64> = values.iter().map(|v| s * v + t).collect();
        prop_assert_eq!(values[argmax(&values)], values[argmax(&scaled)]);
    }

    #[test]
    fn extreme_inputs_stay_finite(seed in 0u64..1000, obs in prop::collection::vec(-1e3f64..1e3, 7)) {
        let net = QNetwork::new(Architecture::default(), seed);
        prop_assert!(net.forward(&obs).unwrap().iter().all(|v| v.is_finite()));
    }
}

#[test]
fn non_finite_observation_rejected() {
    let net = QNetwork::new(small(), 0);
    assert!(net.forward(&[f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    assert!(net.forward(&[0.0; 3]).is_err());
}
