use ddsd_core::classifier::{
    self, apply_lora, cross_entropy_loss, forward, gradient, lora_param_count, predict_score, softmax, LinearHead,
    LoraAdapter, LoraSpec, Matrix, Optimizer, TrainConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_head(dim: usize, rng: &mut ChaCha8Rng) -> LinearHead {
    let mut head = LinearHead::zeros(dim);
    for w in &mut head.weights {
        *w = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
    }
    head.bias = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    head
}

fn loss_at(head: &LinearHead, x: &[f64], y: u8) -> f64 {
    cross_entropy_loss(forward(head, x).unwrap(), y)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn head_gradient_matches_central_differences() {
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let dim = rng.random_range(1..=32);
        let head = random_head(dim, &mut rng);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = (case % 2) as u8;
        let g = gradient(&head, &x, y).unwrap();
        for i in 0..dim {
            for k in 0..2 {
                let mut plus = head.clone();
                plus.weights[i][k] += h;
                let mut minus = head.clone();
                minus.weights[i][k] -= h;
                let fd = (loss_at(&plus, &x, y) - loss_at(&minus, &x, y)) / (2.0 * h);
                assert!(rel_err(g.weights[i][k], fd) < 1e-5, "case {case} w[{i}][{k}]: {} vs {fd}", g.weights[i][k]);
            }
        }
        for k in 0..2 {
            let mut plus = head.clone();
            plus.bias[k] += h;
            let mut minus = head.clone();
            minus.bias[k] -= h;
            let fd = (loss_at(&plus, &x, y) - loss_at(&minus, &x, y)) / (2.0 * h);
            assert!(rel_err(g.bias[k], fd) < 1e-5, "case {case} b[{k}]");
        }
    }
}

#[test]
fn adapter_gradient_matches_central_differences() {
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let data: Vec<(Vec<f64>, u8)> = (0..16)
        .map(|i| ((0..6).map(|_| rng.random_range(-1.0..1.0)).collect(), (i % 2) as u8))
        .collect();
    let spec = LoraSpec {
        rank: 2,
        alpha: 4.0,
        hidden_dim: 5,
    };
    let cfg = TrainConfig {
        learning_rate: 0.3,
        epochs: 4,
        batch_size: 4,
        ..TrainConfig::default()
    };
    // Training first moves the head and the adapter away from zero so that
    // every gradient block is exercised.
    let model = classifier::train(&data, &cfg, Some(&spec)).unwrap();
    assert!(!model.backbone.as_ref().unwrap().adapter.up.is_zero());
    let p0 = model.parameters();
    for (x, y) in &data[..4] {
        let g = model.loss_gradient(x, *y).unwrap();
        for i in 0..p0.len() {
            let mut m = model.clone();
            let mut p = p0.clone();
            p[i] += h;
            m.set_parameters(&p);
            let up = m.loss(x, *y).unwrap();
            p[i] -= 2.0 * h;
            m.set_parameters(&p);
            let down = m.loss(x, *y).unwrap();
            let fd = (up - down) / (2.0 * h);
            assert!(rel_err(g[i], fd) < 1e-5 || (g[i] - fd).abs() < 1e-10, "param {i}: {} vs {fd}", g[i]);
        }
    }
}

#[test]
fn forward_matches_scalar_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let dim = rng.random_range(1..=8);
        let head = random_head(dim, &mut rng);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut expect = head.bias;
        for (w, xi) in head.weights.iter().zip(&x) {
            expect[0] += w[0] * xi;
            expect[1] += w[1] * xi;
        }
        let got = forward(&head, &x).unwrap();
        for k in 0..2 {
            assert!((got[k] - expect[k]).abs() <= 1e-12 * (1.0 + expect[k].abs()));
        }
    }
}

#[test]
fn separable_data_reaches_full_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let data: Vec<(Vec<f64>, u8)> = (0..200)
        .map(|_| {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            let y = u8::from(a + 0.5 * b > 0.0);
            let shift = if y == 1 { 0.2 } else { -0.2 };
            (vec![a + shift, b], y)
        })
        .collect();
    let cfg = TrainConfig {
        learning_rate: 1.0,
        epochs: 50,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let model = classifier::train(&data, &cfg, None).unwrap();
    let correct = data
        .iter()
        .filter(|(x, y)| classifier::binarize(model.score(x).unwrap(), 0.5) == *y)
        .count();
    assert_eq!(correct, data.len());
}

#[test]
fn single_example_is_memorized() {
    let data = vec![(vec![0.5, -1.0, 2.0], 1u8)];
    let cfg = TrainConfig {
        learning_rate: 0.5,
        epochs: 400,
        batch_size: 1,
        warmup_fraction: 0.0,
        ..TrainConfig::default()
    };
    let model = classifier::train(&data, &cfg, None).unwrap();
    let trace = &model.loss_trace;
    let end = trace.iter().position(|&l| l < 1e-3).expect("loss falls below 1e-3");
    assert!(trace[..=end].windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn training_is_bit_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data: Vec<(Vec<f64>, u8)> = (0..64)
        .map(|i| ((0..10).map(|_| rng.random_range(-1.0..1.0)).collect(), (i % 3 == 0) as u8))
        .collect();
    for optimizer in [Optimizer::Sgd, Optimizer::Momentum { beta: 0.9 }] {
        let cfg = TrainConfig {
            learning_rate: 0.1,
            epochs: 5,
            batch_size: 7,
            seed: 42,
            optimizer,
            ..TrainConfig::default()
        };
        let spec = LoraSpec {
            rank: 2,
            alpha: 2.0,
            hidden_dim: 6,
        };
        for lora in [None, Some(&spec)] {
            let a = classifier::train(&data, &cfg, lora).unwrap();
            let b = classifier::train(&data, &cfg, lora).unwrap();
            let bits = |m: &classifier::TrainedModel| m.parameters().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a), bits(&b));
            assert_eq!(a.loss_trace, b.loss_trace);
        }
    }
}

#[test]
fn zero_adapter_starts_at_frozen_base_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let base = Matrix::random_normal(4, 6, 0.5, &mut rng);
    let adapter = LoraAdapter::init(2, 16.0, 6, 4, &mut rng);
    assert!(adapter.up.is_zero());
    let effective = apply_lora(&base, &adapter).unwrap();
    let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&effective), bits(&base));
    let backbone = classifier::LoraBackbone::new(base.clone(), adapter).unwrap();
    let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let adapted = backbone.forward(&x).unwrap();
    let frozen = base.matvec(&x).unwrap();
    assert_eq!(
        adapted.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        frozen.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn parameter_counts() {
    assert_eq!(LinearHead::zeros(4096).param_count(), 8194);
    assert_eq!(lora_param_count(8, 4096, 4096), 65_536);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(LoraAdapter::init(8, 16.0, 40, 24, &mut rng).param_count(), 8 * (40 + 24));
}

proptest! {
    #[test]
    fn softmax_sums_to_one(a in -700.0f64..700.0, b in -700.0f64..700.0) {
        let p = softmax([a, b]);
        prop_assert!((p[0] + p[1] - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn softmax_matches_max_subtracted_oracle(a in -50.0f64..50.0, b in -50.0f64..50.0) {
        let m = a.max(b);
        let (ea, eb) = ((a - m).exp(), (b - m).exp());
        let expect = eb / (ea + eb);
        let got = softmax([a, b])[1];
        prop_assert!((got - expect).abs() <= 1e-12 * expect.max(1e-300));
    }

    #[test]
    fn score_is_shift_invariant(a in -30.0f64..30.0, b in -30.0f64..30.0, c in -30.0f64..30.0) {
        let s = softmax([a, b])[1];
        let t = softmax([a + c, b + c])[1];
        prop_assert!((s - t).abs() <= 1e-12);
    }

    #[test]
    fn loss_is_positive(a in -30.0f64..30.0, b in -30.0f64..30.0, y in 0u8..=1) {
        prop_assert!(cross_entropy_loss([a, b], y) > 0.0);
    }

    #[test]
    fn binarize_is_monotone_in_threshold(w in -3.0f64..3.0, x in -3.0f64..3.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let mut head = LinearHead::zeros(1);
        head.weights[0] = [0.0, w];
        let s = predict_score(&head, &[x]).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(classifier::binarize(s, hi) <= classifier::binarize(s, lo));
    }
}
