//! Backprop checked against central finite differences, plus convergence and
//! capacity checks for the 10-hidden-node network.

use focusloop_core::eval::{evaluate, TrainingSet};
use focusloop_core::fnn::{nn_train_with_history, FeedforwardNet, FnnHyper};
use focusloop_core::StateLabel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;

/// Relative error with a 1e-6 floor on the magnitude so that gradients that
/// are zero to rounding (e.g. saturated units) compare absolutely.
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn numeric(net: &FeedforwardNet, z: &[f64], t: f64, mut poke: impl FnMut(&mut FeedforwardNet, f64)) -> f64 {
    let mut plus = net.clone();
    poke(&mut plus, EPS);
    let mut minus = net.clone();
    poke(&mut minus, -EPS);
    (plus.loss(z, t) - minus.loss(z, t)) / (2.0 * EPS)
}

#[test]
fn backprop_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let net = FeedforwardNet::init(
            10,
            FnnHyper {
                seed: case,
                ..FnnHyper::default()
            },
        );
        let z: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let g = net.gradients(&z, t);
        for k in 0..net.w1.len() {
            let n = numeric(&net, &z, t, |m, e| m.w1[k] += e);
            worst = worst.max(rel_err(g.w1[k], n));
        }
        for k in 0..net.b1.len() {
            let n = numeric(&net, &z, t, |m, e| m.b1[k] += e);
            worst = worst.max(rel_err(g.b1[k], n));
        }
        for k in 0..net.w2.len() {
            let n = numeric(&net, &z, t, |m, e| m.w2[k] += e);
            worst = worst.max(rel_err(g.w2[k], n));
        }
        let n = numeric(&net, &z, t, |m, e| m.b2 += e);
        worst = worst.max(rel_err(g.b2, n));
    }
    assert!(worst < 1e-4, "max relative error {}", worst);
}

fn separable_set(rng: &mut ChaCha8Rng) -> TrainingSet {
    let mut set = TrainingSet::default();
    for i in 0..40 {
        let label = if i % 2 == 0 {
            StateLabel::Concentration
        } else {
            StateLabel::Relaxation
        };
        // one informative coordinate with a margin, nine distractors
        let mut x: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        x[0] = label.as_f64() * rng.random_range(0.1..1.0);
        set.push(x, label);
    }
    set
}

#[test]
fn loss_non_increasing_after_warmup() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let set = separable_set(&mut rng);
    for seed in 0..5 {
        let (net, history) = nn_train_with_history(
            &set,
            FnnHyper {
                epochs: 50,
                seed,
                ..FnnHyper::default()
            },
        )
        .unwrap();
        assert_eq!(history.len(), 50);
        for e in 5..49 {
            assert!(
                history[e + 1] <= history[e],
                "seed {} epoch {}: {} -> {}",
                seed,
                e,
                history[e],
                history[e + 1]
            );
        }
        assert_eq!(evaluate(&net, &set).unwrap().overall_acc(), 1.0);
    }
}

#[test]
fn xor_lifted_to_ten_dims() {
    let mut set = TrainingSet::default();
    for (a, b) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        let mut x = vec![0.0; 10];
        x[0] = a;
        x[1] = b;
        let label = if a * b > 0.0 {
            StateLabel::Relaxation
        } else {
            StateLabel::Concentration
        };
        set.push(x, label);
    }
    let solved = (0..10)
        .filter(|&seed| {
            let (net, _) = nn_train_with_history(
                &set,
                FnnHyper {
                    epochs: 5000,
                    seed,
                    ..FnnHyper::default()
                },
            )
            .unwrap();
            evaluate(&net, &set).unwrap().overall_acc() == 1.0
        })
        .count();
    assert!(solved >= 8, "only {} of 10 seeds fit XOR", solved);
}

#[test]
fn training_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let set = separable_set(&mut rng);
    let h = FnnHyper {
        epochs: 10,
        seed: 3,
        ..FnnHyper::default()
    };
    let a = nn_train_with_history(&set, h).unwrap();
    let b = nn_train_with_history(&set, h).unwrap();
    assert_eq!(
        serde_json::to_string(&a.0).unwrap(),
        serde_json::to_string(&b.0).unwrap()
    );
}

#[test]
fn labels_stay_in_codomain() {
    let net = FeedforwardNet::init(10, FnnHyper::default());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..10).map(|_| rng.random_range(-10.0..10.0)).collect();
        let (l, s) = focusloop_core::fnn::nn_predict(&net, &x).unwrap();
        assert!(matches!(l.value(), 1 | -1));
        assert_eq!(l, StateLabel::from_score(s));
    }
}
