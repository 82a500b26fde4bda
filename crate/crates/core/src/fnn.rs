//! Single-hidden-layer feedforward network: tanh hidden layer, linear output,
//! squared error against ±1 targets, per-sample backpropagation at a fixed
//! learning rate.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Predictor, TrainingSet};
use crate::signal::StateLabel;
use crate::svm::Standardization;

pub const HIDDEN_NODES: usize = 10;
pub const DEFAULT_INPUT_DIM: usize = 10;
pub const DEFAULT_LEARNING_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FnnHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for FnnHyper {
    fn default() -> Self {
        Self {
            learning_rate: DEFAULT_LEARNING_RATE,
            epochs: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedforwardNet {
    pub input_dim: usize,
    pub hidden: usize,
    /// hidden x input, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub standardization: Standardization,
    pub hyper: FnnHyper,
}

/// Parameter-shaped gradient of the per-sample loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl FeedforwardNet {
    /// Weights uniform in [-0.5, 0.5] drawn from `seed`.
    pub fn init(input_dim: usize, hyper: FnnHyper) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-0.5..=0.5)).collect()
        };
        let w1 = draw(HIDDEN_NODES * input_dim);
        let b1 = draw(HIDDEN_NODES);
        let w2 = draw(HIDDEN_NODES);
        let b2 = draw(1)[0];
        Self {
            input_dim,
            hidden: HIDDEN_NODES,
            w1,
            b1,
            w2,
            b2,
            standardization: Standardization::identity(input_dim),
            hyper,
        }
    }

    pub fn zeros(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden: HIDDEN_NODES,
            w1: vec![0.0; HIDDEN_NODES * input_dim],
            b1: vec![0.0; HIDDEN_NODES],
            w2: vec![0.0; HIDDEN_NODES],
            b2: 0.0,
            standardization: Standardization::identity(input_dim),
            hyper: FnnHyper::default(),
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        Ok(())
    }

    /// Hidden activations and output for an already standardized input.
    pub fn forward(&self, z: &[f64]) -> (Vec<f64>, f64) {
        let h: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * self.input_dim..(j + 1) * self.input_dim];
                let pre: f64 = row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + self.b1[j];
                libm::tanh(pre)
            })
            .collect();
        let y = h.iter().zip(&self.w2).map(|(a, b)| a * b).sum::<f64>() + self.b2;
        (h, y)
    }

    /// `½ (y - target)²` on an already standardized input.
    pub fn loss(&self, z: &[f64], target: f64) -> f64 {
        let (_, y) = self.forward(z);
        0.5 * (y - target) * (y - target)
    }

    /// Analytic gradient of [`FeedforwardNet::loss`].
    pub fn gradients(&self, z: &[f64], target: f64) -> Gradients {
        let (h, y) = self.forward(z);
        let dy = y - target;
        let mut g = Gradients {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.hidden],
            w2: h.iter().map(|hj| dy * hj).collect(),
            b2: dy,
        };
        for j in 0..self.hidden {
            let dpre = dy * self.w2[j] * (1.0 - h[j] * h[j]);
            g.b1[j] = dpre;
            for (i, zi) in z.iter().enumerate() {
                g.w1[j * self.input_dim + i] = dpre * zi;
            }
        }
        g
    }

    fn step(&mut self, g: &Gradients, lr: f64) {
        for (w, d) in self.w1.iter_mut().zip(&g.w1) {
            *w -= lr * d;
        }
        for (w, d) in self.b1.iter_mut().zip(&g.b1) {
            *w -= lr * d;
        }
        for (w, d) in self.w2.iter_mut().zip(&g.w2) {
            *w -= lr * d;
        }
        self.b2 -= lr * g.b2;
    }

    /// Raw output on an unstandardized input.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.forward(&self.standardization.apply(x)).1)
    }
}

/// Trains a fresh network and returns it with the mean loss over the whole
/// set measured after every epoch.
pub fn nn_train_with_history(
    set: &TrainingSet,
    hyper: FnnHyper,
) -> Result<(FeedforwardNet, Vec<f64>)> {
    if set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let dim = set.dim();
    let mut net = FeedforwardNet::init(dim, hyper);
    let (standardization, _) = Standardization::fit(set.features())?;
    let zs: Vec<Vec<f64>> = set
        .features()
        .iter()
        .map(|f| standardization.apply(f))
        .collect();
    net.standardization = standardization;
    let targets: Vec<f64> = set.labels().iter().map(|l| l.as_f64()).collect();
    // separate stream from the weight init
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..zs.len()).collect();
    let mut history = Vec::with_capacity(hyper.epochs);
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let g = net.gradients(&zs[i], targets[i]);
            net.step(&g, hyper.learning_rate);
        }
        let total: f64 = zs.iter().zip(&targets).map(|(z, &t)| net.loss(z, t)).sum();
        history.push(total / zs.len() as f64);
    }
    Ok((net, history))
}

/// Trains on `set`, requiring the default 10-dimensional input.
pub fn nn_train(set: &TrainingSet, hyper: FnnHyper) -> Result<FeedforwardNet> {
    if set.dim() != DEFAULT_INPUT_DIM {
        return Err(Error::DimensionMismatch {
            expected: DEFAULT_INPUT_DIM,
            got: set.dim(),
        });
    }
    nn_train_with_history(set, hyper).map(|(n, _)| n)
}

pub fn nn_predict(m: &FeedforwardNet, x: &[f64]) -> Result<(StateLabel, f64)> {
    let score = m.score(x)?;
    Ok((StateLabel::from_score(score), score))
}

impl Predictor for FeedforwardNet {
    fn predict(&self, x: &[f64]) -> Result<StateLabel> {
        nn_predict(self, x).map(|(l, _)| l)
    }
}
