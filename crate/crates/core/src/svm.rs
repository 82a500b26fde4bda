//! Linear soft-margin SVM trained by seeded stochastic subgradient descent on
//! the regularized hinge loss (Pegasos-style step schedule, unregularized
//! bias).

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Predictor, TrainingSet};
use crate::signal::StateLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmHyper {
    /// L2 regularization strength λ.
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmHyper {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 30,
            seed: 0,
        }
    }
}

/// Per-dimension z-score parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardization {
    pub fn identity(dim: usize) -> Self {
        Self {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    /// Fits means and population stds; zero-variance dimensions get std 1 and
    /// set the returned flag.
    pub fn fit(features: &[Vec<f64>]) -> Result<(Self, bool)> {
        let first = features.first().ok_or(Error::Empty("features"))?;
        let dim = first.len();
        let n = features.len() as f64;
        let mut means = vec![0.0; dim];
        for f in features {
            if f.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: f.len(),
                });
            }
            for (m, v) in means.iter_mut().zip(f) {
                *m += v;
            }
        }
        for m in means.iter_mut() {
            *m /= n;
        }
        let mut vars = vec![0.0; dim];
        for f in features {
            for ((s, v), m) in vars.iter_mut().zip(f).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let mut clamped = false;
        let stds = vars
            .into_iter()
            .map(|s| {
                let sd = libm::sqrt(s / n);
                if sd > 1e-12 {
                    sd
                } else {
                    clamped = true;
                    1.0
                }
            })
            .collect();
        Ok((Self { means, stds }, clamped))
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardization: Standardization,
    pub hyper: SvmHyper,
    /// Set when some feature had zero variance and its std was clamped to 1.
    pub zero_variance_clamped: bool,
}

impl LinearSvmModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Raw decision value `w · standardize(x) + b`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("svm input"));
        }
        let z = self.standardization.apply(x);
        Ok(z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias)
    }
}

pub fn svm_train(set: &TrainingSet, hyper: SvmHyper) -> Result<LinearSvmModel> {
    set.check_trainable()?;
    if !(hyper.lambda > 0.0) {
        return Err(Error::Degenerate("svm lambda must be positive".into()));
    }
    let (standardization, clamped) = Standardization::fit(set.features())?;
    let xs: Vec<Vec<f64>> = set
        .features()
        .iter()
        .map(|f| standardization.apply(f))
        .collect();
    let ys: Vec<f64> = set.labels().iter().map(|l| l.as_f64()).collect();
    let dim = standardization.dim();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    // offset so the first step size is 1 rather than 1/λ
    let t0 = 1.0 / hyper.lambda;
    let mut t = 0.0;
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1.0;
            let eta = 1.0 / (hyper.lambda * (t + t0));
            let x = &xs[i];
            let margin = ys[i] * (x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b);
            let shrink = 1.0 - eta * hyper.lambda;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(x) {
                    *wj += eta * ys[i] * xj;
                }
                b += eta * ys[i];
            }
        }
    }
    Ok(LinearSvmModel {
        weights: w,
        bias: b,
        standardization,
        hyper,
        zero_variance_clamped: clamped,
    })
}

pub fn svm_predict(m: &LinearSvmModel, x: &[f64]) -> Result<(StateLabel, f64)> {
    let score = m.decision(x)?;
    Ok((StateLabel::from_score(score), score))
}

impl Predictor for LinearSvmModel {
    fn predict(&self, x: &[f64]) -> Result<StateLabel> {
        svm_predict(self, x).map(|(l, _)| l)
    }
}
