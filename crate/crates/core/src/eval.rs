//! Training sets, stratified k-fold splitting and accuracy reporting.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::StateLabel;

/// Anything that maps a feature vector to a state label.
pub trait Predictor {
    fn predict(&self, x: &[f64]) -> Result<StateLabel>;
}

impl<F> Predictor for F
where
    F: Fn(&[f64]) -> StateLabel,
{
    fn predict(&self, x: &[f64]) -> Result<StateLabel> {
        Ok(self(x))
    }
}

/// Equal-length features with one label each.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingSet {
    features: Vec<Vec<f64>>,
    labels: Vec<StateLabel>,
}

impl TrainingSet {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<StateLabel>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                got: labels.len(),
            });
        }
        if let Some(first) = features.first() {
            let d = first.len();
            for f in &features {
                if f.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: f.len(),
                    });
                }
                if f.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("training features"));
                }
            }
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[StateLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let conc = self
            .labels
            .iter()
            .filter(|l| **l == StateLabel::Concentration)
            .count();
        (conc, self.labels.len() - conc)
    }

    /// Non-empty with both classes present.
    pub fn check_trainable(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let (c, r) = self.class_counts();
        if c == 0 || r == 0 {
            return Err(Error::SingleClass);
        }
        Ok(())
    }

    pub fn subset(&self, idx: &[usize]) -> TrainingSet {
        TrainingSet {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn push(&mut self, x: Vec<f64>, label: StateLabel) {
        self.features.push(x);
        self.labels.push(label);
    }
}

/// Confusion counts for the two classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub concentration_total: usize,
    pub concentration_correct: usize,
    pub relaxation_total: usize,
    pub relaxation_correct: usize,
}

impl ClassCounts {
    pub fn record(&mut self, truth: StateLabel, predicted: StateLabel) {
        match truth {
            StateLabel::Concentration => {
                self.concentration_total += 1;
                self.concentration_correct += (predicted == truth) as usize;
            }
            StateLabel::Relaxation => {
                self.relaxation_total += 1;
                self.relaxation_correct += (predicted == truth) as usize;
            }
        }
    }

    pub fn merge(&mut self, other: &ClassCounts) {
        self.concentration_total += other.concentration_total;
        self.concentration_correct += other.concentration_correct;
        self.relaxation_total += other.relaxation_total;
        self.relaxation_correct += other.relaxation_correct;
    }

    pub fn total(&self) -> usize {
        self.concentration_total + self.relaxation_total
    }

    fn ratio(num: usize, den: usize) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn concentration_acc(&self) -> f64 {
        Self::ratio(self.concentration_correct, self.concentration_total)
    }

    pub fn relaxation_acc(&self) -> f64 {
        Self::ratio(self.relaxation_correct, self.relaxation_total)
    }

    pub fn overall_acc(&self) -> f64 {
        Self::ratio(
            self.concentration_correct + self.relaxation_correct,
            self.total(),
        )
    }
}

/// Concentration / relaxation / all accuracies, overall and per fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub concentration_acc: f64,
    pub relaxation_acc: f64,
    pub overall_acc: f64,
    pub counts: ClassCounts,
    pub per_fold: Vec<ClassCounts>,
}

impl AccuracyReport {
    pub fn from_folds(per_fold: Vec<ClassCounts>) -> Self {
        let mut counts = ClassCounts::default();
        for f in &per_fold {
            counts.merge(f);
        }
        Self {
            concentration_acc: counts.concentration_acc(),
            relaxation_acc: counts.relaxation_acc(),
            overall_acc: counts.overall_acc(),
            counts,
            per_fold,
        }
    }
}

/// Seeded stratified split: each class is shuffled then dealt round-robin, so
/// per-fold class counts differ from the global ratio by at most one sample.
pub fn stratified_folds(labels: &[StateLabel], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Degenerate(alloc::format!("k = {} folds", k)));
    }
    let mut conc: Vec<usize> = Vec::new();
    let mut relax: Vec<usize> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            StateLabel::Concentration => conc.push(i),
            StateLabel::Relaxation => relax.push(i),
        }
    }
    let fewest = conc.len().min(relax.len());
    if fewest < k {
        return Err(Error::TooFewSamples {
            needed: k,
            k,
            got: fewest,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    conc.shuffle(&mut rng);
    relax.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    // relaxation continues where concentration stopped so fold sizes stay even
    for (j, &i) in conc.iter().chain(relax.iter()).enumerate() {
        folds[j % k].push(i);
    }
    for f in folds.iter_mut() {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Indices not in `fold`, for a fold produced by [`stratified_folds`].
pub fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in fold {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

pub fn evaluate<P: Predictor + ?Sized>(model: &P, set: &TrainingSet) -> Result<ClassCounts> {
    let mut counts = ClassCounts::default();
    for (x, &y) in set.features().iter().zip(set.labels()) {
        counts.record(y, model.predict(x)?);
    }
    Ok(counts)
}

/// Stratified k-fold cross-validation of an arbitrary trainer.
pub fn cross_validate<P, T>(
    set: &TrainingSet,
    k: usize,
    seed: u64,
    mut trainer: T,
) -> Result<AccuracyReport>
where
    P: Predictor,
    T: FnMut(&TrainingSet) -> Result<P>,
{
    let folds = stratified_folds(set.labels(), k, seed)?;
    let mut per_fold = Vec::with_capacity(k);
    for fold in &folds {
        let train = set.subset(&complement(set.len(), fold));
        let test = set.subset(fold);
        let model = trainer(&train)?;
        per_fold.push(evaluate(&model, &test)?);
    }
    Ok(AccuracyReport::from_folds(per_fold))
}
