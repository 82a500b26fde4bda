//! Training workflows: CSP+SVM on protocol trials, the look-ahead network
//! bootstrapped from SVM labels, and a single-channel threshold baseline.

use focusloop_core::csp::{apply_filters, average_filters, class_covariance, compute_filters};
use focusloop_core::eval::{complement, stratified_folds, AccuracyReport, ClassCounts, Predictor, TrainingSet};
use focusloop_core::fnn::{nn_train_with_history, FeedforwardNet, FnnHyper};
use focusloop_core::signal::{extract_segment, flatten_window, sliding_windows};
use focusloop_core::svm::{svm_train, SvmHyper};
use focusloop_core::tick::{CspSvm, TrainedModel};
use focusloop_core::{EegSample, StateLabel, Trial, Window, WINDOW_LEN};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prediction horizon of the network, in samples (0.5 s).
pub const LOOKAHEAD: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmWorkflowConfig {
    pub seed: u64,
    /// Effective part of each concentration trial, seconds from trial start.
    pub conc_segment_s: (f64, f64),
    pub relax_segment_s: (f64, f64),
    /// Share of each class's trials used for training.
    pub train_fraction: f64,
    /// Training trials are split into this many groups; filters are fit per
    /// group and averaged.
    pub csp_groups: usize,
    pub svm: SvmHyper,
    pub cv_folds: usize,
    /// Held-out accuracy must exceed this for the model to be accepted.
    pub accept_above: f64,
    pub window_len: usize,
}

impl Default for SvmWorkflowConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            conc_segment_s: (2.0, 6.0),
            relax_segment_s: (4.0, 8.0),
            train_fraction: 0.75,
            csp_groups: 5,
            svm: SvmHyper::default(),
            cv_folds: 4,
            accept_above: 0.80,
            window_len: WINDOW_LEN,
        }
    }
}

impl SvmWorkflowConfig {
    fn segment(&self, label: StateLabel) -> (f64, f64) {
        match label {
            StateLabel::Concentration => self.conc_segment_s,
            StateLabel::Relaxation => self.relax_segment_s,
        }
    }
}

/// All stride-1 windows over the effective segment of `t`.
pub fn trial_windows(t: &Trial, cfg: &SvmWorkflowConfig) -> Result<Vec<Window>> {
    let (a, b) = cfg.segment(t.label);
    Ok(sliding_windows(extract_segment(t, a, b)?, cfg.window_len)?)
}

fn split_by_class<'a>(trials: &[&'a Trial]) -> (Vec<&'a Trial>, Vec<&'a Trial>) {
    trials.iter().partition(|t| t.label == StateLabel::Concentration)
}

/// Fits grouped, averaged CSP filters and an SVM on `trials`.
pub fn fit_csp_svm(trials: &[&Trial], cfg: &SvmWorkflowConfig) -> Result<CspSvm> {
    let (conc, relax) = split_by_class(trials);
    if conc.is_empty() || relax.is_empty() {
        return Err(focusloop_core::Error::SingleClass.into());
    }
    let groups = cfg.csp_groups.clamp(1, conc.len().min(relax.len()));
    let windows_of = |ts: &[&Trial], g: usize| -> Result<Vec<Window>> {
        let mut out = Vec::new();
        for t in ts.iter().skip(g).step_by(groups) {
            out.extend(trial_windows(t, cfg)?);
        }
        Ok(out)
    };
    let mut pairs = Vec::with_capacity(groups);
    for g in 0..groups {
        let ct = class_covariance(&windows_of(&conc, g)?)?;
        let cr = class_covariance(&windows_of(&relax, g)?)?;
        pairs.push(compute_filters(&ct, &cr)?.filters);
    }
    let filters = average_filters(&pairs)?;

    let mut set = TrainingSet::default();
    for t in trials {
        for w in trial_windows(t, cfg)? {
            set.push(apply_filters(&filters, &w)?, t.label);
        }
    }
    let svm = svm_train(&set, cfg.svm)?;
    Ok(CspSvm { filters, svm })
}

/// Window-level confusion counts of `predict` over the effective segments.
pub fn evaluate_trials<F>(trials: &[&Trial], cfg: &SvmWorkflowConfig, mut predict: F) -> Result<ClassCounts>
where
    F: FnMut(&Window) -> Result<StateLabel>,
{
    let mut counts = ClassCounts::default();
    for t in trials {
        for w in trial_windows(t, cfg)? {
            counts.record(t.label, predict(&w)?);
        }
    }
    Ok(counts)
}

fn check_balance(trials: &[Trial]) -> Result<()> {
    let conc = trials.iter().filter(|t| t.label == StateLabel::Concentration).count();
    let relax = trials.len() - conc;
    if conc != relax || conc < 2 {
        return Err(Error::ClassImbalance {
            concentration: conc,
            relaxation: relax,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmWorkflowResult {
    pub model: CspSvm,
    pub train_trials: Vec<usize>,
    pub test_trials: Vec<usize>,
    pub test: ClassCounts,
    pub test_accuracy: f64,
    pub accepted: bool,
}

/// Seeded per-class split of trial indices into (train, test).
pub fn split_trials(trials: &[Trial], train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for label in [StateLabel::Concentration, StateLabel::Relaxation] {
        let mut idx: Vec<usize> = (0..trials.len()).filter(|&i| trials[i].label == label).collect();
        idx.shuffle(&mut rng);
        let n_train = ((idx.len() as f64) * train_fraction).round() as usize;
        let n_train = n_train.clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Seeded train/test split, CSP fit on the training trials only, SVM
/// trained on their windows and scored on the held-out trials' windows.
pub fn train_svm_workflow(trials: &[Trial], cfg: &SvmWorkflowConfig) -> Result<SvmWorkflowResult> {
    check_balance(trials)?;
    let (train_idx, test_idx) = split_trials(trials, cfg.train_fraction, cfg.seed);
    let train: Vec<&Trial> = train_idx.iter().map(|&i| &trials[i]).collect();
    let test: Vec<&Trial> = test_idx.iter().map(|&i| &trials[i]).collect();
    let model = fit_csp_svm(&train, cfg)?;
    let counts = evaluate_trials(&test, cfg, |w| Ok(model.predict_window(w)?.0))?;
    let acc = counts.overall_acc();
    Ok(SvmWorkflowResult {
        model,
        train_trials: train_idx,
        test_trials: test_idx,
        test: counts,
        test_accuracy: acc,
        accepted: acc > cfg.accept_above,
    })
}

/// Trial-level stratified k-fold CV. `fit_eval` gets the training and test
/// trials of each fold.
pub fn trial_cross_validate<F>(trials: &[Trial], cfg: &SvmWorkflowConfig, mut fit_eval: F) -> Result<AccuracyReport>
where
    F: FnMut(&[&Trial], &[&Trial]) -> Result<ClassCounts>,
{
    check_balance(trials)?;
    let labels: Vec<StateLabel> = trials.iter().map(|t| t.label).collect();
    let folds = stratified_folds(&labels, cfg.cv_folds, cfg.seed)?;
    let mut per_fold = Vec::with_capacity(folds.len());
    for fold in &folds {
        let train: Vec<&Trial> = complement(trials.len(), fold).iter().map(|&i| &trials[i]).collect();
        let test: Vec<&Trial> = fold.iter().map(|&i| &trials[i]).collect();
        per_fold.push(fit_eval(&train, &test)?);
    }
    Ok(AccuracyReport::from_folds(per_fold))
}

/// CV of the full CSP+SVM pipeline; filters are refit inside every fold.
pub fn csp_svm_cv(trials: &[Trial], cfg: &SvmWorkflowConfig) -> Result<AccuracyReport> {
    trial_cross_validate(trials, cfg, |train, test| {
        let m = fit_csp_svm(train, cfg)?;
        evaluate_trials(test, cfg, |w| Ok(m.predict_window(w)?.0))
    })
}

/// Thresholds the window mean of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdClassifier {
    pub channel: usize,
    pub threshold: f64,
    /// +1: above threshold is concentration.
    pub polarity: f64,
}

fn window_means(w: &Window) -> Vec<f64> {
    (0..w.channels())
        .map(|c| w.row(c).iter().sum::<f64>() / w.samples() as f64)
        .collect()
}

impl Predictor for ThresholdClassifier {
    fn predict(&self, x: &[f64]) -> focusloop_core::Result<StateLabel> {
        Ok(StateLabel::from_score(self.polarity * (x[self.channel] - self.threshold)))
    }
}

impl ThresholdClassifier {
    pub fn predict_window(&self, w: &Window) -> StateLabel {
        let m = w.row(self.channel).iter().sum::<f64>() / w.samples() as f64;
        StateLabel::from_score(self.polarity * (m - self.threshold))
    }

    /// Best channel, threshold and polarity by training accuracy. Ties go to
    /// the lower channel index.
    pub fn fit(set: &TrainingSet) -> Result<Self> {
        set.check_trainable()?;
        let n = set.len();
        let mut best_correct = 0;
        let mut best = Self { channel: 0, threshold: 0.0, polarity: 1.0 };
        for c in 0..set.dim() {
            let mut v: Vec<(f64, bool)> = set
                .features()
                .iter()
                .zip(set.labels())
                .map(|(x, l)| (x[c], *l == StateLabel::Concentration))
                .collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            // cut k puts v[..k] below the threshold
            let mut pos_above = v.iter().filter(|p| p.1).count();
            let mut neg_below = 0;
            for k in 0..=n {
                if k > 0 {
                    if v[k - 1].1 {
                        pos_above -= 1;
                    } else {
                        neg_below += 1;
                    }
                }
                if 0 < k && k < n && v[k - 1].0 == v[k].0 {
                    continue;
                }
                let threshold = match k {
                    0 => v[0].0 - 1.0,
                    k if k == n => v[n - 1].0 + 1.0,
                    k => 0.5 * (v[k - 1].0 + v[k].0),
                };
                let up = pos_above + neg_below;
                for (correct, polarity) in [(up, 1.0), (n - up, -1.0)] {
                    if correct > best_correct {
                        best_correct = correct;
                        best = Self { channel: c, threshold, polarity };
                    }
                }
            }
        }
        Ok(best)
    }
}

/// CV of the best-single-channel threshold rule on the same folds.
pub fn threshold_baseline_cv(trials: &[Trial], cfg: &SvmWorkflowConfig) -> Result<AccuracyReport> {
    trial_cross_validate(trials, cfg, |train, test| {
        let mut set = TrainingSet::default();
        for t in train {
            for w in trial_windows(t, cfg)? {
                set.push(window_means(&w), t.label);
            }
        }
        let clf = ThresholdClassifier::fit(&set)?;
        evaluate_trials(test, cfg, |w| Ok(clf.predict_window(w)))
    })
}

/// Index bookkeeping for one look-ahead training pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NnPair {
    /// Sample index where the input window ends.
    pub input_end: usize,
    /// Sample index where the window that supplies the target label ends.
    pub target_end: usize,
}

/// Pairs for an `n`-sample recording: windows ending at `t` paired with the
/// window ending at `t + lookahead`.
pub fn nn_pairs(n: usize, window_len: usize, lookahead: usize) -> Result<Vec<NnPair>> {
    let needed = window_len + lookahead;
    if window_len == 0 || n < needed {
        return Err(Error::InsufficientSamples { needed, got: n });
    }
    Ok((window_len - 1..n - lookahead)
        .map(|t| NnPair {
            input_end: t,
            target_end: t + lookahead,
        })
        .collect())
}

/// SVM label of every stride-1 window; entry `i` belongs to the window
/// ending at sample `i + window_len - 1`.
pub fn svm_window_labels(samples: &[EegSample], svm: &CspSvm, window_len: usize) -> Result<Vec<StateLabel>> {
    sliding_windows(samples, window_len)?
        .iter()
        .map(|w| svm.predict_window(w).map(|(l, _)| l).map_err(Error::from))
        .collect()
}

/// Look-ahead training set: flattened windows with the SVM label of the
/// window ending `LOOKAHEAD` samples later.
pub fn nn_training_set(samples: &[EegSample], svm: &CspSvm, window_len: usize) -> Result<(TrainingSet, Vec<NnPair>)> {
    let pairs = nn_pairs(samples.len(), window_len, LOOKAHEAD)?;
    let windows = sliding_windows(samples, window_len)?;
    let labels = svm_window_labels(samples, svm, window_len)?;
    let first = window_len - 1;
    let mut set = TrainingSet::default();
    for p in &pairs {
        set.push(flatten_window(&windows[p.input_end - first]), labels[p.target_end - first]);
    }
    Ok((set, pairs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnWorkflowResult {
    pub net: FeedforwardNet,
    pub pairs: usize,
    pub loss_history: Vec<f64>,
}

pub fn train_nn_workflow(
    samples: &[EegSample],
    svm: &CspSvm,
    window_len: usize,
    hyper: FnnHyper,
) -> Result<NnWorkflowResult> {
    let (set, pairs) = nn_training_set(samples, svm, window_len)?;
    let (net, loss_history) = nn_train_with_history(&set, hyper)?;
    Ok(NnWorkflowResult {
        net,
        pairs: pairs.len(),
        loss_history,
    })
}

/// Share of windows whose prediction matches `truth` at the window end plus
/// `lookahead` samples. `truth[i]` is the prompted label of sample `i`;
/// unprompted samples are skipped.
pub fn lookahead_agreement(
    model: &TrainedModel,
    samples: &[EegSample],
    truth: &[Option<StateLabel>],
    window_len: usize,
    lookahead: usize,
) -> Result<f64> {
    let windows = sliding_windows(samples, window_len)?;
    let (mut hit, mut total) = (0usize, 0usize);
    for (i, w) in windows.iter().enumerate() {
        let target = i + window_len - 1 + lookahead;
        let Some(Some(t)) = truth.get(target) else {
            continue;
        };
        total += 1;
        hit += (model.predict_window(w)?.0 == *t) as usize;
    }
    if total == 0 {
        return Err(Error::InsufficientSamples {
            needed: window_len + lookahead,
            got: samples.len(),
        });
    }
    Ok(hit as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_counts() {
        assert_eq!(nn_pairs(1200, 5, 5).unwrap().len(), 1191);
        let one = nn_pairs(10, 5, 5).unwrap();
        assert_eq!(one, vec![NnPair { input_end: 4, target_end: 9 }]);
        assert!(nn_pairs(9, 5, 5).is_err());
    }

    #[test]
    fn threshold_fit_finds_separating_cut() {
        let mut set = TrainingSet::default();
        for i in 0..10 {
            set.push(vec![0.0, i as f64], StateLabel::Relaxation);
            set.push(vec![0.0, 20.0 + i as f64], StateLabel::Concentration);
        }
        let c = ThresholdClassifier::fit(&set).unwrap();
        assert_eq!(c.channel, 1);
        assert_eq!(c.polarity, 1.0);
        assert!(c.threshold > 9.0 && c.threshold < 20.0);
        // reversed polarity
        let mut set = TrainingSet::default();
        for i in 0..10 {
            set.push(vec![i as f64], StateLabel::Concentration);
            set.push(vec![20.0 + i as f64], StateLabel::Relaxation);
        }
        let c = ThresholdClassifier::fit(&set).unwrap();
        assert_eq!(c.polarity, -1.0);
        assert_eq!(c.predict(&[0.0]).unwrap(), StateLabel::Concentration);
    }

    #[test]
    fn split_is_stratified_and_seeded() {
        let trials: Vec<Trial> = (0..40)
            .map(|i| {
                let (label, d) = if i < 20 { (StateLabel::Concentration, 10) } else { (StateLabel::Relaxation, 15) };
                let samples = (0..d * 10).map(|k| EegSample::new(k as u64 * 100, vec![0.0, 0.0])).collect();
                Trial::new(label, samples, d).unwrap()
            })
            .collect();
        let (train, test) = split_trials(&trials, 0.75, 3);
        assert_eq!(train.len(), 30);
        assert_eq!(test.len(), 10);
        assert_eq!(test.iter().filter(|&&i| i < 20).count(), 5);
        assert_eq!(split_trials(&trials, 0.75, 3), (train, test));
        assert_eq!(trial_windows(&trials[0], &SvmWorkflowConfig::default()).unwrap().len(), 36);
        assert_eq!(trial_windows(&trials[39], &SvmWorkflowConfig::default()).unwrap().len(), 36);
    }
}
