//! Analytic hierarchy channel selection.
//!
//! Three criteria rank a candidate channel set: classification accuracy
//! (`c1`), prior knowledge about the bands (`c2`, halved when alpha is used
//! because the headband has no occipital electrode) and the reciprocal of the
//! channel count (`c3`). Criterion weights are the principal eigenvector of a
//! reciprocal pairwise-comparison matrix.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Band, ChannelSet};

const RECIPROCAL_TOL: f64 = 1e-12;
pub const POWER_ITERATION_TOL: f64 = 1e-12;
pub const POWER_ITERATION_MAX: usize = 10_000;

/// Saaty random index for n = 3.
pub const RANDOM_INDEX_3: f64 = 0.58;
/// Conventional acceptance bound on the consistency ratio.
pub const CONSISTENCY_THRESHOLD: f64 = 0.1;

/// Range maxima used to standardize (c1, c2, c3).
pub const FACTOR_MAXIMA: [f64; 3] = [1.0, 1.0, 0.5];

/// The comparison matrix used for channel selection:
/// accuracy vs prior knowledge 8, accuracy vs channel count 3, channel count
/// vs prior knowledge 3.
pub fn default_comparison() -> ComparisonMatrix {
    ComparisonMatrix::from_upper(3, &[8.0, 3.0, 1.0 / 3.0]).expect("static matrix is valid")
}

/// Positive reciprocal n x n matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonMatrix {
    n: usize,
    a: Vec<f64>,
}

impl ComparisonMatrix {
    pub fn new(n: usize, a: Vec<f64>) -> Result<Self> {
        if n == 0 || a.len() != n * n {
            return Err(Error::InvalidComparisonMatrix(format!(
                "expected {} entries, got {}",
                n * n,
                a.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = a[i * n + j];
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidComparisonMatrix(format!(
                        "entry ({}, {}) = {} is not positive",
                        i, j, v
                    )));
                }
            }
            if (a[i * n + i] - 1.0).abs() > RECIPROCAL_TOL {
                return Err(Error::InvalidComparisonMatrix(format!(
                    "diagonal ({}, {}) must be 1",
                    i, i
                )));
            }
            for j in 0..i {
                if (a[i * n + j] - 1.0 / a[j * n + i]).abs() > RECIPROCAL_TOL {
                    return Err(Error::InvalidComparisonMatrix(format!(
                        "entries ({}, {}) and ({}, {}) are not reciprocal",
                        i, j, j, i
                    )));
                }
            }
        }
        Ok(Self { n, a })
    }

    /// Builds the matrix from its strict upper triangle in row order
    /// (`a12, a13, ..., a23, ...`); the rest follows from reciprocity.
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != n * (n.saturating_sub(1)) / 2 {
            return Err(Error::InvalidComparisonMatrix(format!(
                "{} upper entries for n = {}",
                upper.len(),
                n
            )));
        }
        let mut a = vec![1.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                a[i * n + j] = upper[k];
                a[j * n + i] = 1.0 / upper[k];
                k += 1;
            }
        }
        Self::new(n, a)
    }

    /// `a[i][j] = v_i / v_j`, perfectly consistent.
    pub fn consistent_from(v: &[f64]) -> Result<Self> {
        let n = v.len();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = if i == j { 1.0 } else { v[i] / v[j] };
            }
        }
        Self::new(n, a)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.a[i * self.n + j] * w[j]).sum())
            .collect()
    }
}

/// Criterion weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityVector(pub Vec<f64>);

impl PriorityVector {
    pub fn weights(&self) -> &[f64] {
        &self.0
    }
}

/// Power iteration from the uniform vector with sum normalization.
pub fn principal_eigenvector(a: &ComparisonMatrix) -> Result<(PriorityVector, f64)> {
    let n = a.dim();
    let mut w = vec![1.0 / n as f64; n];
    for _ in 0..POWER_ITERATION_MAX {
        let mut next = a.apply(&w);
        let sum: f64 = next.iter().sum();
        for x in next.iter_mut() {
            *x /= sum;
        }
        let delta = next
            .iter()
            .zip(&w)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        w = next;
        if delta < POWER_ITERATION_TOL {
            let aw = a.apply(&w);
            let lambda = aw.iter().zip(&w).map(|(x, y)| x / y).sum::<f64>() / n as f64;
            return Ok((PriorityVector(w), lambda));
        }
    }
    Err(Error::IterationLimit(POWER_ITERATION_MAX))
}

/// `((λ_max - n) / (n - 1)) / RI(3)`.
pub fn consistency_ratio(a: &ComparisonMatrix) -> Result<f64> {
    if a.dim() != 3 {
        return Err(Error::UnsupportedSize(a.dim()));
    }
    let (_, lambda) = principal_eigenvector(a)?;
    Ok(((lambda - 3.0) / 2.0) / RANDOM_INDEX_3)
}

/// A candidate channel set with its measured accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelOption {
    pub channels: ChannelSet,
    /// Classification accuracy in [0, 1].
    pub accuracy: f64,
}

impl ChannelOption {
    pub fn new(channels: ChannelSet, accuracy: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(Error::Degenerate(format!(
                "accuracy {} outside [0, 1]",
                accuracy
            )));
        }
        Ok(Self { channels, accuracy })
    }

    pub fn c1(&self) -> f64 {
        self.accuracy
    }

    /// 0.5 when any alpha channel is used, else 1.
    pub fn c2(&self) -> f64 {
        if self.channels.contains_band(Band::Alpha) {
            0.5
        } else {
            1.0
        }
    }

    pub fn c3(&self) -> f64 {
        1.0 / self.channels.len() as f64
    }

    fn band_ranks(&self) -> Vec<u8> {
        let mut r: Vec<u8> = self
            .channels
            .channels()
            .iter()
            .map(|c| c.band.preference_rank())
            .collect();
        r.sort_unstable();
        r
    }
}

/// Weighted sum of the standardized factors.
pub fn score_option(w: &PriorityVector, o: &ChannelOption) -> f64 {
    let factors = [o.c1(), o.c2(), o.c3()];
    w.0.iter()
        .zip(factors.iter().zip(FACTOR_MAXIMA.iter()))
        .map(|(wi, (f, max))| wi * f / max)
        .sum()
}

/// Highest Q wins; ties go to fewer channels, then to the preferred bands.
pub fn select_channels<'a>(
    w: &PriorityVector,
    options: &'a [ChannelOption],
) -> Result<&'a ChannelOption> {
    let mut best: Option<(&ChannelOption, f64)> = None;
    for o in options {
        let q = score_option(w, o);
        best = match best {
            None => Some((o, q)),
            Some((b, bq)) => {
                let better = if (q - bq).abs() <= 1e-12 {
                    tie_break(o, b) == Ordering::Less
                } else {
                    q > bq
                };
                if better {
                    Some((o, q))
                } else {
                    Some((b, bq))
                }
            }
        };
    }
    best.map(|(o, _)| o).ok_or(Error::Empty("channel options"))
}

fn tie_break(a: &ChannelOption, b: &ChannelOption) -> Ordering {
    a.channels
        .len()
        .cmp(&b.channels.len())
        .then_with(|| a.band_ranks().cmp(&b.band_ranks()))
}
