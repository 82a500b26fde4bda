//! Common spatial pattern filters for a two-class (concentration/relaxation)
//! problem.
//!
//! Each class covariance is the mean of trace-normalized `X Xᵀ` over that
//! class's windows. Filters solve `C_T w = λ (C_T + C_R) w` by whitening the
//! composite covariance and diagonalizing the whitened concentration
//! covariance. The extreme eigenvectors give one filter per class.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, symmetric_eigen};
use crate::signal::Window;

const SYMMETRY_TOL: f64 = 1e-12;
const MIN_COMPOSITE_EIGENVALUE: f64 = 1e-10;
const MIN_AVERAGE_NORM: f64 = 1e-9;

/// Symmetric, PSD, unit-trace C x C matrix (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    n: usize,
    m: Vec<f64>,
}

impl CovarianceMatrix {
    /// Wraps a row-major matrix after checking symmetry; the trace is
    /// normalized to 1.
    pub fn new(n: usize, m: Vec<f64>) -> Result<Self> {
        if m.len() != n * n || n == 0 {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: m.len(),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariance"));
        }
        for i in 0..n {
            for j in 0..i {
                if (m[i * n + j] - m[j * n + i]).abs() >= SYMMETRY_TOL {
                    return Err(Error::Degenerate(format!(
                        "covariance not symmetric at ({}, {})",
                        i, j
                    )));
                }
            }
        }
        let trace: f64 = (0..n).map(|i| m[i * n + i]).sum();
        if trace <= 0.0 {
            return Err(Error::Degenerate(format!("covariance trace {}", trace)));
        }
        Ok(Self {
            n,
            m: m.into_iter().map(|v| v / trace).collect(),
        })
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let n = values.len();
        let mut m = alloc::vec![0.0; n * n];
        for (i, v) in values.iter().enumerate() {
            m[i * n + i] = *v;
        }
        Self::new(n, m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.m
    }
}

/// One unit-norm spatial filter per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialFilterPair {
    pub w_t: Vec<f64>,
    pub w_r: Vec<f64>,
}

impl SpatialFilterPair {
    pub fn channels(&self) -> usize {
        self.w_t.len()
    }

    fn negated(&self) -> Self {
        Self {
            w_t: self.w_t.iter().map(|v| -v).collect(),
            w_r: self.w_r.iter().map(|v| -v).collect(),
        }
    }
}

/// Filters together with the generalized eigenvalues they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSolution {
    pub filters: SpatialFilterPair,
    /// Largest λ: concentration share of composite variance along `w_t`.
    pub lambda_t: f64,
    /// Smallest λ, attained by `w_r`.
    pub lambda_r: f64,
}

impl FilterSolution {
    /// False when both classes share the same covariance (all λ equal).
    pub fn is_discriminative(&self) -> bool {
        self.lambda_t - self.lambda_r > 1e-9
    }
}

/// `[H_T | H_R]`, length `2T`.
pub type CspFeature = Vec<f64>;

/// Mean of `X Xᵀ / trace(X Xᵀ)` over the windows.
pub fn class_covariance(windows: &[Window]) -> Result<CovarianceMatrix> {
    let first = windows.first().ok_or(Error::Empty("class windows"))?;
    let (c, t) = (first.channels(), first.samples());
    let mut acc = alloc::vec![0.0; c * c];
    for w in windows {
        if w.channels() != c || w.samples() != t {
            return Err(Error::DimensionMismatch {
                expected: c * t,
                got: w.channels() * w.samples(),
            });
        }
        let xt = linalg::transpose(w.data(), c, t);
        let xxt = linalg::matmul(w.data(), &xt, c, t, c);
        let trace: f64 = (0..c).map(|i| xxt[i * c + i]).sum();
        if !(trace > 0.0) {
            return Err(Error::Degenerate("window with zero trace".into()));
        }
        for (a, v) in acc.iter_mut().zip(&xxt) {
            *a += v / trace;
        }
    }
    // exact symmetry regardless of summation order
    for i in 0..c {
        for j in 0..i {
            let avg = 0.5 * (acc[i * c + j] + acc[j * c + i]);
            acc[i * c + j] = avg;
            acc[j * c + i] = avg;
        }
    }
    CovarianceMatrix::new(c, acc)
}

/// Flips `v` so its largest-magnitude component (first on ties) is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

fn normalize(v: &mut [f64]) {
    let n = linalg::norm(v);
    for x in v.iter_mut() {
        *x /= n;
    }
}

pub fn compute_filters(
    cov_t: &CovarianceMatrix,
    cov_r: &CovarianceMatrix,
) -> Result<FilterSolution> {
    let n = cov_t.dim();
    if cov_r.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: cov_r.dim(),
        });
    }
    let composite: Vec<f64> = cov_t.m.iter().zip(&cov_r.m).map(|(a, b)| a + b).collect();
    let ce = symmetric_eigen(&composite, n);
    let min_eig = ce.values[n - 1];
    if !(min_eig > MIN_COMPOSITE_EIGENVALUE) {
        return Err(Error::SingularCovariance { eigenvalue: min_eig });
    }
    // whitening P = D^{-1/2} Uᵀ, so P (C_T + C_R) Pᵀ = I
    let mut p = alloc::vec![0.0; n * n];
    for k in 0..n {
        let scale = 1.0 / libm::sqrt(ce.values[k]);
        for i in 0..n {
            p[k * n + i] = ce.vectors[i * n + k] * scale;
        }
    }
    let pt = linalg::transpose(&p, n, n);
    let s = linalg::matmul(&linalg::matmul(&p, &cov_t.m, n, n, n), &pt, n, n, n);
    let se = symmetric_eigen(&s, n);
    // w = Pᵀ v maps a whitened eigenvector back to channel space
    let back = |k: usize| {
        let v = se.vector(k);
        let mut w = linalg::matmul(&pt, &v, n, n, 1);
        normalize(&mut w);
        fix_sign(&mut w);
        w
    };
    Ok(FilterSolution {
        filters: SpatialFilterPair {
            w_t: back(0),
            w_r: back(n - 1),
        },
        lambda_t: se.values[0],
        lambda_r: se.values[n - 1],
    })
}

/// Sign-aligns every pair to the first, averages componentwise, renormalizes.
pub fn average_filters(pairs: &[SpatialFilterPair]) -> Result<SpatialFilterPair> {
    let first = pairs.first().ok_or(Error::Empty("filter pairs"))?;
    let c = first.channels();
    let mut w_t = alloc::vec![0.0; c];
    let mut w_r = alloc::vec![0.0; c];
    for p in pairs {
        if p.w_t.len() != c || p.w_r.len() != c {
            return Err(Error::DimensionMismatch {
                expected: c,
                got: p.w_t.len(),
            });
        }
        let flip_t = linalg::dot(&p.w_t, &first.w_t) < 0.0;
        let flip_r = linalg::dot(&p.w_r, &first.w_r) < 0.0;
        for i in 0..c {
            w_t[i] += if flip_t { -p.w_t[i] } else { p.w_t[i] };
            w_r[i] += if flip_r { -p.w_r[i] } else { p.w_r[i] };
        }
    }
    for w in [&mut w_t, &mut w_r] {
        let norm = linalg::norm(w);
        if !(norm >= MIN_AVERAGE_NORM) {
            return Err(Error::FilterCancellation { norm });
        }
        for x in w.iter_mut() {
            *x /= norm;
        }
    }
    Ok(SpatialFilterPair { w_t, w_r })
}

/// `[w_T X | w_R X]`.
pub fn apply_filters(p: &SpatialFilterPair, w: &Window) -> Result<CspFeature> {
    let c = w.channels();
    if p.w_t.len() != c || p.w_r.len() != c {
        return Err(Error::DimensionMismatch {
            expected: c,
            got: p.w_t.len(),
        });
    }
    let t = w.samples();
    let mut out = Vec::with_capacity(2 * t);
    for filter in [&p.w_t, &p.w_r] {
        out.extend(linalg::matmul(filter, w.data(), 1, c, t));
    }
    Ok(out)
}

/// Spatially filtered features for a batch of windows.
pub fn apply_filters_all(p: &SpatialFilterPair, windows: &[Window]) -> Result<Vec<CspFeature>> {
    windows.iter().map(|w| apply_filters(p, w)).collect()
}

impl core::ops::Neg for &SpatialFilterPair {
    type Output = SpatialFilterPair;

    fn neg(self) -> SpatialFilterPair {
        self.negated()
    }
}
