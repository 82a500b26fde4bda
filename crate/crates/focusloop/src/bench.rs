//! Per-tick compute latency.

use std::time::Instant;

use focusloop_core::tick::{classify_tick, PlaneState, TrainedModel};
use focusloop_core::{EegSample, WindowBuffer};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LatencyStats {
    pub ticks: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

impl LatencyStats {
    /// Nearest-rank percentiles over the given durations.
    pub fn from_durations(mut ms: Vec<f64>) -> Self {
        if ms.is_empty() {
            return Self::default();
        }
        ms.sort_by(f64::total_cmp);
        let n = ms.len();
        let rank = |p: f64| ms[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        Self {
            ticks: n,
            mean_ms: ms.iter().sum::<f64>() / n as f64,
            p50_ms: rank(0.50),
            p99_ms: rank(0.99),
            max_ms: ms[n - 1],
        }
    }
}

/// Times `classify_tick` alone for each of the first `n_ticks` windows of
/// `samples`. Buffering happens outside the timed region.
pub fn benchmark_latency(model: &TrainedModel, samples: &[EegSample], window_len: usize, n_ticks: usize) -> Result<LatencyStats> {
    if n_ticks == 0 {
        return Ok(LatencyStats::default());
    }
    let needed = n_ticks + window_len - 1;
    if samples.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            got: samples.len(),
        });
    }
    let channels = samples[0].values.len();
    let mut buf = WindowBuffer::new(channels, window_len);
    let mut plane = PlaneState::default();
    let mut ms = Vec::with_capacity(n_ticks);
    for s in samples {
        if ms.len() == n_ticks {
            break;
        }
        if let Some(w) = buf.push_sample(s.clone())? {
            let t0 = Instant::now();
            let msg = classify_tick(model, &mut plane, &w, 0)?;
            ms.push(t0.elapsed().as_secs_f64() * 1000.0);
            std::hint::black_box(msg);
        }
    }
    Ok(LatencyStats::from_durations(ms))
}
