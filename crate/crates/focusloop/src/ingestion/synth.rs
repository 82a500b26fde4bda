//! Seeded synthetic band-power generator.
//!
//! Each channel reads `class_mean + gain * s(t) + N(0, noise_std)` where
//! `s` is one slowly varying source shared by every channel. `s` is an AR(1)
//! process with unit stationary variance, so a single channel sees the
//! shared term as slow drift of size `gain` while a channel difference
//! cancels it exactly.

use std::path::Path;

use focusloop_core::{Band, ChannelSet, EegSample, Electrode, StateLabel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{LabeledSample, SAMPLE_PERIOD_MS};
use crate::error::{Error, Result};

fn default_rho() -> f64 {
    0.99
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub channels: ChannelSet,
    /// Per-channel means, in channel-set order.
    pub conc_mean: Vec<f64>,
    pub relax_mean: Vec<f64>,
    pub noise_std: f64,
    pub common_source_gain: f64,
    /// Lag-one autocorrelation of the shared source.
    #[serde(default = "default_rho")]
    pub common_source_rho: f64,
}

pub const BASE_POWER: f64 = 0.5;
pub const DEFAULT_NOISE_STD: f64 = 0.1;
pub const DEFAULT_GAIN: f64 = 0.2;

/// Fraction of the F7 separation carried by F8 and by each band.
fn channel_weight(electrode: Electrode, band: Band) -> f64 {
    let e = match electrode {
        Electrode::F7 => 1.0,
        Electrode::F8 => 1.0 / 6.0,
    };
    let b = match band {
        Band::Gamma => 1.0,
        Band::Beta => 0.5,
        Band::Alpha => 0.25,
    };
    e * b
}

impl SyntheticConfig {
    /// F7 gamma separated by `separation` noise standard deviations; the
    /// other channels carry fixed smaller fractions of it.
    pub fn with_separation(channels: ChannelSet, separation: f64, seed: u64) -> Self {
        let mut conc = Vec::with_capacity(channels.len());
        let mut relax = Vec::with_capacity(channels.len());
        for c in channels.channels() {
            relax.push(BASE_POWER);
            conc.push(BASE_POWER + separation * DEFAULT_NOISE_STD * channel_weight(c.electrode, c.band));
        }
        Self {
            seed,
            channels,
            conc_mean: conc,
            relax_mean: relax,
            noise_std: DEFAULT_NOISE_STD,
            common_source_gain: DEFAULT_GAIN,
            common_source_rho: default_rho(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.channels.len();
        if self.conc_mean.len() != n || self.relax_mean.len() != n {
            return Err(Error::Config(format!(
                "{} channels but {} concentration and {} relaxation means",
                n,
                self.conc_mean.len(),
                self.relax_mean.len()
            )));
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config("noise_std must be positive".into()));
        }
        if !self.common_source_gain.is_finite() {
            return Err(Error::Config("common_source_gain must be finite".into()));
        }
        if !(0.0..1.0).contains(&self.common_source_rho) {
            return Err(Error::Config("common_source_rho must lie in [0, 1)".into()));
        }
        for (i, c) in self.channels.channels().iter().enumerate() {
            if !(self.conc_mean[i].is_finite() && self.relax_mean[i].is_finite()) {
                return Err(Error::Config(format!("non-finite mean for {}", c)));
            }
            if c.band == Band::Gamma && self.conc_mean[i] < self.relax_mean[i] {
                return Err(Error::Config(format!(
                    "{}: concentration mean below relaxation mean",
                    c
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A prompted block; `label: None` is rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub label: Option<StateLabel>,
    pub duration_s: f64,
}

impl Segment {
    pub fn new(label: Option<StateLabel>, duration_s: f64) -> Self {
        Self { label, duration_s }
    }

    pub fn samples(&self) -> usize {
        (self.duration_s * 1000.0 / SAMPLE_PERIOD_MS as f64).round() as usize
    }
}

/// Generates the full labeled stream for `schedule`. A pure function of the
/// config (including its seed) and the schedule.
pub fn synth_stream(cfg: &SyntheticConfig, schedule: &[Segment]) -> Result<Vec<LabeledSample>> {
    cfg.validate()?;
    if let Some(s) = schedule.iter().find(|s| !(s.duration_s > 0.0 && s.duration_s.is_finite())) {
        return Err(Error::Config(format!("segment duration {} is not positive", s.duration_s)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = Normal::new(0.0, cfg.noise_std).expect("validated noise_std");
    let rho = cfg.common_source_rho;
    let innovation = (1.0 - rho * rho).sqrt();
    let mut s: f64 = unit.sample(&mut rng);
    let rest_mean: Vec<f64> = cfg
        .conc_mean
        .iter()
        .zip(&cfg.relax_mean)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();

    let total: usize = schedule.iter().map(Segment::samples).sum();
    let mut out = Vec::with_capacity(total);
    for seg in schedule {
        let means = match seg.label {
            Some(StateLabel::Concentration) => &cfg.conc_mean,
            Some(StateLabel::Relaxation) => &cfg.relax_mean,
            None => &rest_mean,
        };
        for _ in 0..seg.samples() {
            let shared = cfg.common_source_gain * s;
            let values = means.iter().map(|m| m + shared + noise.sample(&mut rng)).collect();
            let t = out.len() as u64 * SAMPLE_PERIOD_MS;
            out.push(LabeledSample {
                sample: EegSample::new(t, values),
                label: seg.label,
            });
            s = rho * s + innovation * unit.sample(&mut rng);
        }
    }
    Ok(out)
}

/// Alternating prompted blocks with seeded durations in `[min_s, max_s]`
/// (whole seconds) until `total_s` is covered; the last block is truncated.
pub fn free_control_schedule(total_s: f64, min_s: u32, max_s: u32, seed: u64) -> Vec<Segment> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut label = if rng.random_bool(0.5) {
        StateLabel::Concentration
    } else {
        StateLabel::Relaxation
    };
    let mut out = Vec::new();
    let mut left = total_s;
    while left > 0.0 {
        let d = (rng.random_range(min_s..=max_s) as f64).min(left);
        out.push(Segment::new(Some(label), d));
        left -= d;
        label = label.opposite();
    }
    out
}
