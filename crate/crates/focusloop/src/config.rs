//! Pipeline configuration file.

use std::path::{Path, PathBuf};

use focusloop_core::signal::DEFAULT_GAP_RESET_MS;
use focusloop_core::tick::{Mode, PlaneState, TrainedModel, DEFAULT_PLANE_STEP};
use focusloop_core::{ChannelSet, WindowBuffer, SAMPLE_RATE_HZ, WINDOW_LEN};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::osc_listener::DEFAULT_OSC_PORT;

pub const DEFAULT_BROADCAST_PORT: u16 = 8080;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub tick_ms: u64,
    pub window_len: usize,
    pub mode: Mode,
    pub channels: ChannelSet,
    pub model_path: Option<PathBuf>,
    pub broadcast_port: u16,
    pub osc_port: u16,
    pub plane_step: f64,
    /// A timestamp gap longer than this empties the window buffer.
    pub gap_reset_ms: u64,
    pub ratings_path: PathBuf,
    /// Enables the manual label endpoint.
    pub dev_mode: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tick_ms: 1000 / SAMPLE_RATE_HZ as u64,
            window_len: WINDOW_LEN,
            mode: Mode::Svm,
            channels: ChannelSet::gamma_pair(),
            model_path: None,
            broadcast_port: DEFAULT_BROADCAST_PORT,
            osc_port: DEFAULT_OSC_PORT,
            plane_step: DEFAULT_PLANE_STEP,
            gap_reset_ms: DEFAULT_GAP_RESET_MS,
            ratings_path: PathBuf::from("ratings.csv"),
            dev_mode: false,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tick_ms != 1000 / SAMPLE_RATE_HZ as u64 {
            return Err(Error::Config(format!(
                "tick_ms must equal the {} ms sample period, got {}",
                1000 / SAMPLE_RATE_HZ,
                self.tick_ms
            )));
        }
        if self.window_len == 0 {
            return Err(Error::Config("window_len must be positive".into()));
        }
        if !(self.plane_step > 0.0 && self.plane_step <= 1.0) {
            return Err(Error::Config("plane_step must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Checks that `model` fits this config's mode and window shape.
    pub fn check_model(&self, model: &TrainedModel) -> Result<()> {
        if model.mode() != self.mode {
            return Err(Error::Config(format!(
                "config mode is {} but the model is {}",
                self.mode.as_str(),
                model.mode().as_str()
            )));
        }
        model.check_shape(self.channels.len(), self.window_len)?;
        Ok(())
    }

    pub fn buffer(&self) -> WindowBuffer {
        WindowBuffer::with_gap_reset(self.channels.len(), self.window_len, self.gap_reset_ms)
    }

    pub fn plane(&self) -> PlaneState {
        PlaneState {
            step: self.plane_step,
            ..PlaneState::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_partial_json() {
        let c: PipelineConfig = serde_json::from_str(r#"{"mode":"fnn","plane_step":0.05}"#).unwrap();
        assert_eq!(c.mode, Mode::Fnn);
        assert_eq!(c.tick_ms, 100);
        assert_eq!(c.window_len, 5);
        assert_eq!(c.broadcast_port, 8080);
        c.validate().unwrap();
    }

    #[test]
    fn tick_must_match_sample_rate() {
        let c = PipelineConfig {
            tick_ms: 50,
            ..PipelineConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
