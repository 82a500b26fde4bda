//! Versioned JSON model files.

use std::path::Path;

use focusloop_core::csp::SpatialFilterPair;
use focusloop_core::fnn::{FeedforwardNet, FnnHyper};
use focusloop_core::svm::{LinearSvmModel, Standardization, SvmHyper};
use focusloop_core::tick::{CspSvm, Mode, TrainedModel};
use focusloop_core::ChannelSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weights {
    Fnn {
        input_dim: usize,
        hidden: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: f64,
    },
    Svm {
        w: Vec<f64>,
        b: f64,
        #[serde(default)]
        zero_variance_clamped: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Hyper {
    Svm(SvmHyper),
    Fnn(FnnHyper),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub model_kind: Mode,
    pub channels: ChannelSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filters: Option<SpatialFilterPair>,
    pub standardization: Standardization,
    pub weights: Weights,
    pub hyper: Hyper,
    pub seed: u64,
    pub created_utc: String,
}

impl ModelFile {
    pub fn from_model(model: &TrainedModel, channels: ChannelSet, created_utc: String) -> Self {
        match model {
            TrainedModel::Svm(m) => Self {
                format_version: FORMAT_VERSION,
                model_kind: Mode::Svm,
                channels,
                filters: Some(m.filters.clone()),
                standardization: m.svm.standardization.clone(),
                weights: Weights::Svm {
                    w: m.svm.weights.clone(),
                    b: m.svm.bias,
                    zero_variance_clamped: m.svm.zero_variance_clamped,
                },
                hyper: Hyper::Svm(m.svm.hyper),
                seed: m.svm.hyper.seed,
                created_utc,
            },
            TrainedModel::Fnn(n) => Self {
                format_version: FORMAT_VERSION,
                model_kind: Mode::Fnn,
                channels,
                filters: None,
                standardization: n.standardization.clone(),
                weights: Weights::Fnn {
                    input_dim: n.input_dim,
                    hidden: n.hidden,
                    w1: n.w1.clone(),
                    b1: n.b1.clone(),
                    w2: n.w2.clone(),
                    b2: n.b2,
                },
                hyper: Hyper::Fnn(n.hyper),
                seed: n.hyper.seed,
                created_utc,
            },
        }
    }

    pub fn to_model(&self) -> Result<TrainedModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::ModelVersion(self.format_version));
        }
        let mismatch = |what: &str| Error::Config(format!("model file: {}", what));
        let model = match (self.model_kind, &self.weights, self.hyper) {
            (Mode::Svm, Weights::Svm { w, b, zero_variance_clamped }, Hyper::Svm(hyper)) => {
                let filters = self.filters.clone().ok_or_else(|| mismatch("svm model without filters"))?;
                if filters.channels() != self.channels.len() {
                    return Err(mismatch("filter length differs from channel count"));
                }
                TrainedModel::Svm(CspSvm {
                    filters,
                    svm: LinearSvmModel {
                        weights: w.clone(),
                        bias: *b,
                        standardization: self.standardization.clone(),
                        hyper,
                        zero_variance_clamped: *zero_variance_clamped,
                    },
                })
            }
            (Mode::Fnn, Weights::Fnn { input_dim, hidden, w1, b1, w2, b2 }, Hyper::Fnn(hyper)) => {
                if w1.len() != input_dim * hidden || b1.len() != *hidden || w2.len() != *hidden {
                    return Err(mismatch("network weight shapes disagree"));
                }
                TrainedModel::Fnn(FeedforwardNet {
                    input_dim: *input_dim,
                    hidden: *hidden,
                    w1: w1.clone(),
                    b1: b1.clone(),
                    w2: w2.clone(),
                    b2: *b2,
                    standardization: self.standardization.clone(),
                    hyper,
                })
            }
            _ => return Err(mismatch("model_kind does not match weights and hyper")),
        };
        let dim = match &model {
            TrainedModel::Svm(m) => m.svm.dim(),
            TrainedModel::Fnn(n) => n.input_dim,
        };
        if self.standardization.dim() != dim {
            return Err(mismatch("standardization length differs from input size"));
        }
        Ok(model)
    }
}

pub fn save_model(
    path: impl AsRef<Path>,
    model: &TrainedModel,
    channels: &ChannelSet,
) -> Result<()> {
    let path = path.as_ref();
    let file = ModelFile::from_model(model, channels.clone(), chrono::Utc::now().to_rfc3339());
    let text = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(TrainedModel, ChannelSet)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&text)?;
    Ok((file.to_model()?, file.channels))
}
