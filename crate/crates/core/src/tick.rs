//! Per-tick classification and the plane altitude fold.

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::csp::{apply_filters, SpatialFilterPair};
use crate::error::{Error, Result};
use crate::fnn::{nn_predict, FeedforwardNet};
use crate::signal::{flatten_window, EegSample, StateLabel, Window, WindowBuffer};
use crate::svm::{svm_predict, LinearSvmModel};

pub const DEFAULT_PLANE_STEP: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneState {
    /// Altitude as a fraction of the screen, in [0, 1].
    pub y: f64,
    pub step: f64,
}

impl Default for PlaneState {
    fn default() -> Self {
        Self {
            y: 0.5,
            step: DEFAULT_PLANE_STEP,
        }
    }
}

/// `y' = clamp(y + label * step, 0, 1)`.
pub fn plane_update(p: PlaneState, label: StateLabel) -> PlaneState {
    PlaneState {
        y: (p.y + label.as_f64() * p.step).clamp(0.0, 1.0),
        step: p.step,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Svm,
    Fnn,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Svm => "svm",
            Mode::Fnn => "fnn",
        }
    }
}

/// One broadcast unit, emitted per completed tick. Field order is the wire
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMessage {
    pub t_ms: u64,
    pub label: StateLabel,
    pub score: f64,
    pub plane_y: f64,
    pub mode: Mode,
    pub drop_count: u64,
}

/// CSP filters feeding a linear SVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CspSvm {
    pub filters: SpatialFilterPair,
    pub svm: LinearSvmModel,
}

impl CspSvm {
    pub fn predict_window(&self, w: &Window) -> Result<(StateLabel, f64)> {
        let feature = apply_filters(&self.filters, w)?;
        svm_predict(&self.svm, &feature)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainedModel {
    Svm(CspSvm),
    Fnn(FeedforwardNet),
}

impl TrainedModel {
    pub fn mode(&self) -> Mode {
        match self {
            TrainedModel::Svm(_) => Mode::Svm,
            TrainedModel::Fnn(_) => Mode::Fnn,
        }
    }

    /// Checks the model against a `channels` x `window_len` window shape.
    pub fn check_shape(&self, channels: usize, window_len: usize) -> Result<()> {
        match self {
            TrainedModel::Svm(m) => {
                if m.filters.channels() != channels {
                    return Err(Error::ModelMismatch(format!(
                        "filters have {} channels, window has {}",
                        m.filters.channels(),
                        channels
                    )));
                }
                if m.svm.dim() != 2 * window_len {
                    return Err(Error::ModelMismatch(format!(
                        "svm expects {} features, window yields {}",
                        m.svm.dim(),
                        2 * window_len
                    )));
                }
            }
            TrainedModel::Fnn(n) => {
                if n.input_dim != channels * window_len {
                    return Err(Error::ModelMismatch(format!(
                        "network expects {} inputs, window yields {}",
                        n.input_dim,
                        channels * window_len
                    )));
                }
            }
        }
        Ok(())
    }

    /// SVM: label of the window just completed. FNN: predicted label 0.5 s
    /// ahead.
    pub fn predict_window(&self, w: &Window) -> Result<(StateLabel, f64)> {
        match self {
            TrainedModel::Svm(m) => m.predict_window(w),
            TrainedModel::Fnn(n) => nn_predict(n, &flatten_window(w)),
        }
    }
}

/// Classifies `w`, advances the plane and builds the tick's message.
pub fn classify_tick(
    model: &TrainedModel,
    plane: &mut PlaneState,
    w: &Window,
    drop_count: u64,
) -> Result<StateMessage> {
    model.check_shape(w.channels(), w.samples())?;
    let (label, score) = model.predict_window(w)?;
    *plane = plane_update(*plane, label);
    Ok(StateMessage {
        t_ms: w.end_ts,
        label,
        score,
        plane_y: plane.y,
        mode: model.mode(),
        drop_count,
    })
}

/// Owns the window buffer, the model and the plane: the classify loop's state.
#[derive(Debug, Clone)]
pub struct TickEngine {
    buffer: WindowBuffer,
    model: TrainedModel,
    plane: PlaneState,
}

impl TickEngine {
    pub fn new(model: TrainedModel, buffer: WindowBuffer, plane: PlaneState) -> Result<Self> {
        model.check_shape(buffer.channels(), buffer.window_len())?;
        Ok(Self {
            buffer,
            model,
            plane,
        })
    }

    pub fn plane(&self) -> PlaneState {
        self.plane
    }

    pub fn model(&self) -> &TrainedModel {
        &self.model
    }

    /// `Ok(None)` during warm-up (fewer than a window of samples).
    pub fn on_sample(&mut self, s: EegSample, drop_count: u64) -> Result<Option<StateMessage>> {
        match self.buffer.push_sample(s)? {
            Some(w) => classify_tick(&self.model, &mut self.plane, &w, drop_count).map(Some),
            None => Ok(None),
        }
    }

    /// Applies an externally supplied label (manual/dev input) at `t_ms`.
    pub fn on_manual_label(&mut self, label: StateLabel, t_ms: u64, drop_count: u64) -> StateMessage {
        self.plane = plane_update(self.plane, label);
        StateMessage {
            t_ms,
            label,
            score: label.as_f64(),
            plane_y: self.plane.y,
            mode: self.model.mode(),
            drop_count,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::{Standardization, SvmHyper};
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn plane_steps_and_clamps() {
        let p = PlaneState::default();
        assert!((plane_update(p, StateLabel::Concentration).y - 0.52).abs() < 1e-15);
        let top = PlaneState { y: 1.0, ..p };
        assert_eq!(plane_update(top, StateLabel::Concentration).y, 1.0);
        let mut q = p;
        for _ in 0..10 {
            q = plane_update(q, StateLabel::Concentration);
        }
        assert!((q.y - 0.70).abs() < 1e-12);
    }

    fn svm_model(score_weight: f64) -> TrainedModel {
        let mut w = vec![0.0; 10];
        w[0] = score_weight;
        TrainedModel::Svm(CspSvm {
            filters: SpatialFilterPair {
                w_t: vec![1.0, 0.0],
                w_r: vec![0.0, 1.0],
            },
            svm: LinearSvmModel {
                weights: w,
                bias: 0.0,
                standardization: Standardization::identity(10),
                hyper: SvmHyper::default(),
                zero_variance_clamped: false,
            },
        })
    }

    #[test]
    fn svm_tick_positive_score_raises_plane() {
        let model = svm_model(1.0);
        let w = Window::from_rows(&[vec![3.2, 0.0, 0.0, 0.0, 0.0], vec![0.0; 5]], 0).unwrap();
        let mut plane = PlaneState::default();
        let msg = classify_tick(&model, &mut plane, &w, 0).unwrap();
        assert_eq!(msg.label, StateLabel::Concentration);
        assert!((msg.score - 3.2).abs() < 1e-12);
        assert!((msg.plane_y - 0.52).abs() < 1e-12);
        assert_eq!(msg.mode, Mode::Svm);
    }

    #[test]
    fn zero_fnn_descends_and_clamps() {
        let model = TrainedModel::Fnn(FeedforwardNet::zeros(10));
        let mut eng =
            TickEngine::new(model, WindowBuffer::new(2, 5), PlaneState::default()).unwrap();
        let mut msgs: Vec<StateMessage> = Vec::new();
        for i in 0..40u64 {
            if let Some(m) = eng.on_sample(EegSample::new(i * 100, vec![0.1, 0.2]), 0).unwrap() {
                msgs.push(m);
            }
        }
        // warm-up swallows the first four samples
        assert_eq!(msgs.len(), 36);
        assert_eq!(msgs[0].t_ms, 400);
        assert!(msgs.iter().all(|m| m.label == StateLabel::Relaxation));
        assert_eq!(msgs.last().unwrap().plane_y, 0.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let model = TrainedModel::Fnn(FeedforwardNet::zeros(10));
        assert!(TickEngine::new(model, WindowBuffer::new(2, 4), PlaneState::default()).is_err());
        let model = svm_model(1.0);
        assert!(model.check_shape(3, 5).is_err());
    }

    #[test]
    fn message_wire_format() {
        let m = StateMessage {
            t_ms: 12345,
            label: StateLabel::Concentration,
            score: 2.31,
            plane_y: 0.54,
            mode: Mode::Svm,
            drop_count: 0,
        };
        assert_eq!(
            serde_json::to_string(&m).unwrap(),
            r#"{"t_ms":12345,"label":1,"score":2.31,"plane_y":0.54,"mode":"svm","drop_count":0}"#
        );
    }
}
