//! Seeded synthetic sessions shared by the integration tests.
#![allow(dead_code)]

use focusloop::ingestion::protocol::{trials_from_recording, TrialProtocol};
use focusloop::ingestion::recording::SessionRecording;
use focusloop::ingestion::synth::{free_control_schedule, synth_stream, SyntheticConfig};
use focusloop::ingestion::LabeledSample;
use focusloop_core::{ChannelSet, Trial};

pub fn recording(channels: ChannelSet, stream: Vec<LabeledSample>) -> SessionRecording {
    let (samples, labels) = stream.into_iter().map(|ls| (ls.sample, ls.label)).unzip();
    SessionRecording {
        channels,
        samples,
        labels: Some(labels),
    }
}

/// A full 40-trial protocol run on the F7/F8 gamma pair.
pub fn protocol_session(separation: f64, seed: u64) -> (SessionRecording, Vec<Trial>) {
    let cfg = SyntheticConfig::with_separation(ChannelSet::gamma_pair(), separation, seed);
    protocol_session_with(&cfg)
}

pub fn protocol_session_with(cfg: &SyntheticConfig) -> (SessionRecording, Vec<Trial>) {
    let p = TrialProtocol::default();
    let rec = recording(cfg.channels.clone(), synth_stream(cfg, &p.schedule()).unwrap());
    let trials = trials_from_recording(&rec, &p).unwrap();
    (rec, trials)
}

/// Free control with prompted blocks of 5 to 10 s.
pub fn free_session(separation: f64, seed: u64, seconds: f64) -> SessionRecording {
    let cfg = SyntheticConfig::with_separation(ChannelSet::gamma_pair(), separation, seed);
    let schedule = free_control_schedule(seconds, 5, 10, seed);
    recording(cfg.channels.clone(), synth_stream(&cfg, &schedule).unwrap())
}
