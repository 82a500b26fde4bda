//! The prompted trial protocol: one block of trials per state with a rest
//! period between blocks.

use std::fmt;

use focusloop_core::{StateLabel, Trial};
use serde::{Deserialize, Serialize};

use super::recording::SessionRecording;
use super::synth::Segment;
use super::{LabeledSample, SampleSource};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    /// Concentration block first.
    A,
    /// Relaxation block first.
    B,
}

impl std::str::FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Group::A),
            "B" | "b" => Ok(Group::B),
            _ => Err(Error::Config(format!("group must be A or B, got `{}`", s))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialProtocol {
    pub n_trials_per_class: u32,
    pub concentration_s: u32,
    pub relaxation_s: u32,
    pub rest_s: u32,
    pub group: Group,
}

impl Default for TrialProtocol {
    fn default() -> Self {
        Self {
            n_trials_per_class: 20,
            concentration_s: 10,
            relaxation_s: 15,
            rest_s: 120,
            group: Group::A,
        }
    }
}

/// What the subject is asked to do from `start_ms` on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Trial { label: StateLabel, index: u32 },
    Rest,
    Done,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Trial { label, index } => {
                let name = match label {
                    StateLabel::Concentration => "concentration",
                    StateLabel::Relaxation => "relaxation",
                };
                write!(f, "{} trial {}", name, index + 1)
            }
            Phase::Rest => f.write_str("rest"),
            Phase::Done => f.write_str("done"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Marker {
    pub phase: Phase,
    /// Offset from protocol start, on the 100 ms grid.
    pub start_ms: u64,
}

impl TrialProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials_per_class == 0
            || self.concentration_s == 0
            || self.relaxation_s == 0
            || self.rest_s == 0
        {
            return Err(Error::Config("protocol counts and durations must be positive".into()));
        }
        Ok(())
    }

    pub fn duration_s(&self, label: StateLabel) -> u32 {
        match label {
            StateLabel::Concentration => self.concentration_s,
            StateLabel::Relaxation => self.relaxation_s,
        }
    }

    fn block_order(&self) -> [StateLabel; 2] {
        match self.group {
            Group::A => [StateLabel::Concentration, StateLabel::Relaxation],
            Group::B => [StateLabel::Relaxation, StateLabel::Concentration],
        }
    }

    /// Phases in order, each with its duration in seconds.
    pub fn phases(&self) -> Vec<(Phase, u32)> {
        let [first, second] = self.block_order();
        let mut out = Vec::new();
        let block = |out: &mut Vec<(Phase, u32)>, label| {
            for index in 0..self.n_trials_per_class {
                out.push((Phase::Trial { label, index }, self.duration_s(label)));
            }
        };
        block(&mut out, first);
        out.push((Phase::Rest, self.rest_s));
        block(&mut out, second);
        out
    }

    pub fn schedule(&self) -> Vec<Segment> {
        self.phases()
            .into_iter()
            .map(|(p, d)| {
                let label = match p {
                    Phase::Trial { label, .. } => Some(label),
                    _ => None,
                };
                Segment::new(label, d as f64)
            })
            .collect()
    }

    pub fn total_samples(&self) -> usize {
        self.schedule().iter().map(Segment::samples).sum()
    }
}

/// Steps through the protocol, announcing each phase through `on_marker`
/// before reading its samples. Rest samples are read and discarded.
///
/// Every sample read is also handed to `on_sample` with the prompted label,
/// which is how a live session gets recorded alongside.
pub fn run_protocol<S, M, R>(
    p: &TrialProtocol,
    source: &mut S,
    mut on_marker: M,
    mut on_sample: R,
) -> Result<Vec<Trial>>
where
    S: SampleSource + ?Sized,
    M: FnMut(&Marker),
    R: FnMut(&LabeledSample) -> Result<()>,
{
    p.validate()?;
    let mut trials = Vec::with_capacity(2 * p.n_trials_per_class as usize);
    let mut elapsed_ms = 0;
    for (phase, dur) in p.phases() {
        on_marker(&Marker {
            phase,
            start_ms: elapsed_ms,
        });
        let label = match phase {
            Phase::Trial { label, .. } => Some(label),
            _ => None,
        };
        let n = Segment::new(label, dur as f64).samples();
        let mut samples = Vec::with_capacity(n);
        while samples.len() < n {
            match source.next_sample()? {
                Some(mut ls) => {
                    ls.label = label;
                    on_sample(&ls)?;
                    samples.push(ls.sample);
                }
                None => {
                    return Err(Error::PartialSession {
                        phase: phase.to_string(),
                        completed: trials,
                    })
                }
            }
        }
        elapsed_ms += dur as u64 * 1000;
        if let Some(label) = label {
            trials.push(Trial::new(label, samples, dur)?);
        }
    }
    on_marker(&Marker {
        phase: Phase::Done,
        start_ms: elapsed_ms,
    });
    Ok(trials)
}

/// Rebuilds trials from a labeled recording: each run of equal labels is cut
/// into chunks of the protocol's nominal duration for that label. A trailing
/// chunk more than two samples short is dropped.
pub fn trials_from_recording(rec: &SessionRecording, p: &TrialProtocol) -> Result<Vec<Trial>> {
    let Some(labels) = rec.labels.as_ref() else {
        return Err(Error::Config("recording has no label column".into()));
    };
    let mut trials = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let j = (i..labels.len()).find(|&k| labels[k] != labels[i]).unwrap_or(labels.len());
        if let Some(label) = labels[i] {
            let dur = p.duration_s(label);
            let chunk = Segment::new(Some(label), dur as f64).samples();
            for c in rec.samples[i..j].chunks(chunk) {
                if c.len() + 2 >= chunk {
                    trials.push(Trial::new(label, c.to_vec(), dur)?);
                } else {
                    log::warn!("dropping {} trailing {:?} samples", c.len(), label);
                }
            }
        }
        i = j;
    }
    Ok(trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::synth::{synth_stream, SyntheticConfig};
    use crate::ingestion::VecSource;
    use focusloop_core::ChannelSet;

    fn source(p: &TrialProtocol, trim: usize) -> VecSource {
        let cfg = SyntheticConfig::with_separation(ChannelSet::gamma_pair(), 3.0, 1);
        let mut s = synth_stream(&cfg, &p.schedule()).unwrap();
        s.truncate(s.len() - trim);
        VecSource::new(ChannelSet::gamma_pair(), s)
    }

    #[test]
    fn group_a_order() {
        let p = TrialProtocol::default();
        let mut markers = Vec::new();
        let trials = run_protocol(&p, &mut source(&p, 0), |m| markers.push(*m), |_| Ok(())).unwrap();
        assert_eq!(trials.len(), 40);
        assert!(trials[..20].iter().all(|t| t.label == StateLabel::Concentration && t.samples.len() == 100));
        assert!(trials[20..].iter().all(|t| t.label == StateLabel::Relaxation && t.samples.len() == 150));
        assert_eq!(markers[20].phase, Phase::Rest);
        assert_eq!(markers[20].start_ms, 200_000);
        assert_eq!(markers.last().unwrap().phase, Phase::Done);
    }

    #[test]
    fn group_b_relaxation_first() {
        let p = TrialProtocol {
            group: Group::B,
            ..TrialProtocol::default()
        };
        let trials = run_protocol(&p, &mut source(&p, 0), |_| {}, |_| Ok(())).unwrap();
        assert_eq!(trials[0].label, StateLabel::Relaxation);
        assert_eq!(trials[39].label, StateLabel::Concentration);
    }

    #[test]
    fn exhausted_source_keeps_completed_trials() {
        let p = TrialProtocol::default();
        let e = run_protocol(&p, &mut source(&p, 100), |_| {}, |_| Ok(())).unwrap_err();
        match e {
            Error::PartialSession { completed, phase } => {
                assert_eq!(completed.len(), 39);
                assert_eq!(phase, "relaxation trial 20");
            }
            other => panic!("{}", other),
        }
    }
}
