//! Sample sources: OSC over UDP, CSV replay and the synthetic generator, plus
//! session recording and the trial protocol runner.

pub mod osc_listener;
pub mod protocol;
pub mod queue;
pub mod recording;
pub mod synth;

use std::path::PathBuf;
use std::str::FromStr;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use focusloop_core::{ChannelSet, EegSample, StateLabel, SAMPLE_RATE_HZ};

use crate::error::{Error, Result};
use queue::BoundedQueue;

pub const SAMPLE_PERIOD_MS: u64 = 1000 / SAMPLE_RATE_HZ as u64;

/// A sample with the prompted state, when the source knows it.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub sample: EegSample,
    pub label: Option<StateLabel>,
}

impl LabeledSample {
    pub fn unlabeled(sample: EegSample) -> Self {
        Self {
            sample,
            label: None,
        }
    }
}

pub trait SampleSource: Send {
    fn channels(&self) -> &ChannelSet;

    /// `Ok(None)` once the stream has ended.
    fn next_sample(&mut self) -> Result<Option<LabeledSample>>;

    /// Samples lost upstream of this reader.
    fn drop_count(&self) -> u64 {
        0
    }
}

impl<S: SampleSource + ?Sized> SampleSource for Box<S> {
    fn channels(&self) -> &ChannelSet {
        (**self).channels()
    }

    fn next_sample(&mut self) -> Result<Option<LabeledSample>> {
        (**self).next_sample()
    }

    fn drop_count(&self) -> u64 {
        (**self).drop_count()
    }
}

/// In-memory stream, pull-based.
#[derive(Debug, Clone)]
pub struct VecSource {
    channels: ChannelSet,
    samples: std::vec::IntoIter<LabeledSample>,
}

impl VecSource {
    pub fn new(channels: ChannelSet, samples: Vec<LabeledSample>) -> Self {
        Self {
            channels,
            samples: samples.into_iter(),
        }
    }
}

impl SampleSource for VecSource {
    fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    fn next_sample(&mut self) -> Result<Option<LabeledSample>> {
        Ok(self.samples.next())
    }
}

/// Releases sample `n` no earlier than `n * period` after the first read.
#[derive(Debug)]
pub struct Paced<S> {
    inner: S,
    period: Option<Duration>,
    start: Option<Instant>,
    n: u32,
}

impl<S: SampleSource> Paced<S> {
    /// `speed` 1.0 is real time at 10 Hz; 0 disables pacing.
    pub fn new(inner: S, speed: f64) -> Result<Self> {
        if !(speed >= 0.0 && speed.is_finite()) {
            return Err(Error::Config(format!("replay speed must be >= 0, got {}", speed)));
        }
        let period = (speed > 0.0)
            .then(|| Duration::from_secs_f64(SAMPLE_PERIOD_MS as f64 / 1000.0 / speed));
        Ok(Self {
            inner,
            period,
            start: None,
            n: 0,
        })
    }
}

impl<S: SampleSource> SampleSource for Paced<S> {
    fn channels(&self) -> &ChannelSet {
        self.inner.channels()
    }

    fn next_sample(&mut self) -> Result<Option<LabeledSample>> {
        let next = self.inner.next_sample()?;
        if next.is_some() {
            if let Some(period) = self.period {
                let start = *self.start.get_or_insert_with(Instant::now);
                let due = start + period * self.n;
                let now = Instant::now();
                if due > now {
                    std::thread::sleep(due - now);
                }
            }
            self.n += 1;
        }
        Ok(next)
    }

    fn drop_count(&self) -> u64 {
        self.inner.drop_count()
    }
}

/// Reader side of a live producer.
#[derive(Debug, Clone)]
pub struct QueueSource {
    channels: ChannelSet,
    queue: BoundedQueue<LabeledSample>,
}

impl QueueSource {
    pub fn new(channels: ChannelSet, queue: BoundedQueue<LabeledSample>) -> Self {
        Self { channels, queue }
    }

    pub fn queue(&self) -> &BoundedQueue<LabeledSample> {
        &self.queue
    }
}

impl SampleSource for QueueSource {
    fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    fn next_sample(&mut self) -> Result<Option<LabeledSample>> {
        loop {
            match self.queue.pop_timeout(Duration::from_millis(250)) {
                queue::Pop::Item(s) => return Ok(Some(s)),
                queue::Pop::Closed => return Ok(None),
                queue::Pop::TimedOut => {}
            }
        }
    }

    fn drop_count(&self) -> u64 {
        self.queue.drop_count()
    }
}

/// Runs `source` on its own thread, feeding `queue` until the stream ends,
/// then closes the queue.
pub fn spawn_producer<S>(mut source: S, queue: BoundedQueue<LabeledSample>) -> JoinHandle<Result<()>>
where
    S: SampleSource + 'static,
{
    std::thread::spawn(move || {
        let out = loop {
            match source.next_sample() {
                Ok(Some(s)) => {
                    if !queue.push(s) {
                        break Ok(());
                    }
                }
                Ok(None) => break Ok(()),
                Err(e) => break Err(e),
            }
        };
        queue.close();
        out
    })
}

/// `--source` argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceSpec {
    Osc(u16),
    Csv(PathBuf),
    Synth(PathBuf),
}

impl FromStr for SourceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::SourceSpec(s.to_string());
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        if arg.is_empty() {
            return Err(bad());
        }
        match kind {
            "osc" => arg.parse().map(SourceSpec::Osc).map_err(|_| bad()),
            "csv" => Ok(SourceSpec::Csv(arg.into())),
            "synth" => Ok(SourceSpec::Synth(arg.into())),
            _ => Err(bad()),
        }
    }
}
