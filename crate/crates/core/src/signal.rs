//! Sample, window and trial types plus the stride-1 sliding window buffer.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::SAMPLE_RATE_HZ;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Electrode {
    F7,
    F8,
}

/// Band power channels. Declaration order is the selection preference order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Band {
    Gamma,
    Beta,
    Alpha,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::Gamma, Band::Beta, Band::Alpha];

    pub fn as_str(self) -> &'static str {
        match self {
            Band::Gamma => "gamma",
            Band::Beta => "beta",
            Band::Alpha => "alpha",
        }
    }

    /// Lower is preferred (gamma > beta > alpha).
    pub fn preference_rank(self) -> u8 {
        self as u8
    }
}

/// One of the six electrode/band combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelId {
    pub electrode: Electrode,
    pub band: Band,
}

impl ChannelId {
    pub const fn new(electrode: Electrode, band: Band) -> Self {
        Self { electrode, band }
    }

    pub fn all() -> [ChannelId; 6] {
        let mut out = [ChannelId::new(Electrode::F7, Band::Gamma); 6];
        let mut i = 0;
        for band in Band::ALL {
            for electrode in [Electrode::F7, Electrode::F8] {
                out[i] = ChannelId::new(electrode, band);
                i += 1;
            }
        }
        out
    }

    /// CSV column name, e.g. `f7_gamma`.
    pub fn column_name(&self) -> String {
        let e = match self.electrode {
            Electrode::F7 => "f7",
            Electrode::F8 => "f8",
        };
        format!("{}_{}", e, self.band.as_str())
    }

    pub fn from_column_name(s: &str) -> Result<Self> {
        let (e, b) = s
            .split_once('_')
            .ok_or_else(|| Error::UnknownChannel(s.to_string()))?;
        Self::from_parts(e, b).ok_or_else(|| Error::UnknownChannel(s.to_string()))
    }

    fn from_parts(e: &str, b: &str) -> Option<Self> {
        let electrode = match e.to_ascii_lowercase().as_str() {
            "f7" => Electrode::F7,
            "f8" => Electrode::F8,
            _ => return None,
        };
        let band = match b.to_ascii_lowercase().as_str() {
            "gamma" => Band::Gamma,
            "beta" => Band::Beta,
            "alpha" => Band::Alpha,
            _ => return None,
        };
        Some(Self { electrode, band })
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}.{}", self.electrode, self.band.as_str())
    }
}

/// Accepts `F7.gamma` (display form) as well as `f7_gamma` (column form).
impl FromStr for ChannelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (e, b) = s
            .split_once('.')
            .or_else(|| s.split_once('_'))
            .ok_or_else(|| Error::UnknownChannel(s.to_string()))?;
        Self::from_parts(e, b).ok_or_else(|| Error::UnknownChannel(s.to_string()))
    }
}

impl Serialize for ChannelId {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ChannelId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Non-empty ordered channel subset without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct ChannelSet(Vec<ChannelId>);

impl ChannelSet {
    pub fn new(channels: Vec<ChannelId>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidChannelSet("empty".into()));
        }
        for (i, c) in channels.iter().enumerate() {
            if channels[..i].contains(c) {
                return Err(Error::InvalidChannelSet(format!("duplicate channel {}", c)));
            }
        }
        Ok(Self(channels))
    }

    /// The F7/F8 gamma pair the engine runs on by default.
    pub fn gamma_pair() -> Self {
        Self::bands(&[Band::Gamma])
    }

    /// F7 and F8 for each listed band, band-major.
    pub fn bands(bands: &[Band]) -> Self {
        let mut v = Vec::with_capacity(bands.len() * 2);
        for &band in bands {
            v.push(ChannelId::new(Electrode::F7, band));
            v.push(ChannelId::new(Electrode::F8, band));
        }
        Self::new(v).expect("band list must be non-empty and unique")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn channels(&self) -> &[ChannelId] {
        &self.0
    }

    pub fn contains_band(&self, band: Band) -> bool {
        self.0.iter().any(|c| c.band == band)
    }

    pub fn index_of(&self, id: ChannelId) -> Option<usize> {
        self.0.iter().position(|&c| c == id)
    }
}

impl<'de> Deserialize<'de> for ChannelSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let v = Vec::<ChannelId>::deserialize(deserializer)?;
        ChannelSet::new(v).map_err(serde::de::Error::custom)
    }
}

impl Default for ChannelSet {
    fn default() -> Self {
        Self::gamma_pair()
    }
}

/// +1 concentration, -1 relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateLabel {
    Concentration,
    Relaxation,
}

impl StateLabel {
    pub fn value(self) -> i8 {
        match self {
            StateLabel::Concentration => 1,
            StateLabel::Relaxation => -1,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.value() as f64
    }

    pub fn from_value(v: i64) -> Option<Self> {
        match v {
            1 => Some(StateLabel::Concentration),
            -1 => Some(StateLabel::Relaxation),
            _ => None,
        }
    }

    /// Score > 0 is concentration; a zero score counts as relaxation.
    pub fn from_score(score: f64) -> Self {
        if score > 0.0 {
            StateLabel::Concentration
        } else {
            StateLabel::Relaxation
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            StateLabel::Concentration => StateLabel::Relaxation,
            StateLabel::Relaxation => StateLabel::Concentration,
        }
    }
}

impl Serialize for StateLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        serializer.serialize_i8(self.value())
    }
}

impl<'de> Deserialize<'de> for StateLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let v = i64::deserialize(deserializer)?;
        StateLabel::from_value(v)
            .ok_or_else(|| serde::de::Error::custom(format!("label must be 1 or -1, got {}", v)))
    }
}

/// One 10 Hz band-power reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EegSample {
    pub timestamp_ms: u64,
    pub values: Vec<f64>,
}

impl EegSample {
    pub fn new(timestamp_ms: u64, values: Vec<f64>) -> Self {
        Self {
            timestamp_ms,
            values,
        }
    }

    pub fn check(&self, channels: usize) -> Result<()> {
        if self.values.len() != channels {
            return Err(Error::ChannelCountMismatch {
                expected: channels,
                got: self.values.len(),
            });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample"));
        }
        Ok(())
    }
}

/// C x T matrix, row-major (one row per channel, columns ascending in time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    channels: usize,
    samples: usize,
    data: Vec<f64>,
    pub start_ts: u64,
    pub end_ts: u64,
}

impl Window {
    pub fn from_rows(rows: &[Vec<f64>], start_ts: u64) -> Result<Self> {
        let channels = rows.len();
        if channels == 0 {
            return Err(Error::Empty("window rows"));
        }
        let samples = rows[0].len();
        if samples == 0 {
            return Err(Error::Empty("window columns"));
        }
        let mut data = Vec::with_capacity(channels * samples);
        for r in rows {
            if r.len() != samples {
                return Err(Error::DimensionMismatch {
                    expected: samples,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("window"));
        }
        Ok(Self {
            channels,
            samples,
            data,
            start_ts,
            end_ts: start_ts,
        })
    }

    /// Builds a window from consecutive samples (columns).
    pub fn from_samples<'a, I>(samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a EegSample>,
        I::IntoIter: ExactSizeIterator,
    {
        let iter = samples.into_iter();
        let t = iter.len();
        let mut cols: Vec<&EegSample> = Vec::with_capacity(t);
        cols.extend(iter);
        let first = cols.first().ok_or(Error::Empty("window samples"))?;
        let c = first.values.len();
        if c == 0 {
            return Err(Error::Empty("window rows"));
        }
        let mut data = alloc::vec![0.0; c * t];
        for (j, s) in cols.iter().enumerate() {
            s.check(c)?;
            for (i, &v) in s.values.iter().enumerate() {
                data[i * t + j] = v;
            }
        }
        Ok(Self {
            channels: c,
            samples: t,
            data,
            start_ts: first.timestamp_ms,
            end_ts: cols[t - 1].timestamp_ms,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn get(&self, channel: usize, sample: usize) -> f64 {
        self.data[channel * self.samples + sample]
    }

    pub fn row(&self, channel: usize) -> &[f64] {
        &self.data[channel * self.samples..(channel + 1) * self.samples]
    }

    /// Row-major backing data.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Elementwise `a * self + b * other`, used to check linearity of filters.
    pub fn combine(&self, a: f64, other: &Window, b: f64) -> Result<Window> {
        if self.channels != other.channels || self.samples != other.samples {
            return Err(Error::DimensionMismatch {
                expected: self.data.len(),
                got: other.data.len(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Window {
            data,
            ..self.clone()
        })
    }

    pub fn scaled(&self, s: f64) -> Window {
        Window {
            data: self.data.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }
}

/// Sample-major flattening: `[ch1(t1), ch2(t1), ch1(t2), ...]`.
pub fn flatten_window(w: &Window) -> Vec<f64> {
    let mut out = Vec::with_capacity(w.channels * w.samples);
    for t in 0..w.samples {
        for c in 0..w.channels {
            out.push(w.get(c, t));
        }
    }
    out
}

/// Inverse of [`flatten_window`] for a fixed shape.
pub fn unflatten_window(v: &[f64], channels: usize, samples: usize, start_ts: u64) -> Result<Window> {
    if v.len() != channels * samples || channels == 0 || samples == 0 {
        return Err(Error::DimensionMismatch {
            expected: channels * samples,
            got: v.len(),
        });
    }
    let rows: Vec<Vec<f64>> = (0..channels)
        .map(|c| (0..samples).map(|t| v[t * channels + c]).collect())
        .collect();
    Window::from_rows(&rows, start_ts)
}

/// Gap beyond which the buffer is cleared instead of bridging old and new data.
pub const DEFAULT_GAP_RESET_MS: u64 = 300;

/// Stride-1 sliding window over a single sample stream.
#[derive(Debug, Clone)]
pub struct WindowBuffer {
    channels: usize,
    window_len: usize,
    gap_reset_ms: u64,
    buf: VecDeque<EegSample>,
    last_ts: Option<u64>,
    resets: u64,
}

impl WindowBuffer {
    pub fn new(channels: usize, window_len: usize) -> Self {
        Self::with_gap_reset(channels, window_len, DEFAULT_GAP_RESET_MS)
    }

    pub fn with_gap_reset(channels: usize, window_len: usize, gap_reset_ms: u64) -> Self {
        assert!(channels > 0 && window_len > 0);
        Self {
            channels,
            window_len,
            gap_reset_ms,
            buf: VecDeque::with_capacity(window_len),
            last_ts: None,
            resets: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of times a timestamp gap cleared the buffer.
    pub fn gap_resets(&self) -> u64 {
        self.resets
    }

    /// Appends `s` and returns the latest full window once `window_len`
    /// samples are buffered. Rejected samples leave the buffer untouched.
    pub fn push_sample(&mut self, s: EegSample) -> Result<Option<Window>> {
        s.check(self.channels)?;
        if let Some(last) = self.last_ts {
            if s.timestamp_ms <= last {
                return Err(Error::NonMonotonicTimestamp {
                    last,
                    got: s.timestamp_ms,
                });
            }
            if s.timestamp_ms - last > self.gap_reset_ms {
                self.buf.clear();
                self.resets += 1;
            }
        }
        self.last_ts = Some(s.timestamp_ms);
        if self.buf.len() == self.window_len {
            self.buf.pop_front();
        }
        self.buf.push_back(s);
        if self.buf.len() == self.window_len {
            Window::from_samples(self.buf.iter()).map(Some)
        } else {
            Ok(None)
        }
    }
}

/// One prompted block of a single mental state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub label: StateLabel,
    pub samples: Vec<EegSample>,
    pub nominal_duration_s: u32,
}

impl Trial {
    pub fn new(label: StateLabel, samples: Vec<EegSample>, nominal_duration_s: u32) -> Result<Self> {
        let expected = (nominal_duration_s * SAMPLE_RATE_HZ) as usize;
        if samples.len().abs_diff(expected) > 2 {
            return Err(Error::TrialLength {
                expected,
                got: samples.len(),
            });
        }
        Ok(Self {
            label,
            samples,
            nominal_duration_s,
        })
    }
}

fn sample_index(seconds: f64) -> usize {
    // 1e-9 absorbs representation error such as 4.1 * 10 = 40.99999...
    libm::floor(seconds * SAMPLE_RATE_HZ as f64 + 1e-9) as usize
}

/// Samples whose offset from trial start lies in `[start_s, end_s)`.
pub fn extract_segment(t: &Trial, start_s: f64, end_s: f64) -> Result<&[EegSample]> {
    let in_range = start_s.is_finite()
        && end_s.is_finite()
        && 0.0 <= start_s
        && start_s < end_s
        && end_s <= t.nominal_duration_s as f64;
    if !in_range {
        return Err(Error::SegmentOutOfRange {
            start_s,
            end_s,
            duration_s: t.nominal_duration_s,
        });
    }
    let lo = sample_index(start_s).min(t.samples.len());
    let hi = sample_index(end_s).min(t.samples.len());
    Ok(&t.samples[lo..hi])
}

/// All stride-1 windows of length `len` over a sample run.
pub fn sliding_windows(samples: &[EegSample], len: usize) -> Result<Vec<Window>> {
    if len == 0 || samples.len() < len {
        return Ok(Vec::new());
    }
    samples.windows(len).map(Window::from_samples).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn s(ts: u64, a: f64, b: f64) -> EegSample {
        EegSample::new(ts, vec![a, b])
    }

    #[test]
    fn first_window_on_fifth_sample() {
        let mut buf = WindowBuffer::new(2, 5);
        for i in 0..4 {
            assert!(buf.push_sample(s(i * 100, i as f64, 0.0)).unwrap().is_none());
        }
        let w = buf.push_sample(s(400, 4.0, 0.0)).unwrap().unwrap();
        assert_eq!(w.row(0), &[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(w.start_ts, 0);
        assert_eq!(w.end_ts, 400);
    }

    #[test]
    fn sixth_sample_slides_by_one() {
        let mut buf = WindowBuffer::new(2, 5);
        for i in 0..5 {
            buf.push_sample(s(i * 100, i as f64, 0.0)).unwrap();
        }
        let w = buf.push_sample(s(500, 5.0, 0.0)).unwrap().unwrap();
        assert_eq!(w.row(0), &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let w = buf.push_sample(s(600, 6.0, 0.0)).unwrap().unwrap();
        assert_eq!(w.row(0), &[2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn equal_timestamp_rejected_buffer_unchanged() {
        let mut buf = WindowBuffer::new(2, 5);
        buf.push_sample(s(0, 0.0, 0.0)).unwrap();
        buf.push_sample(s(100, 1.0, 0.0)).unwrap();
        let err = buf.push_sample(s(100, 9.0, 9.0)).unwrap_err();
        assert_eq!(err, Error::NonMonotonicTimestamp { last: 100, got: 100 });
        assert_eq!(buf.len(), 2);
        // stream continues
        buf.push_sample(s(200, 2.0, 0.0)).unwrap();
        assert_eq!(buf.len(), 3);
    }

    #[test]
    fn channel_mismatch_and_non_finite_rejected() {
        let mut buf = WindowBuffer::new(2, 5);
        assert!(matches!(
            buf.push_sample(EegSample::new(0, vec![1.0])),
            Err(Error::ChannelCountMismatch { expected: 2, got: 1 })
        ));
        assert!(matches!(
            buf.push_sample(s(0, f64::NAN, 0.0)),
            Err(Error::NonFinite(_))
        ));
        assert!(buf.is_empty());
    }

    #[test]
    fn gap_resets_buffer() {
        let mut buf = WindowBuffer::new(2, 5);
        for i in 0..5 {
            buf.push_sample(s(i * 100, 0.0, 0.0)).unwrap();
        }
        // 400 -> 701 is a 301 ms gap
        assert!(buf.push_sample(s(701, 0.0, 0.0)).unwrap().is_none());
        assert_eq!(buf.len(), 1);
        assert_eq!(buf.gap_resets(), 1);
        // exactly 300 ms is tolerated
        buf.push_sample(s(1001, 0.0, 0.0)).unwrap();
        assert_eq!(buf.len(), 2);
    }

    fn trial(n: usize, dur: u32) -> Trial {
        let samples = (0..n).map(|i| s(i as u64 * 100, i as f64, 0.0)).collect();
        Trial::new(StateLabel::Concentration, samples, dur).unwrap()
    }

    #[test]
    fn effective_segments() {
        let t = trial(100, 10);
        let seg = extract_segment(&t, 2.0, 6.0).unwrap();
        assert_eq!(seg.len(), 40);
        assert_eq!(seg[0].values[0], 20.0);
        assert_eq!(seg[39].values[0], 59.0);

        let t = trial(150, 15);
        let seg = extract_segment(&t, 4.0, 8.0).unwrap();
        assert_eq!(seg.len(), 40);
        assert_eq!(seg[0].values[0], 40.0);
        assert_eq!(seg[39].values[0], 79.0);
    }

    #[test]
    fn segment_out_of_range() {
        let t = trial(100, 10);
        assert!(matches!(
            extract_segment(&t, 8.0, 12.0),
            Err(Error::SegmentOutOfRange { .. })
        ));
        assert!(extract_segment(&t, 3.0, 3.0).is_err());
        assert!(extract_segment(&t, -1.0, 3.0).is_err());
    }

    #[test]
    fn trial_length_tolerance() {
        let mk = |n: usize| {
            let samples = (0..n).map(|i| s(i as u64 * 100, 0.0, 0.0)).collect();
            Trial::new(StateLabel::Relaxation, samples, 10)
        };
        assert!(mk(98).is_ok());
        assert!(mk(102).is_ok());
        assert!(mk(97).is_err());
        assert!(mk(103).is_err());
    }

    #[test]
    fn flatten_order_is_sample_major() {
        let w = Window::from_rows(
            &[vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![6.0, 7.0, 8.0, 9.0, 10.0]],
            0,
        )
        .unwrap();
        assert_eq!(
            flatten_window(&w),
            vec![1.0, 6.0, 2.0, 7.0, 3.0, 8.0, 4.0, 9.0, 5.0, 10.0]
        );
        let z = Window::from_rows(&[vec![0.0; 5], vec![0.0; 5]], 0).unwrap();
        assert_eq!(flatten_window(&z), vec![0.0; 10]);
    }

    #[test]
    fn channel_names_parse_both_forms() {
        let id: ChannelId = "F7.gamma".parse().unwrap();
        assert_eq!(id, ChannelId::new(Electrode::F7, Band::Gamma));
        assert_eq!(id.column_name(), "f7_gamma");
        assert_eq!(ChannelId::from_column_name("f8_alpha").unwrap().band, Band::Alpha);
        assert!("F9.gamma".parse::<ChannelId>().is_err());
        assert_eq!(ChannelId::all().len(), 6);
    }

    #[test]
    fn channel_set_rejects_duplicates_and_empty() {
        let g = ChannelId::new(Electrode::F7, Band::Gamma);
        assert!(ChannelSet::new(vec![]).is_err());
        assert!(ChannelSet::new(vec![g, g]).is_err());
        assert_eq!(ChannelSet::bands(&Band::ALL).len(), 6);
    }

    #[test]
    fn label_serializes_as_integer() {
        let j = serde_json::to_string(&StateLabel::Relaxation).unwrap();
        assert_eq!(j, "-1");
        assert!(serde_json::from_str::<StateLabel>("0").is_err());
        assert_eq!(StateLabel::from_score(0.0), StateLabel::Relaxation);
    }
}
