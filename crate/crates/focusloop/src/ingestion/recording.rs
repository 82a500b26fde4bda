//! CSV session files: `t_ms,<channel columns>[,label]`, one row per sample.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use focusloop_core::{ChannelId, ChannelSet, EegSample, StateLabel};

use super::{LabeledSample, Paced, SampleSource, VecSource, SAMPLE_PERIOD_MS};
use crate::error::{Error, Result};

/// A loaded session file.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecording {
    pub channels: ChannelSet,
    pub samples: Vec<EegSample>,
    /// Present when the file has a `label` column; `None` rows were unprompted.
    pub labels: Option<Vec<Option<StateLabel>>>,
}

impl SessionRecording {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn label_at(&self, i: usize) -> Option<StateLabel> {
        self.labels.as_ref().and_then(|l| l[i])
    }

    pub fn labeled_samples(&self) -> Vec<LabeledSample> {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, s)| LabeledSample {
                sample: s.clone(),
                label: self.label_at(i),
            })
            .collect()
    }

    /// Copy with timestamps regenerated on the 100 ms grid.
    pub fn regridded(&self) -> Self {
        let mut out = self.clone();
        for (i, s) in out.samples.iter_mut().enumerate() {
            s.timestamp_ms = i as u64 * SAMPLE_PERIOD_MS;
        }
        out
    }
}

fn header(channels: &ChannelSet, labeled: bool) -> Vec<String> {
    let mut h = vec!["t_ms".to_string()];
    h.extend(channels.channels().iter().map(ChannelId::column_name));
    if labeled {
        h.push("label".to_string());
    }
    h
}

/// Incremental writer; every row is flushed before `write` returns.
pub struct SessionWriter {
    path: PathBuf,
    channels: ChannelSet,
    labeled: bool,
    out: csv::Writer<BufWriter<File>>,
    rows: usize,
}

impl SessionWriter {
    pub fn create(path: impl AsRef<Path>, channels: ChannelSet, labeled: bool) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = csv::Writer::from_writer(BufWriter::new(file));
        out.write_record(header(&channels, labeled))
            .map_err(|e| csv_io(&path, e))?;
        out.flush().map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path,
            channels,
            labeled,
            out,
            rows: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn write(&mut self, s: &EegSample, label: Option<StateLabel>) -> Result<()> {
        s.check(self.channels.len())?;
        let mut row = Vec::with_capacity(self.channels.len() + 2);
        row.push(s.timestamp_ms.to_string());
        // Display for f64 is the shortest string that parses back exactly
        row.extend(s.values.iter().map(|v| v.to_string()));
        if self.labeled {
            row.push(label.map(|l| l.value().to_string()).unwrap_or_default());
        }
        self.out.write_record(&row).map_err(|e| csv_io(&self.path, e))?;
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        self.rows += 1;
        Ok(())
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Csv {
            path: path.to_path_buf(),
            line: 0,
            reason: format!("{:?}", other),
        },
    }
}

/// Drains `source` into a CSV file. Stops after `limit` samples when given.
/// Rows written before a failure stay on disk.
pub fn record_session<S: SampleSource + ?Sized>(
    source: &mut S,
    path: impl AsRef<Path>,
    labeled: bool,
    limit: Option<usize>,
) -> Result<SessionRecording> {
    let channels = source.channels().clone();
    let mut w = SessionWriter::create(path, channels.clone(), labeled)?;
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    while limit.is_none_or(|n| samples.len() < n) {
        let Some(ls) = source.next_sample()? else {
            break;
        };
        w.write(&ls.sample, ls.label)?;
        samples.push(ls.sample);
        labels.push(ls.label);
    }
    Ok(SessionRecording {
        channels,
        samples,
        labels: labeled.then_some(labels),
    })
}

pub fn read_session(path: impl AsRef<Path>) -> Result<SessionRecording> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let fail = |line: u64, reason: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        reason,
    };

    let mut records = rdr.records();
    let head = match records.next() {
        None => return Err(Error::EmptyRecording { path: path.into() }),
        Some(r) => r.map_err(|e| fail(1, e.to_string()))?,
    };
    let names: Vec<&str> = head.iter().collect();
    if names.first() != Some(&"t_ms") {
        return Err(fail(1, "first column must be t_ms".into()));
    }
    let labeled = names.last() == Some(&"label");
    let chan_names = &names[1..names.len() - labeled as usize];
    let ids = chan_names
        .iter()
        .map(|n| ChannelId::from_column_name(n))
        .collect::<focusloop_core::Result<Vec<_>>>()
        .map_err(|e| fail(1, e.to_string()))?;
    let channels = ChannelSet::new(ids).map_err(|e| fail(1, e.to_string()))?;
    let width = names.len();

    let mut samples: Vec<EegSample> = Vec::new();
    let mut labels = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            fail(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(fail(line, format!("expected {} columns, found {}", width, rec.len())));
        }
        let t: u64 = rec[0]
            .parse()
            .map_err(|_| fail(line, format!("t_ms: cannot parse `{}`", &rec[0])))?;
        if let Some(prev) = samples.last() {
            if t <= prev.timestamp_ms {
                return Err(fail(line, format!("t_ms {} not after {}", t, prev.timestamp_ms)));
            }
        }
        let mut values = Vec::with_capacity(chan_names.len());
        for (k, name) in chan_names.iter().enumerate() {
            let cell = &rec[k + 1];
            let v: f64 = cell
                .parse()
                .map_err(|_| fail(line, format!("{}: cannot parse `{}`", name, cell)))?;
            if !v.is_finite() {
                return Err(fail(line, format!("{}: non-finite value", name)));
            }
            values.push(v);
        }
        if labeled {
            let cell = &rec[width - 1];
            let label = match cell {
                "" => None,
                _ => Some(
                    cell.parse::<i64>()
                        .ok()
                        .and_then(StateLabel::from_value)
                        .ok_or_else(|| fail(line, format!("label must be 1, -1 or empty, got `{}`", cell)))?,
                ),
            };
            labels.push(label);
        }
        samples.push(EegSample::new(t, values));
    }
    if samples.is_empty() {
        return Err(Error::EmptyRecording { path: path.into() });
    }
    Ok(SessionRecording {
        channels,
        samples,
        labels: labeled.then_some(labels),
    })
}

pub fn write_session(path: impl AsRef<Path>, rec: &SessionRecording) -> Result<()> {
    let mut w = SessionWriter::create(path, rec.channels.clone(), rec.labels.is_some())?;
    for (i, s) in rec.samples.iter().enumerate() {
        w.write(s, rec.label_at(i))?;
    }
    Ok(())
}

/// Replays a session file at `speed` (1.0 is real time, 0 is unpaced) with
/// timestamps regenerated on the 100 ms grid.
pub fn replay_csv(path: impl AsRef<Path>, speed: f64) -> Result<Paced<VecSource>> {
    let rec = read_session(path)?.regridded();
    let channels = rec.channels.clone();
    Paced::new(VecSource::new(channels, rec.labeled_samples()), speed)
}
