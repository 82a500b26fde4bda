//! OSC 1.0 message codec and the Muse band-power address mapping.
//!
//! Strings are NUL-terminated and padded to 4-byte boundaries; numeric
//! arguments are big-endian. Only `f` and `i` arguments are decoded, which
//! covers the band-power messages this engine consumes.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::signal::{Band, ChannelSet, EegSample, Electrode};

const BUNDLE_TAG: &[u8] = b"#bundle\0";

#[derive(Debug, Clone, PartialEq)]
pub struct OscMessage {
    pub address: String,
    /// Type tags without the leading comma.
    pub type_tags: String,
    pub args: Vec<f32>,
}

impl OscMessage {
    pub fn floats(address: &str, args: &[f32]) -> Self {
        Self {
            address: address.into(),
            type_tags: core::iter::repeat_n('f', args.len()).collect(),
            args: args.to_vec(),
        }
    }
}

fn err(offset: usize, reason: &'static str) -> Error {
    Error::Osc { offset, reason }
}

/// Reads a padded OSC string at `pos`, returning it and the next aligned offset.
fn read_str(buf: &[u8], pos: usize) -> Result<(&str, usize)> {
    let rest = buf.get(pos..).ok_or(err(pos, "string past end"))?;
    let len = rest
        .iter()
        .position(|&b| b == 0)
        .ok_or(err(pos, "unterminated string"))?;
    let s = core::str::from_utf8(&rest[..len]).map_err(|_| err(pos, "string is not utf-8"))?;
    let next = pos + (len + 4) / 4 * 4;
    if next > buf.len() {
        return Err(err(buf.len(), "string padding truncated"));
    }
    if buf[pos + len..next].iter().any(|&b| b != 0) {
        return Err(err(pos + len, "non-zero string padding"));
    }
    Ok((s, next))
}

fn read_u32(buf: &[u8], pos: usize) -> Result<u32> {
    let b = buf
        .get(pos..pos + 4)
        .ok_or(err(pos, "argument truncated"))?;
    Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// The innermost first message of a packet (bundles are unwrapped).
fn first_message(buf: &[u8], base: usize) -> Result<(&[u8], usize)> {
    if buf.starts_with(BUNDLE_TAG) {
        // tag + 8-byte time tag
        let pos = BUNDLE_TAG.len() + 8;
        let size = read_u32(buf, pos)? as usize;
        let start = pos + 4;
        let inner = buf
            .get(start..start + size)
            .ok_or(err(base + start, "bundle element truncated"))?;
        return first_message(inner, base + start);
    }
    Ok((buf, base))
}

fn address_of(buf: &[u8], base: usize) -> Result<(&str, usize)> {
    let (address, next) = read_str(buf, 0).map_err(|e| shift(e, base))?;
    if !address.starts_with('/') {
        return Err(err(base, "address must start with '/'"));
    }
    Ok((address, next))
}

fn shift(e: Error, base: usize) -> Error {
    match e {
        Error::Osc { offset, reason } => Error::Osc {
            offset: offset + base,
            reason,
        },
        other => other,
    }
}

fn parse_body(buf: &[u8], base: usize) -> Result<OscMessage> {
    let (address, pos) = address_of(buf, base)?;
    let (tags, mut pos) = read_str(buf, pos).map_err(|e| shift(e, base))?;
    let tags = tags
        .strip_prefix(',')
        .ok_or(err(base + pos, "type tag string must start with ','"))?;
    let mut args = Vec::with_capacity(tags.len());
    for tag in tags.chars() {
        let raw = read_u32(buf, pos).map_err(|e| shift(e, base))?;
        match tag {
            'f' => args.push(f32::from_bits(raw)),
            'i' => args.push(raw as i32 as f32),
            _ => return Err(err(base + pos, "unsupported type tag")),
        }
        pos += 4;
    }
    Ok(OscMessage {
        address: address.into(),
        type_tags: tags.into(),
        args,
    })
}

/// Decodes one OSC message; for a bundle the first contained message is used.
pub fn parse_osc(datagram: &[u8]) -> Result<OscMessage> {
    let (buf, base) = first_message(datagram, 0)?;
    parse_body(buf, base)
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(s.as_bytes());
    let pad = 4 - s.len() % 4;
    out.extend(core::iter::repeat_n(0u8, pad));
}

/// Encodes `f`/`i` arguments per the message's type tags.
pub fn serialize_osc(m: &OscMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(m.address.len() + m.type_tags.len() + 8 + 4 * m.args.len());
    push_str(&mut out, &m.address);
    let mut tags = String::with_capacity(m.type_tags.len() + 1);
    tags.push(',');
    tags.push_str(&m.type_tags);
    push_str(&mut out, &tags);
    for (tag, v) in m.type_tags.chars().zip(&m.args) {
        let bits = match tag {
            'i' => (*v as i32) as u32,
            _ => v.to_bits(),
        };
        out.extend_from_slice(&bits.to_be_bytes());
    }
    out
}

/// Wraps one encoded message in a bundle with an immediate time tag.
pub fn wrap_bundle(message: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(message.len() + 20);
    out.extend_from_slice(BUNDLE_TAG);
    out.extend_from_slice(&1u64.to_be_bytes());
    out.extend_from_slice(&(message.len() as u32).to_be_bytes());
    out.extend_from_slice(message);
    out
}

/// Band-power reading at the two forehead electrodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandReading {
    pub band: Band,
    pub f7: f64,
    pub f8: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MuseEvent {
    Band(BandReading),
    /// Valid OSC whose address this engine does not consume.
    Ignored,
}

fn band_for_address(address: &str) -> Option<Band> {
    match address {
        "/muse/elements/gamma_absolute" => Some(Band::Gamma),
        "/muse/elements/beta_absolute" => Some(Band::Beta),
        "/muse/elements/alpha_absolute" => Some(Band::Alpha),
        _ => None,
    }
}

/// Decodes a Muse datagram. Arguments arrive as (TP9, FP1, FP2, TP10);
/// index 1 is taken as F7 and index 2 as F8, the ear references are dropped.
pub fn decode_muse(datagram: &[u8]) -> Result<MuseEvent> {
    let (buf, base) = first_message(datagram, 0)?;
    let (address, _) = address_of(buf, base)?;
    let Some(band) = band_for_address(address) else {
        return Ok(MuseEvent::Ignored);
    };
    let msg = parse_body(buf, base)?;
    if msg.args.len() != 4 {
        return Err(err(base, "band message needs 4 arguments"));
    }
    Ok(MuseEvent::Band(BandReading {
        band,
        f7: msg.args[1] as f64,
        f8: msg.args[2] as f64,
    }))
}

/// Combines per-band Muse messages into samples for a channel set.
///
/// A sample is emitted whenever the set's first band arrives and every other
/// band in the set has been seen at least once; other bands contribute their
/// latest value.
#[derive(Debug, Clone)]
pub struct MuseAssembler {
    channels: ChannelSet,
    latest: [Option<(f64, f64)>; 3],
}

impl MuseAssembler {
    pub fn new(channels: ChannelSet) -> Self {
        Self {
            channels,
            latest: [None; 3],
        }
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn push(&mut self, reading: BandReading, timestamp_ms: u64) -> Option<EegSample> {
        self.latest[reading.band as usize] = Some((reading.f7, reading.f8));
        let clock = self.channels.channels()[0].band;
        if reading.band != clock {
            return None;
        }
        let values: Option<Vec<f64>> = self
            .channels
            .channels()
            .iter()
            .map(|c| {
                self.latest[c.band as usize].map(|(f7, f8)| match c.electrode {
                    Electrode::F7 => f7,
                    Electrode::F8 => f8,
                })
            })
            .collect();
        values.map(|v| EegSample::new(timestamp_ms, v))
    }
}
