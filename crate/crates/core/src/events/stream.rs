//! Address-event streams and their on-disk form.
//!
//! A stream is stored as two files sharing a stem:
//!
//! * `name.csv`: one event per line, `t,x,y,p` with `t` in microseconds and
//!   `p` in {0, 1}. An optional `t,x,y,p` header line and `#` comment lines
//!   are accepted.
//! * `name.json`: `{"width": .., "height": .., "duration": .., "label": ..}`
//!   where `label` may be null.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    /// Microseconds since the start of the recording.
    pub t: u64,
    pub x: u16,
    pub y: u16,
    /// 1 for ON (brightness increase), 0 for OFF.
    pub p: u8,
}

/// Sidecar manifest describing the sensor and recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamHeader {
    pub width: u16,
    pub height: u16,
    /// Recording length in microseconds; every event has `t <= duration`.
    pub duration: u64,
    #[serde(default)]
    pub label: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    pub header: StreamHeader,
    pub events: Vec<Event>,
}

impl EventStream {
    /// Validates ordering, bounds and polarity.
    pub fn new(header: StreamHeader, events: Vec<Event>) -> Result<Self> {
        let s = Self { header, events };
        s.validate()?;
        Ok(s)
    }

    pub fn empty(header: StreamHeader) -> Self {
        Self {
            header,
            events: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        if h.width == 0 || h.height == 0 {
            return Err(Error::Validation("sensor dimensions must be non-zero".into()));
        }
        let mut prev = 0u64;
        for (i, e) in self.events.iter().enumerate() {
            if e.t < prev {
                return Err(Error::Validation(format!(
                    "event {i}: timestamp {} precedes {prev}",
                    e.t
                )));
            }
            if e.x >= h.width || e.y >= h.height {
                return Err(Error::Validation(format!(
                    "event {i}: ({}, {}) outside {}x{} sensor",
                    e.x, e.y, h.width, h.height
                )));
            }
            if e.p > 1 {
                return Err(Error::Validation(format!("event {i}: polarity {}", e.p)));
            }
            if e.t > h.duration {
                return Err(Error::Validation(format!(
                    "event {i}: t={} beyond duration {}",
                    e.t, h.duration
                )));
            }
            prev = e.t;
        }
        Ok(())
    }
}

/// Path of the JSON sidecar belonging to an event CSV.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn parse_field<T: std::str::FromStr>(raw: &str, name: &str, line: usize) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {name} value '{}'", raw.trim()),
    })
}

/// Parses event records from CSV text. Line numbers in errors are 1-based.
pub fn parse_events(text: &str) -> Result<Vec<Event>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut events = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if i == 0 && rec.get(0) == Some("t") {
            continue;
        }
        if rec.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 fields t,x,y,p, found {}", rec.len()),
            });
        }
        let p: u8 = parse_field(&rec[3], "p", line)?;
        if p > 1 {
            return Err(Error::Parse {
                line,
                message: format!("polarity must be 0 or 1, found {p}"),
            });
        }
        events.push(Event {
            t: parse_field(&rec[0], "t", line)?,
            x: parse_field(&rec[1], "x", line)?,
            y: parse_field(&rec[2], "y", line)?,
            p,
        });
    }
    Ok(events)
}

pub fn load_events(path: impl AsRef<Path>) -> Result<EventStream> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    let header_text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let header: StreamHeader = serde_json::from_str(&header_text)?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EventStream::new(header, parse_events(&text)?)
}

/// Writes `stream` as CSV plus sidecar; [`load_events`] reads it back exactly.
pub fn write_events(stream: &EventStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "x", "y", "p"])?;
    for e in &stream.events {
        w.serialize((e.t, e.x, e.y, e.p))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&stream.header)?;
    fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
}
