// SPDX-License-Identifier: Apache-2.0

//! Line-oriented pulse-program language.
//!
//! ```text
//! # schedule: assisted_echo
//! pulse 0.25 dark y 90
//! echo
//! wahuha 0.0 0.5 cycles=8
//! pulse 1 dark[2] -x 180
//! ```
//!
//! Times are fractions of the sensing period. `echo` is shorthand for a
//! central π pulse about x at 0.5. A `# schedule: <name>` comment sets the
//! schedule name; other comments are ignored.

use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quantum::{Axis, Target};

#[derive(Clone, Debug, PartialEq)]
pub struct PulseEvent {
    pub t_frac: f64,
    pub target: Target,
    pub axis: Axis,
    pub angle_deg: f64,
}

impl PulseEvent {
    pub fn new(t_frac: f64, target: Target, axis: Axis, angle_deg: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t_frac) {
            return Err(Error::Config(format!("pulse time {t_frac} outside [0, 1]")));
        }
        if !angle_deg.is_finite() {
            return Err(Error::Config("pulse angle must be finite".into()));
        }
        Ok(Self {
            t_frac,
            target,
            axis,
            angle_deg,
        })
    }

    pub fn angle_rad(&self) -> f64 {
        self.angle_deg.to_radians()
    }
}

/// Pulse events sorted by time, ties kept in listing order.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    name: String,
    events: Vec<PulseEvent>,
    source_hash: String,
}

impl Schedule {
    pub fn new(name: impl Into<String>, mut events: Vec<PulseEvent>) -> Self {
        events.sort_by(|a, b| a.t_frac.total_cmp(&b.t_frac));
        let mut schedule = Self {
            name: name.into(),
            events,
            source_hash: String::new(),
        };
        schedule.source_hash = sha256_hex(&serialize(&schedule));
        schedule
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn events(&self) -> &[PulseEvent] {
        &self.events
    }

    /// Hex SHA-256 of the text this schedule was parsed from, or of its
    /// canonical serialization when built in code.
    pub fn source_hash(&self) -> &str {
        &self.source_hash
    }

    pub fn duration_frac(&self) -> f64 {
        1.0
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

/// Four collective π/2 pulses per cycle at offsets {1, 2, 4, 5}·t_cyc/6
/// about {x, −y, y, −x}.
pub fn expand_wahuha(t_start: f64, t_end: f64, n_c: usize) -> Result<Vec<PulseEvent>> {
    if !(t_start < t_end) || t_start < 0.0 || t_end > 1.0 {
        return Err(Error::Config(format!(
            "wahuha interval [{t_start}, {t_end}] is empty, reversed or outside [0, 1]"
        )));
    }
    if n_c == 0 {
        return Err(Error::Config("wahuha needs at least one cycle".into()));
    }
    const PATTERN: [(usize, Axis); 4] = [(1, Axis::X), (2, Axis::MinusY), (4, Axis::Y), (5, Axis::MinusX)];
    let span = t_end - t_start;
    let slots = 6 * n_c;
    let mut events = Vec::with_capacity(4 * n_c);
    for c in 0..n_c {
        for (offset, axis) in PATTERN {
            let t = t_start + span * (6 * c + offset) as f64 / slots as f64;
            events.push(PulseEvent::new(t, Target::DarkAll, axis, 90.0)?);
        }
    }
    Ok(events)
}

fn parse_target(token: &str, line: usize) -> std::result::Result<Target, ParseError> {
    match token {
        "central" => Ok(Target::Central),
        "dark" => Ok(Target::DarkAll),
        t if t.starts_with("dark[") && t.ends_with(']') => t[5..t.len() - 1]
            .parse::<usize>()
            .map(Target::Dark)
            .map_err(|_| err(line, format!("bad dark-spin index in `{t}`"))),
        t => Err(err(line, format!("unknown target `{t}`"))),
    }
}

fn parse_axis(token: &str, line: usize) -> std::result::Result<Axis, ParseError> {
    match token {
        "x" => Ok(Axis::X),
        "y" => Ok(Axis::Y),
        "z" => Ok(Axis::Z),
        "-x" => Ok(Axis::MinusX),
        "-y" => Ok(Axis::MinusY),
        t => Err(err(line, format!("unknown axis `{t}`"))),
    }
}

fn parse_number(token: &str, what: &str, line: usize) -> std::result::Result<f64, ParseError> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| err(line, format!("{what} `{token}` is not a finite number")))
}

fn parse_time(token: &str, line: usize) -> std::result::Result<f64, ParseError> {
    let t = parse_number(token, "time", line)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(err(line, format!("time {t} outside [0, 1]")));
    }
    Ok(t)
}

/// Parses a `.seq` program. Either the whole text is valid or the first
/// offending line is reported.
pub fn parse(text: &str) -> std::result::Result<Schedule, ParseError> {
    let mut name = String::from("custom");
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let (code, comment) = match raw.split_once('#') {
            Some((c, m)) => (c, Some(m)),
            None => (raw, None),
        };
        if let Some(m) = comment {
            if let Some(n) = m.trim().strip_prefix("schedule:") {
                name = n.trim().to_string();
            }
        }
        let tokens: Vec<&str> = code.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            ["pulse", t, target, axis, angle] => events.push(PulseEvent {
                t_frac: parse_time(t, line)?,
                target: parse_target(target, line)?,
                axis: parse_axis(axis, line)?,
                angle_deg: parse_number(angle, "angle", line)?,
            }),
            ["pulse", ..] => return Err(err(line, "expected `pulse <t_frac> <target> <axis> <angle_deg>`")),
            ["echo"] => events.push(PulseEvent {
                t_frac: 0.5,
                target: Target::Central,
                axis: Axis::X,
                angle_deg: 180.0,
            }),
            ["wahuha", a, b, cycles] => {
                let t0 = parse_time(a, line)?;
                let t1 = parse_time(b, line)?;
                let n_c = cycles
                    .strip_prefix("cycles=")
                    .and_then(|n| n.parse::<usize>().ok())
                    .ok_or_else(|| err(line, format!("expected `cycles=<n>`, found `{cycles}`")))?;
                let expanded = expand_wahuha(t0, t1, n_c).map_err(|e| err(line, e.to_string()))?;
                events.extend(expanded);
            }
            ["wahuha", ..] => return Err(err(line, "expected `wahuha <t_start> <t_end> cycles=<n>`")),
            [other, ..] => return Err(err(line, format!("unknown directive `{other}`"))),
        }
    }
    let mut schedule = Schedule::new(name, events);
    schedule.source_hash = sha256_hex(text);
    Ok(schedule)
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Central => f.write_str("central"),
            Target::DarkAll => f.write_str("dark"),
            Target::Dark(i) => write!(f, "dark[{i}]"),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
            Axis::MinusX => "-x",
            Axis::MinusY => "-y",
        })
    }
}

/// Canonical text: a header comment followed by one `pulse` line per event.
pub fn serialize(schedule: &Schedule) -> String {
    let mut out = format!("# schedule: {}\n", schedule.name);
    for e in &schedule.events {
        out.push_str(&format!(
            "pulse {} {} {} {}\n",
            e.t_frac, e.target, e.axis, e.angle_deg
        ));
    }
    out
}
