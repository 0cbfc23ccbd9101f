// SPDX-License-Identifier: Apache-2.0

//! `.cfg` experiment configuration: `key = value` lines grouped under
//! `[section]` headers, `#` comments.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}`{path}`: {message}", .line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, path: &str, message: impl Into<String>) -> Self {
        Self { line: Some(line), path: path.to_string(), message: message.into() }
    }

    fn field(path: &str, message: impl Into<String>) -> Self {
        Self { line: None, path: path.to_string(), message: message.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    SweepN,
    Decay,
    FidelityCheck,
    Slope,
    Validate,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::SweepN => "sweep_n",
            ExperimentKind::Decay => "decay",
            ExperimentKind::FidelityCheck => "fidelity_check",
            ExperimentKind::Slope => "slope",
            ExperimentKind::Validate => "validate",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "sweep_n" => ExperimentKind::SweepN,
            "decay" => ExperimentKind::Decay,
            "fidelity_check" => ExperimentKind::FidelityCheck,
            "slope" => ExperimentKind::Slope,
            "validate" => ExperimentKind::Validate,
            other => return Err(format!("unknown experiment `{other}`")),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TauSpacing {
    Linear,
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WaveformKind {
    Dc,
    EchoSquare,
}

/// Sequence durations, either an explicit list or a generated grid.
#[derive(Clone, Debug, PartialEq)]
pub enum TauGrid {
    Values(Vec<f64>),
    Range { min: f64, max: f64, points: usize, spacing: TauSpacing },
}

impl TauGrid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            TauGrid::Values(ref v) => v.clone(),
            TauGrid::Range { min, points: 1, .. } => vec![min],
            TauGrid::Range { min, max, points, spacing } => (0..points)
                .map(|k| {
                    let f = k as f64 / (points - 1) as f64;
                    match spacing {
                        TauSpacing::Linear => min + f * (max - min),
                        TauSpacing::Log => (min.ln() + f * (max.ln() - min.ln())).exp(),
                    }
                })
                .collect(),
        }
    }
}

pub const DEFAULT_TAU_POINTS: usize = 50;
pub const DEFAULT_SAMPLES: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub trials: usize,
    pub output: Option<String>,
    /// Dark spins per system; the lower end of the sweep for `sweep_n`.
    pub n_dark: usize,
    pub n_max: usize,
    /// Cube side; `None` means `∛n_dark`.
    pub side: Option<f64>,
    /// Minimum spin separation as a fraction of the side.
    pub exclusion: f64,
    pub xi: f64,
    pub kappa_s: f64,
    pub polarization: f64,
    pub bath: bool,
    pub sequences: Vec<String>,
    pub n_c: Vec<usize>,
    pub gate_angle_deg: f64,
    pub waveform: WaveformKind,
    pub tau: TauGrid,
    /// Initial-state samples per trial; `None` enumerates configurations.
    pub samples: Option<usize>,
    pub total_time: f64,
}

impl ExperimentConfig {
    fn defaults(experiment: ExperimentKind, seed: u64) -> Self {
        let (n_dark, sequences, tau) = match experiment {
            ExperimentKind::Decay => (
                20,
                vec!["assisted".into(), "echo".into(), "none".into()],
                TauGrid::Range { min: 1e-3, max: 1e2, points: DEFAULT_TAU_POINTS, spacing: TauSpacing::Log },
            ),
            ExperimentKind::FidelityCheck => (
                3,
                vec!["spin_echo".into(), "assisted_echo".into()],
                TauGrid::Range { min: 1e-3, max: 1e-1, points: DEFAULT_TAU_POINTS, spacing: TauSpacing::Log },
            ),
            ExperimentKind::SweepN => (1, vec![], TauGrid::Values(vec![1.0])),
            ExperimentKind::Slope | ExperimentKind::Validate => (
                4,
                vec!["spin_echo".into(), "assisted_echo".into()],
                TauGrid::Values(vec![1.0]),
            ),
        };
        Self {
            experiment,
            seed,
            trials: 1,
            output: None,
            n_dark,
            n_max: if experiment == ExperimentKind::SweepN { 8 } else { n_dark },
            side: None,
            exclusion: 0.05,
            xi: 1.0,
            kappa_s: if experiment == ExperimentKind::SweepN { 0.0 } else { 1.0 },
            polarization: if experiment == ExperimentKind::Decay { 0.0 } else { 1.0 },
            bath: true,
            sequences,
            n_c: if experiment == ExperimentKind::Decay { vec![8, 12, 25, 50] } else { vec![] },
            gate_angle_deg: 90.0,
            waveform: WaveformKind::Dc,
            tau,
            samples: (experiment == ExperimentKind::Decay).then_some(DEFAULT_SAMPLES),
            total_time: 1.0,
        }
    }

    pub fn side(&self) -> f64 {
        self.side.unwrap_or_else(|| (self.n_dark as f64).cbrt())
    }

    /// Canonical text holding every effective value; parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        kv("experiment", self.experiment.as_str().into());
        kv("seed", self.seed.to_string());
        kv("trials", self.trials.to_string());
        if let Some(o) = &self.output {
            kv("output", o.clone());
        }
        out.push_str("\n[system]\n");
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        kv("n_dark", self.n_dark.to_string());
        kv("n_max", self.n_max.to_string());
        if let Some(s) = self.side {
            kv("side", s.to_string());
        }
        kv("exclusion", self.exclusion.to_string());
        kv("xi", self.xi.to_string());
        kv("kappa_s", self.kappa_s.to_string());
        kv("polarization", self.polarization.to_string());
        kv("bath", self.bath.to_string());
        out.push_str("\n[schedule]\n");
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        if !self.sequences.is_empty() {
            kv("sequences", self.sequences.join(", "));
        }
        if !self.n_c.is_empty() {
            kv("n_c", join(&self.n_c));
        }
        kv("gate_angle_deg", self.gate_angle_deg.to_string());
        out.push_str("\n[waveform]\n");
        out.push_str(match self.waveform {
            WaveformKind::Dc => "shape = dc\n",
            WaveformKind::EchoSquare => "shape = echo_square\n",
        });
        out.push_str("\n[tau]\n");
        match &self.tau {
            TauGrid::Values(v) => out.push_str(&format!("values = {}\n", join(v))),
            TauGrid::Range { min, max, points, spacing } => out.push_str(&format!(
                "min = {min}\nmax = {max}\npoints = {points}\nspacing = {}\n",
                match spacing {
                    TauSpacing::Linear => "linear",
                    TauSpacing::Log => "log",
                }
            )),
        }
        out.push_str("\n[ensemble]\n");
        out.push_str(&format!(
            "samples = {}\n",
            self.samples.map_or_else(|| "exact".to_string(), |s| s.to_string())
        ));
        out.push_str(&format!("\n[sensitivity]\ntotal_time = {}\n", self.total_time));
        out
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

const KEYS: &[(&str, &[&str])] = &[
    ("", &["experiment", "seed", "trials", "output"]),
    ("system", &["n_dark", "n_max", "side", "exclusion", "xi", "kappa_s", "polarization", "bath"]),
    ("schedule", &["sequences", "n_c", "gate_angle_deg"]),
    ("waveform", &["shape"]),
    ("tau", &["values", "min", "max", "points", "spacing"]),
    ("ensemble", &["samples"]),
    ("sensitivity", &["total_time"]),
];

struct Entry {
    line: usize,
    path: String,
    value: String,
}

fn value<T: FromStr>(e: &Entry) -> Result<T, ConfigError> {
    e.value
        .parse()
        .map_err(|_| ConfigError::at(e.line, &e.path, format!("cannot parse `{}`", e.value)))
}

fn finite(e: &Entry) -> Result<f64, ConfigError> {
    let v: f64 = value(e)?;
    if !v.is_finite() {
        return Err(ConfigError::at(e.line, &e.path, "must be finite"));
    }
    Ok(v)
}

fn list<T: FromStr>(e: &Entry) -> Result<Vec<T>, ConfigError> {
    e.value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| ConfigError::at(e.line, &e.path, format!("cannot parse `{s}`"))))
        .collect()
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut section = String::new();
    let mut entries: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if !KEYS.iter().any(|(s, _)| *s == name) || name.is_empty() {
                return Err(ConfigError::at(line, name, "unknown section"));
            }
            section = name.to_string();
            continue;
        }
        let (key, val) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::at(line, content, "expected `key = value`"))?;
        let key = key.trim();
        let path = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        let allowed = KEYS.iter().find(|(s, _)| *s == section).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            return Err(ConfigError::at(line, &path, "unknown key"));
        }
        if let Some(prev) = entries.iter().find(|e| e.path == path) {
            return Err(ConfigError::at(line, &path, format!("duplicate key (first set on line {})", prev.line)));
        }
        entries.push(Entry { line, path, value: val.trim().to_string() });
    }
    let get = |path: &str| entries.iter().find(|e| e.path == path);

    let experiment: ExperimentKind = match get("experiment") {
        Some(e) => e.value.parse().map_err(|m| ConfigError::at(e.line, "experiment", m))?,
        None => return Err(ConfigError::field("experiment", "missing")),
    };
    let seed: u64 = match get("seed") {
        Some(e) => value(e)?,
        None => return Err(ConfigError::field("seed", "missing (runs are never seeded from the clock)")),
    };
    let mut cfg = ExperimentConfig::defaults(experiment, seed);

    if let Some(e) = get("trials") {
        cfg.trials = value(e)?;
        if cfg.trials == 0 {
            return Err(ConfigError::at(e.line, &e.path, "must be at least 1"));
        }
    }
    if let Some(e) = get("output") {
        cfg.output = Some(e.value.clone());
    }
    if let Some(e) = get("system.n_dark") {
        cfg.n_dark = value(e)?;
        if experiment != ExperimentKind::SweepN {
            cfg.n_max = cfg.n_dark;
        }
    }
    if let Some(e) = get("system.n_max") {
        cfg.n_max = value(e)?;
        if cfg.n_max < cfg.n_dark {
            return Err(ConfigError::at(e.line, &e.path, "must be at least n_dark"));
        }
    }
    if let Some(e) = get("system.side") {
        let s = finite(e)?;
        if s <= 0.0 {
            return Err(ConfigError::at(e.line, &e.path, "must be positive"));
        }
        cfg.side = Some(s);
    }
    if let Some(e) = get("system.exclusion") {
        cfg.exclusion = finite(e)?;
        if !(0.0..0.25).contains(&cfg.exclusion) {
            return Err(ConfigError::at(e.line, &e.path, "must lie in [0, 0.25)"));
        }
    }
    if let Some(e) = get("system.xi") {
        cfg.xi = finite(e)?;
    }
    if let Some(e) = get("system.kappa_s") {
        cfg.kappa_s = finite(e)?;
    }
    if let Some(e) = get("system.polarization") {
        cfg.polarization = finite(e)?;
        if cfg.polarization.abs() > 1.0 {
            return Err(ConfigError::at(e.line, &e.path, "must lie in [-1, 1]"));
        }
    }
    if let Some(e) = get("system.bath") {
        cfg.bath = value(e)?;
    }
    if let Some(e) = get("schedule.sequences") {
        cfg.sequences = list(e)?;
        if cfg.sequences.is_empty() {
            return Err(ConfigError::at(e.line, &e.path, "needs at least one entry"));
        }
    }
    if let Some(e) = get("schedule.n_c") {
        cfg.n_c = list(e)?;
        if cfg.n_c.contains(&0) {
            return Err(ConfigError::at(e.line, &e.path, "cycle counts must be positive"));
        }
    }
    if let Some(e) = get("schedule.gate_angle_deg") {
        cfg.gate_angle_deg = finite(e)?;
    }
    if let Some(e) = get("waveform.shape") {
        cfg.waveform = match e.value.as_str() {
            "dc" => WaveformKind::Dc,
            "echo_square" => WaveformKind::EchoSquare,
            other => return Err(ConfigError::at(e.line, &e.path, format!("unknown shape `{other}`"))),
        };
    }
    cfg.tau = parse_tau(&get, &cfg.tau)?;
    if let Some(e) = get("ensemble.samples") {
        cfg.samples = if e.value == "exact" {
            None
        } else {
            let s: usize = value(e)?;
            if s == 0 {
                return Err(ConfigError::at(e.line, &e.path, "must be at least 1 or `exact`"));
            }
            Some(s)
        };
    }
    if let Some(e) = get("sensitivity.total_time") {
        cfg.total_time = finite(e)?;
        if cfg.total_time <= 0.0 {
            return Err(ConfigError::at(e.line, &e.path, "must be positive"));
        }
    }
    if cfg.n_dark == 0 && experiment != ExperimentKind::SweepN {
        return Err(ConfigError::field("system.n_dark", "must be at least 1"));
    }
    Ok(cfg)
}

fn parse_tau<'a>(get: &dyn Fn(&str) -> Option<&'a Entry>, default: &TauGrid) -> Result<TauGrid, ConfigError> {
    let range_keys = ["tau.min", "tau.max", "tau.points", "tau.spacing"];
    let grid = match get("tau.values") {
        Some(e) => {
            if let Some(other) = range_keys.iter().find_map(|k| get(k)) {
                return Err(ConfigError::at(other.line, &other.path, "cannot be combined with `tau.values`"));
            }
            let v: Vec<f64> = list(e)?;
            if v.is_empty() {
                return Err(ConfigError::at(e.line, &e.path, "needs at least one value"));
            }
            check_grid(&v).map_err(|m| ConfigError::at(e.line, &e.path, m))?;
            return Ok(TauGrid::Values(v));
        }
        None if range_keys.iter().all(|k| get(k).is_none()) => return Ok(default.clone()),
        None => {
            let (mut min, mut max, mut points, mut spacing) = match *default {
                TauGrid::Range { min, max, points, spacing } => (min, max, points, spacing),
                TauGrid::Values(_) => (f64::NAN, f64::NAN, DEFAULT_TAU_POINTS, TauSpacing::Linear),
            };
            if let Some(e) = get("tau.min") {
                min = finite(e)?;
            }
            if let Some(e) = get("tau.max") {
                max = finite(e)?;
            }
            if let Some(e) = get("tau.points") {
                points = value(e)?;
                if points == 0 {
                    return Err(ConfigError::at(e.line, &e.path, "must be at least 1"));
                }
            }
            if let Some(e) = get("tau.spacing") {
                spacing = match e.value.as_str() {
                    "linear" => TauSpacing::Linear,
                    "log" => TauSpacing::Log,
                    other => return Err(ConfigError::at(e.line, &e.path, format!("expected linear or log, found `{other}`"))),
                };
            }
            if min.is_nan() || max.is_nan() {
                return Err(ConfigError::field("tau", "a range needs both `min` and `max`"));
            }
            TauGrid::Range { min, max, points, spacing }
        }
    };
    check_grid(&grid.values()).map_err(|m| ConfigError::field("tau", m))?;
    if let TauGrid::Range { min, max, points, .. } = grid {
        if points > 1 && min >= max {
            return Err(ConfigError::field("tau", "`min` must be below `max`"));
        }
    }
    Ok(grid)
}

fn check_grid(v: &[f64]) -> Result<(), String> {
    if v.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err("durations must be positive and finite".into());
    }
    if v.windows(2).any(|w| w[0] >= w[1]) {
        return Err("durations must be strictly increasing".into());
    }
    Ok(())
}
