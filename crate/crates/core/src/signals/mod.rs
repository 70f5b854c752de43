//! Sampled signals, input normalization and STL requirements.

mod formula;
mod parse;
mod range;
mod robustness;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use formula::{Cmp, Expr, Formula};
pub use parse::{parse, ParseError};
pub use range::{effective_range_bound, scaled_robustness, Interval, SignalRanges};
pub use robustness::{robustness, robustness_at};

/// Sampling period used for every piecewise-constant input signal.
pub const SAMPLE_PERIOD: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("value {value} outside range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("invalid range [{lo}, {hi}]")]
    BadRange { lo: f64, hi: f64 },
    #[error("expected {expected} coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid signal `{name}`: {reason}")]
    InvalidSignal { name: String, reason: String },
    #[error("trace has {available} samples but the formula needs {needed}")]
    InsufficientTrace { needed: usize, available: usize },
    #[error("signal `{0}` not present")]
    UnknownSignal(String),
    #[error("no range declared for signal `{0}`")]
    MissingRange(String),
    #[error("signals in a trace must share a sample period")]
    MixedPeriods,
}

/// A uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub name: String,
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl Signal {
    pub fn new(name: impl Into<String>, t0: f64, dt: f64, values: Vec<f64>) -> Result<Self, SignalError> {
        let name = name.into();
        let invalid = |reason: &str| SignalError::InvalidSignal {
            name: name.clone(),
            reason: reason.to_string(),
        };
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid("sample period must be positive"));
        }
        if values.is_empty() {
            return Err(invalid("no samples"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite sample"));
        }
        Ok(Signal { name, t0, dt, values })
    }

    pub fn duration(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    /// Sample closest to time `t`.
    pub fn at(&self, t: f64) -> f64 {
        let k = ((t - self.t0) / self.dt).round().max(0.0) as usize;
        self.values[k.min(self.values.len() - 1)]
    }
}

/// A set of signals sharing one time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    signals: BTreeMap<String, Signal>,
    dt: f64,
    t0: f64,
}

impl Trace {
    pub fn new(signals: Vec<Signal>) -> Result<Self, SignalError> {
        let first = signals.first().ok_or(SignalError::InvalidSignal {
            name: String::new(),
            reason: "empty trace".into(),
        })?;
        let (dt, t0) = (first.dt, first.t0);
        if signals
            .iter()
            .any(|s| (s.dt - dt).abs() > 1e-12 * dt || (s.t0 - t0).abs() > 1e-12)
        {
            return Err(SignalError::MixedPeriods);
        }
        Ok(Trace {
            signals: signals.into_iter().map(|s| (s.name.clone(), s)).collect(),
            dt,
            t0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn get(&self, name: &str) -> Result<&Signal, SignalError> {
        self.signals
            .get(name)
            .ok_or_else(|| SignalError::UnknownSignal(name.to_string()))
    }

    pub fn signals(&self) -> impl Iterator<Item = &Signal> {
        self.signals.values()
    }

    /// Number of samples common to every signal.
    pub fn len(&self) -> usize {
        self.signals.values().map(|s| s.values.len()).min().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// CSV with a `time` column followed by one column per signal.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for name in self.signals.keys() {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for k in 0..self.len() {
            out.push_str(&format!("{}", self.t0 + k as f64 * self.dt));
            for s in self.signals.values() {
                out.push_str(&format!(",{}", s.values[k]));
            }
            out.push('\n');
        }
        out
    }
}

/// Layout of a piecewise-constant input signal with `segments` equal pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSpec {
    pub name: String,
    pub segments: usize,
    pub piece_duration: f64,
    pub range: (f64, f64),
}

impl PiecewiseSpec {
    pub fn new(
        name: impl Into<String>,
        segments: usize,
        piece_duration: f64,
        range: (f64, f64),
    ) -> Result<Self, SignalError> {
        let name = name.into();
        if segments == 0 || !(piece_duration > 0.0) {
            return Err(SignalError::InvalidSignal {
                name,
                reason: "need at least one segment of positive duration".into(),
            });
        }
        check_range(range.0, range.1)?;
        Ok(PiecewiseSpec { name, segments, piece_duration, range })
    }

    pub fn duration(&self) -> f64 {
        self.segments as f64 * self.piece_duration
    }
}

fn check_range(a: f64, b: f64) -> Result<(), SignalError> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(SignalError::BadRange { lo: a, hi: b });
    }
    Ok(())
}

/// Maps `x` in `[a, b]` linearly onto `[-1, 1]` via `(-2x + a + b) / (a - b)`.
pub fn normalize(x: f64, a: f64, b: f64) -> Result<f64, SignalError> {
    check_range(a, b)?;
    if !(a..=b).contains(&x) {
        return Err(SignalError::OutOfRange { value: x, lo: a, hi: b });
    }
    Ok((-2.0 * x + a + b) / (a - b))
}

/// Inverse of [`normalize`].
pub fn denormalize(y: f64, a: f64, b: f64) -> Result<f64, SignalError> {
    check_range(a, b)?;
    if !(-1.0..=1.0).contains(&y) {
        return Err(SignalError::OutOfRange { value: y, lo: -1.0, hi: 1.0 });
    }
    Ok((a + b - y * (a - b)) / 2.0)
}

/// Samples the piecewise-constant signal described by normalized `coords`
/// at [`SAMPLE_PERIOD`]. A sample on a segment boundary belongs to the later
/// segment; the final sample at `t = duration` belongs to the last one.
pub fn build_signal(spec: &PiecewiseSpec, coords: &[f64]) -> Result<Signal, SignalError> {
    if coords.len() != spec.segments {
        return Err(SignalError::Dimension {
            expected: spec.segments,
            got: coords.len(),
        });
    }
    let levels = coords
        .iter()
        .map(|&c| denormalize(c, spec.range.0, spec.range.1))
        .collect::<Result<Vec<_>, _>>()?;
    let steps = (spec.duration() / SAMPLE_PERIOD).round() as usize;
    let values = (0..=steps)
        .map(|k| levels[segment_of(k, SAMPLE_PERIOD, spec.piece_duration, spec.segments)])
        .collect();
    Signal::new(spec.name.clone(), 0.0, SAMPLE_PERIOD, values)
}

/// Index of the segment governing sample `k`.
pub(crate) fn segment_of(k: usize, dt: f64, piece: f64, segments: usize) -> usize {
    // The tolerance keeps exact boundaries (k * dt == i * piece up to rounding) in the later piece.
    let pos = k as f64 * dt / piece;
    ((pos + 1e-9).floor() as usize).min(segments - 1)
}
