//! Systems under test: deterministic maps from normalized tests to traces.

mod multimodal;
mod oscillator;
mod road;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neural::InputShape;
use crate::signals::{
    denormalize, effective_range_bound, parse, scaled_robustness, Formula, PiecewiseSpec, SignalError, SignalRanges,
    Trace,
};
pub use multimodal::{Multimodal, MULTIMODAL_CENTERS, MULTIMODAL_FALSIFYING_FRACTION};
pub use oscillator::{Oscillator, AMPLITUDE_LIMIT};
pub use road::{
    curvature_to_road, path_length_constant, road_is_valid, segments_intersect, PathFollow, Road, DISTANCE_LIMIT,
    MAX_CURVATURE, SEGMENT_LENGTH, START,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SutError {
    #[error("test has {got} coordinates, the system takes {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid test: {0}")]
    InvalidTest(String),
    #[error("simulation diverged at t = {0}")]
    Diverged(f64),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("unknown system `{0}`")]
    Unknown(String),
    #[error("bad requirement: {0}")]
    Requirement(String),
}

/// How normalized test coordinates map onto system inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InputLayout {
    /// Concatenated segment levels of each piecewise-constant signal.
    Signals(Vec<PiecewiseSpec>),
    /// One coordinate per scalar parameter with its raw range.
    Vector(Vec<(f64, f64)>),
}

impl InputLayout {
    pub fn dim(&self) -> usize {
        match self {
            InputLayout::Signals(s) => s.iter().map(|p| p.segments).sum(),
            InputLayout::Vector(r) => r.len(),
        }
    }

    /// Layout the analyzer should see.
    pub fn analyzer_shape(&self) -> InputShape {
        match self {
            InputLayout::Signals(s) if !s.is_empty() && s.iter().all(|p| p.segments == s[0].segments) => {
                InputShape::Sequence {
                    channels: s.len(),
                    length: s[0].segments,
                }
            }
            _ => InputShape::Vector(self.dim()),
        }
    }

    /// Raw parameter values of a vector test.
    pub fn raw(&self, test: &[f64]) -> Result<Vec<f64>, SutError> {
        check_dim(self.dim(), test)?;
        match self {
            InputLayout::Vector(ranges) => test
                .iter()
                .zip(ranges)
                .map(|(&y, &(a, b))| Ok(denormalize(y, a, b)?))
                .collect(),
            InputLayout::Signals(_) => Err(SutError::InvalidTest("signal inputs have no raw vector form".into())),
        }
    }
}

pub(crate) fn check_dim(expected: usize, test: &[f64]) -> Result<(), SutError> {
    if test.len() != expected {
        return Err(SutError::Dimension {
            expected,
            got: test.len(),
        });
    }
    if let Some(v) = test.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        return Err(SutError::InvalidTest(format!("coordinate {v} outside [-1, 1]")));
    }
    Ok(())
}

/// A deterministic black-box system.
pub trait Sut: Send + Sync {
    fn name(&self) -> &str;
    fn inputs(&self) -> &InputLayout;
    /// Declared attainable range of every output signal.
    fn outputs(&self) -> &SignalRanges;
    fn simulate(&self, test: &[f64]) -> Result<Trace, SutError>;
    fn default_requirement(&self) -> String;

    fn dim(&self) -> usize {
        self.inputs().dim()
    }

    fn has_validity(&self) -> bool {
        false
    }

    fn is_valid(&self, _test: &[f64]) -> bool {
        true
    }
}

/// One SUT execution.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub trace: Trace,
    pub rho: f64,
    pub rho_bar: f64,
}

/// Simulates `test` and scores the trace at `t = 0`.
pub fn execute(sut: &dyn Sut, phi: &Formula, ranges: &SignalRanges, test: &[f64]) -> Result<Execution, SutError> {
    check_dim(sut.dim(), test)?;
    if sut.has_validity() && !sut.is_valid(test) {
        return Err(SutError::InvalidTest("validity predicate rejects the test".into()));
    }
    let trace = sut.simulate(test)?;
    for s in trace.signals() {
        if let Ok(r) = ranges.get(&s.name) {
            if let Some(v) = s.values.iter().find(|v| !r.contains(**v)) {
                log::warn!("{}: output `{}` = {v} outside declared [{}, {}]", sut.name(), s.name, r.lo, r.hi);
            }
        }
    }
    let (rho, rho_bar) = scaled_robustness(phi, &trace, ranges)?;
    Ok(Execution { trace, rho, rho_bar })
}

/// A SUT paired with a requirement; counts executions.
pub struct Objective {
    pub sut: Box<dyn Sut>,
    pub phi: Formula,
    pub ranges: SignalRanges,
    /// Upper bound used to scale robustness.
    pub bound: f64,
    executions: AtomicU64,
}

impl Objective {
    pub fn new(sut: Box<dyn Sut>, requirement: &str) -> Result<Self, SutError> {
        let phi = parse(requirement).map_err(|e| SutError::Requirement(e.to_string()))?;
        let ranges = sut.outputs().clone();
        let bound = effective_range_bound(&phi, &ranges)?;
        Ok(Objective {
            sut,
            phi,
            ranges,
            bound,
            executions: AtomicU64::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.sut.dim()
    }

    pub fn execute(&self, test: &[f64]) -> Result<Execution, SutError> {
        self.executions.fetch_add(1, Ordering::Relaxed);
        execute(self.sut.as_ref(), &self.phi, &self.ranges, test)
    }

    /// Executes without touching the budget counter.
    pub fn peek(&self, test: &[f64]) -> Result<Execution, SutError> {
        execute(self.sut.as_ref(), &self.phi, &self.ranges, test)
    }

    pub fn rho_bar(&self, test: &[f64]) -> Result<f64, SutError> {
        Ok(self.execute(test)?.rho_bar)
    }

    pub fn executions(&self) -> u64 {
        self.executions.load(Ordering::Relaxed)
    }

    pub fn is_valid(&self, test: &[f64]) -> bool {
        !self.sut.has_validity() || self.sut.is_valid(test)
    }
}

/// Registry entry for the built-in systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum SutConfig {
    Oscillator {},
    Multimodal {},
    Pathfollow { segments: usize },
}

impl SutConfig {
    pub fn build(&self) -> Result<Box<dyn Sut>, SutError> {
        Ok(match self {
            SutConfig::Oscillator {} => Box::new(Oscillator::new()),
            SutConfig::Multimodal {} => Box::new(Multimodal::new()),
            SutConfig::Pathfollow { segments } => Box::new(PathFollow::new(*segments)?),
        })
    }

    /// Looks a system up by name; `pathfollow` takes `segments` (default 5).
    pub fn by_name(name: &str, segments: Option<usize>) -> Result<Self, SutError> {
        match name {
            "oscillator" => Ok(SutConfig::Oscillator {}),
            "multimodal" => Ok(SutConfig::Multimodal {}),
            "pathfollow" => Ok(SutConfig::Pathfollow {
                segments: segments.unwrap_or(5),
            }),
            other => Err(SutError::Unknown(other.to_string())),
        }
    }
}
