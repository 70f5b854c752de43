//! Range-based upper bound on robustness and the scaled robustness in [0, 1].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::formula::{Expr, Formula};
use super::{robustness, SignalError, Trace};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    fn add(self, o: Interval) -> Self {
        Interval::new(self.lo + o.lo, self.hi + o.hi)
    }

    fn neg(self) -> Self {
        Interval::new(-self.hi, -self.lo)
    }

    fn scale(self, c: f64) -> Self {
        let (a, b) = (c * self.lo, c * self.hi);
        Interval::new(a.min(b), a.max(b))
    }

    fn abs(self) -> Self {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            self.neg()
        } else {
            Interval::new(0.0, (-self.lo).max(self.hi))
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Attainable value interval per signal name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SignalRanges(pub BTreeMap<String, Interval>);

impl SignalRanges {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, lo: f64, hi: f64) -> Self {
        self.0.insert(name.to_string(), Interval::new(lo, hi));
        self
    }

    pub fn get(&self, name: &str) -> Result<Interval, SignalError> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| SignalError::MissingRange(name.to_string()))
    }
}

fn expr_interval(expr: &Expr, ranges: &SignalRanges) -> Result<Interval, SignalError> {
    Ok(match expr {
        Expr::Signal(n) => ranges.get(n)?,
        Expr::Const(c) => Interval::point(*c),
        Expr::Add(a, b) => expr_interval(a, ranges)?.add(expr_interval(b, ranges)?),
        Expr::Sub(a, b) => expr_interval(a, ranges)?.add(expr_interval(b, ranges)?.neg()),
        Expr::Scale(c, e) => expr_interval(e, ranges)?.scale(*c),
        Expr::Abs(e) => expr_interval(e, ranges)?.abs(),
    })
}

/// Interval containing every attainable robustness value of `phi`.
pub(crate) fn robustness_interval(phi: &Formula, ranges: &SignalRanges) -> Result<Interval, SignalError> {
    Ok(match phi {
        Formula::Pred { expr, cmp, threshold } => {
            let e = expr_interval(expr, ranges)?;
            let a = Formula::margin(e.lo, *cmp, *threshold);
            let b = Formula::margin(e.hi, *cmp, *threshold);
            Interval::new(a.min(b), a.max(b))
        }
        Formula::Not(f) => robustness_interval(f, ranges)?.neg(),
        Formula::And(a, b) => {
            let (x, y) = (robustness_interval(a, ranges)?, robustness_interval(b, ranges)?);
            Interval::new(x.lo.min(y.lo), x.hi.min(y.hi))
        }
        Formula::Or(a, b) => {
            let (x, y) = (robustness_interval(a, ranges)?, robustness_interval(b, ranges)?);
            Interval::new(x.lo.max(y.lo), x.hi.max(y.hi))
        }
        Formula::Implies(a, b) => {
            let (x, y) = (robustness_interval(a, ranges)?.neg(), robustness_interval(b, ranges)?);
            Interval::new(x.lo.max(y.lo), x.hi.max(y.hi))
        }
        Formula::Always { body, .. } | Formula::Eventually { body, .. } => robustness_interval(body, ranges)?,
    })
}

/// Upper bound `K` on the robustness of `phi` over all traces within `ranges`.
/// Formulas that can never be satisfied with margin get `K = 1`.
pub fn effective_range_bound(phi: &Formula, ranges: &SignalRanges) -> Result<f64, SignalError> {
    let hi = robustness_interval(phi, ranges)?.hi;
    Ok(if hi <= 0.0 { 1.0 } else { hi })
}

/// Robustness at `t = 0` mapped into `[0, 1]`: zero when falsified (`rho <= 0`),
/// otherwise `rho / K`. Returns `(rho, rho_bar)`.
pub fn scaled_robustness(phi: &Formula, trace: &Trace, ranges: &SignalRanges) -> Result<(f64, f64), SignalError> {
    let k = effective_range_bound(phi, ranges)?;
    let rho = robustness(phi, trace, trace.t0())?;
    Ok((rho, scale(rho, k)))
}

pub(crate) fn scale(rho: f64, k: f64) -> f64 {
    if rho <= 0.0 {
        0.0
    } else {
        (rho / k).min(1.0)
    }
}
