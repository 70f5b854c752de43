//! Quantitative (robustness) semantics on the sample grid.

use std::collections::VecDeque;

use super::formula::{Expr, Formula};
use super::{SignalError, Trace};

/// Robustness of `phi` on `trace` at time `t` (seconds from the trace start).
///
/// Temporal bounds snap to the nearest sample index.
pub fn robustness(phi: &Formula, trace: &Trace, t: f64) -> Result<f64, SignalError> {
    let start = ((t - trace.t0()) / trace.dt()).round().max(0.0) as usize;
    robustness_at(phi, trace, start)
}

/// Robustness at sample index `start`.
pub fn robustness_at(phi: &Formula, trace: &Trace, start: usize) -> Result<f64, SignalError> {
    let needed = start + steps(phi, trace.dt()) + 1;
    if needed > trace.len() {
        return Err(SignalError::InsufficientTrace {
            needed,
            available: trace.len(),
        });
    }
    let series = eval(phi, trace, needed)?;
    Ok(series[start])
}

fn snap(t: f64, dt: f64) -> usize {
    (t / dt).round() as usize
}

/// Look-ahead in samples.
fn steps(phi: &Formula, dt: f64) -> usize {
    match phi {
        Formula::Pred { .. } => 0,
        Formula::Not(f) => steps(f, dt),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => steps(a, dt).max(steps(b, dt)),
        Formula::Always { hi, body, .. } | Formula::Eventually { hi, body, .. } => snap(*hi, dt) + steps(body, dt),
    }
}

/// Robustness series for the first `len - steps(phi)` sample indices, using
/// only the first `len` samples of the trace.
fn eval(phi: &Formula, trace: &Trace, len: usize) -> Result<Vec<f64>, SignalError> {
    let dt = trace.dt();
    let out_len = len - steps(phi, dt);
    Ok(match phi {
        Formula::Pred { expr, cmp, threshold } => {
            let values = expr_series(expr, trace, out_len)?;
            values
                .into_iter()
                .map(|v| Formula::margin(v, *cmp, *threshold))
                .collect()
        }
        Formula::Not(f) => eval(f, trace, len)?.into_iter().map(|r| -r).collect(),
        Formula::And(a, b) => zip(eval(a, trace, len)?, eval(b, trace, len)?, out_len, f64::min),
        Formula::Or(a, b) => zip(eval(a, trace, len)?, eval(b, trace, len)?, out_len, f64::max),
        Formula::Implies(a, b) => zip(eval(a, trace, len)?, eval(b, trace, len)?, out_len, |x, y| (-x).max(y)),
        Formula::Always { lo, hi, body } => {
            let inner = eval(body, trace, len)?;
            sliding(&inner, snap(*lo, dt), snap(*hi, dt), out_len, true)
        }
        Formula::Eventually { lo, hi, body } => {
            let inner = eval(body, trace, len)?;
            sliding(&inner, snap(*lo, dt), snap(*hi, dt), out_len, false)
        }
    })
}

fn zip(a: Vec<f64>, b: Vec<f64>, n: usize, op: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.into_iter().zip(b).take(n).map(|(x, y)| op(x, y)).collect()
}

fn expr_series(expr: &Expr, trace: &Trace, n: usize) -> Result<Vec<f64>, SignalError> {
    // Resolve every referenced signal up front so unknown names fail fast.
    let mut set = std::collections::BTreeSet::new();
    expr.collect_signals(&mut set);
    let signals = set
        .into_iter()
        .map(|name| trace.get(name).map(|s| (name, s)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((0..n)
        .map(|k| {
            expr.eval(&|name: &str| {
                signals
                    .iter()
                    .find(|(n, _)| *n == name)
                    .map(|(_, s)| s.values[k])
                    .unwrap_or(f64::NAN)
            })
        })
        .collect())
}

/// `out[k] = min/max(inner[k + lo ..= k + hi])` via a monotone deque.
fn sliding(inner: &[f64], lo: usize, hi: usize, out_len: usize, take_min: bool) -> Vec<f64> {
    let better = |a: f64, b: f64| if take_min { a <= b } else { a >= b };
    let mut out = Vec::with_capacity(out_len);
    let mut window: VecDeque<usize> = VecDeque::new();
    let mut next = lo;
    for k in 0..out_len {
        while next <= k + hi {
            while let Some(&back) = window.back() {
                if better(inner[next], inner[back]) {
                    window.pop_back();
                } else {
                    break;
                }
            }
            window.push_back(next);
            next += 1;
        }
        while let Some(&front) = window.front() {
            if front < k + lo {
                window.pop_front();
            } else {
                break;
            }
        }
        out.push(inner[*window.front().expect("window never empty")]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{parse, Signal};

    fn trace1(name: &str, dt: f64, values: Vec<f64>) -> Trace {
        Trace::new(vec![Signal::new(name, 0.0, dt, values).unwrap()]).unwrap()
    }

    #[test]
    fn constant_margin() {
        let phi = parse("always[0,30] (v < 120)").unwrap();
        let tr = trace1("v", 0.01, vec![100.0; 3001]);
        assert_eq!(robustness(&phi, &tr, 0.0).unwrap(), 20.0);
    }

    #[test]
    fn eventually_three_samples() {
        let phi = parse("eventually[0,2] (v > 0)").unwrap();
        let tr = trace1("v", 1.0, vec![-1.0, 5.0, 5.0]);
        assert_eq!(robustness(&phi, &tr, 0.0).unwrap(), 5.0);
    }

    #[test]
    fn insufficient_trace_and_unknown_signal() {
        let phi = parse("always[0,30] (v < 120)").unwrap();
        let tr = trace1("v", 0.01, vec![0.0; 100]);
        assert!(matches!(
            robustness(&phi, &tr, 0.0),
            Err(SignalError::InsufficientTrace { needed: 3001, available: 100 })
        ));
        let phi = parse("always[0,0.5] (w < 1)").unwrap();
        assert_eq!(
            robustness(&phi, &tr, 0.0).unwrap_err(),
            SignalError::UnknownSignal("w".into())
        );
    }

    #[test]
    fn implication_and_negation() {
        let tr = Trace::new(vec![
            Signal::new("a", 0.0, 1.0, vec![1.0, 2.0]).unwrap(),
            Signal::new("b", 0.0, 1.0, vec![-3.0, 4.0]).unwrap(),
        ])
        .unwrap();
        // max(-(a - 0), b - 0) at t = 0 -> max(-1, -3) = -1
        assert_eq!(robustness(&parse("a > 0 -> b > 0").unwrap(), &tr, 0.0).unwrap(), -1.0);
        assert_eq!(robustness(&parse("not (a > 0)").unwrap(), &tr, 1.0).unwrap(), -2.0);
    }

    #[test]
    fn bounds_snap_to_nearest_sample() {
        // [0.004, 0.016] at dt 0.01 snaps to indices 0..=2
        let tr = trace1("v", 0.01, vec![5.0, 4.0, 3.0, 1.0]);
        let phi = parse("always[0.004,0.016] (v > 0)").unwrap();
        assert_eq!(robustness(&phi, &tr, 0.0).unwrap(), 3.0);
        let phi = parse("always[0.006,0.014] (v > 0)").unwrap();
        assert_eq!(robustness(&phi, &tr, 0.0).unwrap(), 4.0);
    }

    #[test]
    fn sliding_matches_naive() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(3);
        for _ in 0..200 {
            let n = rng.gen_range(5..60);
            let inner: Vec<f64> = (0..n).map(|_| rng.gen_range(-5..5) as f64).collect();
            let lo = rng.gen_range(0..4);
            let hi = lo + rng.gen_range(0..n - lo - 1);
            let out_len = n - hi;
            for take_min in [true, false] {
                let got = sliding(&inner, lo, hi, out_len, take_min);
                for k in 0..out_len {
                    let w = &inner[k + lo..=k + hi];
                    let expect = if take_min {
                        w.iter().cloned().fold(f64::INFINITY, f64::min)
                    } else {
                        w.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    };
                    assert_eq!(got[k], expect);
                }
            }
        }
    }
}
