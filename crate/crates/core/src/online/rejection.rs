use rand::Rng as _;

use super::WoganError;
use crate::models::{analyzer_estimate, AnalyzerModel};
use crate::rng::Rng;
use crate::suts::Objective;
use crate::Test;

/// Slack on the acceptance test that bounds the number of draws.
pub const REJECTION_EPSILON: f64 = 1e-4;

/// Robustness estimate of a candidate test.
pub trait Estimator {
    fn estimate(&mut self, test: &[f64]) -> Result<f64, WoganError>;
}

/// Trained analyzer network.
pub struct AnalyzerEstimator<'a>(pub &'a AnalyzerModel);

impl Estimator for AnalyzerEstimator<'_> {
    fn estimate(&mut self, test: &[f64]) -> Result<f64, WoganError> {
        Ok(analyzer_estimate(self.0, test)?)
    }
}

/// Same value for every test.
pub struct ConstantEstimator(pub f64);

impl Estimator for ConstantEstimator {
    fn estimate(&mut self, _test: &[f64]) -> Result<f64, WoganError> {
        Ok(self.0)
    }
}

/// Uniform draw from `[0, 1)` per test.
pub struct RandomEstimator(pub Rng);

impl Estimator for RandomEstimator {
    fn estimate(&mut self, _test: &[f64]) -> Result<f64, WoganError> {
        Ok(self.0.gen())
    }
}

/// Exact robustness from the SUT; these executions bypass the budget counter.
pub struct PerfectEstimator<'a>(pub &'a Objective);

impl Estimator for PerfectEstimator<'_> {
    fn estimate(&mut self, test: &[f64]) -> Result<f64, WoganError> {
        Ok(self.0.peek(test)?.rho_bar)
    }
}

/// Result of one rejection-sampling call.
#[derive(Debug, Clone, PartialEq)]
pub struct Accepted {
    pub test: Test,
    pub estimate: f64,
    pub draws: usize,
}

/// Draws candidates until the best estimate so far, less `REJECTION_EPSILON`,
/// is at most a threshold that starts at 0 and moves as `t <- 1 - alpha (1 - t)`.
///
/// Only the running minimum is kept; earlier estimates never resurface, so a
/// priority queue is unnecessary. Ties keep the earlier candidate.
pub fn rejection_sample(
    mut candidate: impl FnMut() -> Result<Test, WoganError>,
    estimator: &mut dyn Estimator,
    alpha: f64,
) -> Result<Accepted, WoganError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(WoganError::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut threshold = 0.0;
    let mut best: Option<(Test, f64)> = None;
    let mut draws = 0;
    loop {
        let test = candidate()?;
        let e = estimator.estimate(&test)?;
        draws += 1;
        if best.as_ref().is_none_or(|(_, b)| e < *b) {
            best = Some((test, e));
        }
        threshold = 1.0 - alpha * (1.0 - threshold);
        let (_, min) = best.as_ref().expect("set on first draw");
        if min - REJECTION_EPSILON <= threshold {
            let (test, estimate) = best.expect("set on first draw");
            return Ok(Accepted { test, estimate, draws });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn counter() -> impl FnMut() -> Result<Test, WoganError> {
        let mut k = 0.0;
        move || {
            k += 1.0;
            Ok(vec![k])
        }
    }

    #[test]
    fn constant_one_needs_180_draws() {
        let a = rejection_sample(counter(), &mut ConstantEstimator(1.0), 0.95).unwrap();
        let k = (REJECTION_EPSILON.ln() / 0.95f64.ln()).ceil() as usize;
        assert_eq!((a.draws, k), (180, 180));
        assert_eq!(a.test, vec![1.0]);
    }

    #[test]
    fn constant_zero_accepts_immediately() {
        let a = rejection_sample(counter(), &mut ConstantEstimator(0.0), 0.95).unwrap();
        assert_eq!((a.draws, a.test), (1, vec![1.0]));
    }

    #[test]
    fn returns_the_minimum_estimate() {
        struct Coord;
        impl Estimator for Coord {
            fn estimate(&mut self, t: &[f64]) -> Result<f64, WoganError> {
                Ok((t[0] + 1.0) / 2.0)
            }
        }
        let mut rng = seeded(2);
        for _ in 0..200 {
            let mut seen = Vec::new();
            let a = rejection_sample(
                || {
                    let t = vec![rng.gen_range(-1.0..=1.0)];
                    seen.push(t[0]);
                    Ok(t)
                },
                &mut Coord,
                0.95,
            )
            .unwrap();
            let min = seen.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(a.test[0], min);
            assert_eq!(a.draws, seen.len());
        }
    }

    #[test]
    fn draws_bounded_for_any_unit_range_estimator() {
        let mut rng = seeded(3);
        for _ in 0..500 {
            let a = rejection_sample(counter(), &mut RandomEstimator(seeded(rng.gen())), 0.95).unwrap();
            assert!(a.draws <= 181);
        }
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(rejection_sample(counter(), &mut ConstantEstimator(0.0), 1.0).is_err());
    }
}
