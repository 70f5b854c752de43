use super::{check_dim, InputLayout, Sut, SutError};
use crate::signals::{build_signal, PiecewiseSpec, Signal, SignalRanges, Trace, SAMPLE_PERIOD};

const DAMPING: f64 = 0.2;
const SEGMENTS: usize = 6;
const PIECE: f64 = 5.0;
const BOUND: f64 = 6.0;
/// Amplitude threshold of the default requirement.
pub const AMPLITUDE_LIMIT: f64 = 2.8;

/// Damped oscillator `x'' = -0.2 x' - x + u` driven by a piecewise-constant
/// force `u` in `[-1, 1]` over six 5 s pieces, integrated with RK4 from rest.
#[derive(Debug, Clone)]
pub struct Oscillator {
    inputs: InputLayout,
    outputs: SignalRanges,
}

impl Default for Oscillator {
    fn default() -> Self {
        Self::new()
    }
}

impl Oscillator {
    pub fn new() -> Self {
        let u = PiecewiseSpec::new("u", SEGMENTS, PIECE, (-1.0, 1.0)).expect("constant layout");
        Oscillator {
            inputs: InputLayout::Signals(vec![u]),
            outputs: SignalRanges::new().with("x", -BOUND, BOUND).with("xdot", -BOUND, BOUND),
        }
    }

    /// States `(x, x')` every `dt` under zero-order hold of `u` sampled at `SAMPLE_PERIOD`.
    pub fn integrate(&self, test: &[f64], dt: f64) -> Result<Vec<(f64, f64)>, SutError> {
        check_dim(SEGMENTS, test)?;
        let InputLayout::Signals(specs) = &self.inputs else { unreachable!() };
        let u = build_signal(&specs[0], test)?;
        let steps = (specs[0].duration() / dt).round() as usize;
        let per_sample = SAMPLE_PERIOD / dt;
        let mut s = (0.0, 0.0);
        let mut out = Vec::with_capacity(steps + 1);
        out.push(s);
        for k in 0..steps {
            let j = ((k as f64 + 0.5) / per_sample).floor() as usize;
            s = rk4(s, u.values[j.min(u.values.len() - 1)], dt);
            if !(s.0.is_finite() && s.1.is_finite()) {
                return Err(SutError::Diverged((k + 1) as f64 * dt));
            }
            out.push(s);
        }
        Ok(out)
    }
}

fn field((x, v): (f64, f64), u: f64) -> (f64, f64) {
    (v, -DAMPING * v - x + u)
}

fn rk4(s: (f64, f64), u: f64, h: f64) -> (f64, f64) {
    let k1 = field(s, u);
    let k2 = field((s.0 + 0.5 * h * k1.0, s.1 + 0.5 * h * k1.1), u);
    let k3 = field((s.0 + 0.5 * h * k2.0, s.1 + 0.5 * h * k2.1), u);
    let k4 = field((s.0 + h * k3.0, s.1 + h * k3.1), u);
    (
        s.0 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        s.1 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

impl Sut for Oscillator {
    fn name(&self) -> &str {
        "oscillator"
    }

    fn inputs(&self) -> &InputLayout {
        &self.inputs
    }

    fn outputs(&self) -> &SignalRanges {
        &self.outputs
    }

    fn simulate(&self, test: &[f64]) -> Result<Trace, SutError> {
        let states = self.integrate(test, SAMPLE_PERIOD)?;
        let (x, v): (Vec<f64>, Vec<f64>) = states.into_iter().unzip();
        Ok(Trace::new(vec![
            Signal::new("x", 0.0, SAMPLE_PERIOD, x)?,
            Signal::new("xdot", 0.0, SAMPLE_PERIOD, v)?,
        ])?)
    }

    fn default_requirement(&self) -> String {
        format!("always[0,30] (abs(x) < {AMPLITUDE_LIMIT})")
    }
}
