use super::{check_dim, InputLayout, Sut, SutError};
use crate::signals::{Signal, SignalRanges, Trace, SAMPLE_PERIOD};

const RADIUS: f64 = 0.6;
const HEIGHT: f64 = 1.0;
const BASELINE: f64 = 0.72;

/// Bump centers; pairwise farther apart than two radii.
pub const MULTIMODAL_CENTERS: [[f64; 3]; 3] = [[-0.5, -0.5, -0.5], [0.5, 0.5, -0.4], [-0.3, 0.5, 0.55]];

/// Volume fraction of `[-1, 1]^3` where the output is at most zero.
pub const MULTIMODAL_FALSIFYING_FRACTION: f64 = 0.0200019;

/// Three disjoint compact bumps below a constant baseline:
/// `g(x) = 0.72 - sum_k phi(|x - c_k| / 0.6)` with `phi(s) = (1 - s^2)^2` on `s < 1`.
/// The output `y` holds `g` constant over one second.
#[derive(Debug, Clone)]
pub struct Multimodal {
    inputs: InputLayout,
    outputs: SignalRanges,
}

impl Default for Multimodal {
    fn default() -> Self {
        Self::new()
    }
}

impl Multimodal {
    pub fn new() -> Self {
        Multimodal {
            inputs: InputLayout::Vector(vec![(-1.0, 1.0); 3]),
            outputs: SignalRanges::new().with("y", BASELINE - HEIGHT, BASELINE),
        }
    }

    pub fn value(x: &[f64]) -> f64 {
        let bumps: f64 = MULTIMODAL_CENTERS
            .iter()
            .map(|c| {
                let d2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                let s2 = d2 / (RADIUS * RADIUS);
                if s2 < 1.0 {
                    HEIGHT * (1.0 - s2) * (1.0 - s2)
                } else {
                    0.0
                }
            })
            .sum();
        BASELINE - bumps
    }

    /// Radius of each falsifying ball around a center.
    pub fn falsifying_radius() -> f64 {
        RADIUS * (1.0 - (BASELINE / HEIGHT).sqrt()).sqrt()
    }
}

impl Sut for Multimodal {
    fn name(&self) -> &str {
        "multimodal"
    }

    fn inputs(&self) -> &InputLayout {
        &self.inputs
    }

    fn outputs(&self) -> &SignalRanges {
        &self.outputs
    }

    fn simulate(&self, test: &[f64]) -> Result<Trace, SutError> {
        check_dim(3, test)?;
        let x = self.inputs.raw(test)?;
        let y = Self::value(&x);
        let n = (1.0 / SAMPLE_PERIOD).round() as usize + 1;
        Ok(Trace::new(vec![Signal::new("y", 0.0, SAMPLE_PERIOD, vec![y; n])?])?)
    }

    fn default_requirement(&self) -> String {
        "always[0,1] (y > 0)".into()
    }
}
