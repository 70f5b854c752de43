use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::{batch_tensor, ModelError, TrainHyper, HIDDEN, LEAK};
use crate::neural::{Activation, Graph, InputShape, Layer, Mode, Network, NetworkSpec, Tensor, Var};
use crate::rng::Rng;
use crate::Test;

const LABEL_CLAMP: f64 = 1e-6;

/// Regression model estimating scaled robustness in `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerModel {
    pub net: Network,
}

impl AnalyzerModel {
    /// Convolutional analyzer for tests made of `channels` piecewise-constant
    /// signals with `length` segments each (channel-major coordinates).
    pub fn for_signals(channels: usize, length: usize, rng: &mut Rng) -> Result<Self, ModelError> {
        let block = [
            Layer::Conv1d {
                maps: 16,
                kernel: 2,
                stride: 1,
                padding: 1,
            },
            Layer::Activation(Activation::LeakyRelu(LEAK)),
            Layer::MaxPool { window: 2, stride: 2 },
        ];
        let mut layers = block.to_vec();
        layers.extend(block);
        layers.extend([
            Layer::Flatten,
            Layer::Dense { out: HIDDEN },
            Layer::Dense { out: 1 },
            Layer::Activation(Activation::Sigmoid),
        ]);
        let spec = NetworkSpec {
            input: InputShape::Sequence { channels, length },
            layers,
        };
        Ok(AnalyzerModel {
            net: Network::new(spec, rng)?,
        })
    }

    /// Fully connected analyzer for plain vector tests.
    pub fn for_vectors(dim: usize, rng: &mut Rng) -> Result<Self, ModelError> {
        let spec = NetworkSpec {
            input: InputShape::Vector(dim),
            layers: vec![
                Layer::Dense { out: HIDDEN },
                Layer::Activation(Activation::LeakyRelu(LEAK)),
                Layer::Dense { out: HIDDEN },
                Layer::Activation(Activation::LeakyRelu(LEAK)),
                Layer::Dense { out: 1 },
                Layer::Activation(Activation::Sigmoid),
            ],
        };
        Ok(AnalyzerModel {
            net: Network::new(spec, rng)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.net.spec.input.width()
    }
}

/// `logit(0.98 x + 0.01)`.
fn squash(x: f64) -> f64 {
    let p = 0.98 * x + 0.01;
    (p / (1.0 - p)).ln()
}

fn clamp_label(y: f64) -> f64 {
    y.clamp(LABEL_CLAMP, 1.0 - LABEL_CLAMP)
}

/// `(F(yhat) - F(y))^2 + lambda * F(1/2 - (yhat - y)/2)^2` with `F(x) = logit(0.98x + 0.01)`.
pub fn analyzer_loss(yhat: f64, y: f64, lambda: f64) -> Result<f64, ModelError> {
    if !(yhat > 0.0 && yhat < 1.0) || !(0.0..=1.0).contains(&y) {
        return Err(ModelError::Domain(format!("estimate {yhat} must lie in (0,1), label {y} in [0,1]")));
    }
    let y = clamp_label(y);
    let a = squash(yhat) - squash(y);
    let b = squash(0.5 - (yhat - y) / 2.0);
    Ok(a * a + lambda * b * b)
}

/// Graph form of `F(x)` for a column of estimates.
fn squash_var(g: &mut Graph, x: Var) -> Result<Var, ModelError> {
    let p = g.scale(x, 0.98)?;
    let p = g.add_scalar(p, 0.01)?;
    let q = g.scale(p, -1.0)?;
    let q = g.add_scalar(q, 1.0)?;
    let lp = g.ln(p)?;
    let lq = g.ln(q)?;
    Ok(g.sub(lp, lq)?)
}

fn mean_loss(g: &mut Graph, yhat: Var, labels: &[f64], lambda: f64) -> Result<Var, ModelError> {
    let n = labels.len();
    let target: Vec<f64> = labels.iter().map(|&y| squash(y)).collect();
    let target = g.constant(&Tensor::matrix(n, 1, target)?)?;
    let f = squash_var(g, yhat)?;
    let d = g.sub(f, target)?;
    let first = g.mul(d, d)?;
    // 1/2 - (yhat - y)/2 = -yhat/2 + (1 + y)/2
    let shift: Rc<[f64]> = labels.iter().map(|&y| (1.0 + y) / 2.0).collect();
    let shift = g.constant(&Tensor::matrix(n, 1, shift.to_vec())?)?;
    let half = g.scale(yhat, -0.5)?;
    let inner = g.add(half, shift)?;
    let s = squash_var(g, inner)?;
    let second = g.mul(s, s)?;
    let second = g.scale(second, lambda)?;
    let total = g.add(first, second)?;
    Ok(g.mean(total)?)
}

/// `analyzer_epochs` full-batch gradient steps on `records` of `(test, rho_bar)`.
/// Returns the mean loss before each step.
pub fn analyzer_train(
    analyzer: &mut AnalyzerModel,
    records: &[(Test, f64)],
    hyper: &TrainHyper,
) -> Result<Vec<f64>, ModelError> {
    if records.is_empty() {
        return Err(ModelError::EmptyRepository);
    }
    if let Some((_, y)) = records.iter().find(|(_, y)| !(0.0..=1.0).contains(y)) {
        return Err(ModelError::Domain(format!("label {y} outside [0,1]")));
    }
    let tests: Vec<Test> = records.iter().map(|(t, _)| t.clone()).collect();
    let x = batch_tensor(&tests)?;
    let labels: Vec<f64> = records.iter().map(|(_, y)| clamp_label(*y)).collect();
    let adam = hyper.adam();
    let mut losses = Vec::with_capacity(hyper.analyzer_epochs);
    for _ in 0..hyper.analyzer_epochs {
        let mut g = Graph::new();
        let vars = analyzer.net.bind(&mut g, true)?;
        let xv = g.constant(&x)?;
        let yhat = analyzer.net.forward(&mut g, &vars, xv, Mode::Train)?.output;
        let loss = mean_loss(&mut g, yhat, &labels, hyper.analyzer_lambda)?;
        losses.push(g.scalar(loss));
        let grads = Network::gradients(&mut g, loss, &vars)?;
        adam.step(&mut analyzer.net.params, &grads)?;
    }
    Ok(losses)
}

pub fn analyzer_estimate(analyzer: &AnalyzerModel, test: &[f64]) -> Result<f64, ModelError> {
    Ok(analyzer_estimate_batch(analyzer, &[test.to_vec()])?[0])
}

pub fn analyzer_estimate_batch(analyzer: &AnalyzerModel, tests: &[Test]) -> Result<Vec<f64>, ModelError> {
    Ok(analyzer.net.predict(&batch_tensor(tests)?, Mode::Eval)?.data)
}
