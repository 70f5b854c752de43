//! Generator, critic and analyzer networks with their training steps.

mod analyzer;
mod wgan;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neural::{Activation, Adam, InputShape, Layer, Mode, Network, NetworkSpec, NeuralError, Tensor};
use crate::rng::Rng;
use crate::Test;

pub use analyzer::{analyzer_estimate, analyzer_estimate_batch, analyzer_loss, analyzer_train, AnalyzerModel};
pub use wgan::{critic_objective, wgan_step, CriticObjective, WganDiagnostics};

const HIDDEN: usize = 128;
const LEAK: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("real batch has {0} rows; at least 2 required")]
    InsufficientBatch(usize),
    #[error("cannot train on an empty repository")]
    EmptyRepository,
    #[error("argument outside its domain: {0}")]
    Domain(String),
}

/// Training hyperparameters shared by the WGAN and the analyzer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainHyper {
    pub gp_lambda: f64,
    pub n_critic: usize,
    pub batch: usize,
    pub wgan_epochs: usize,
    pub analyzer_epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub analyzer_lambda: f64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            gp_lambda: 10.0,
            n_critic: 5,
            batch: 32,
            wgan_epochs: 2,
            analyzer_epochs: 10,
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            analyzer_lambda: 0.001,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [self.gp_lambda, self.lr, self.analyzer_lambda];
        if positive.iter().any(|v| !(*v > 0.0))
            || self.n_critic == 0
            || self.batch < 2
            || self.wgan_epochs == 0
            || self.analyzer_epochs == 0
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
        {
            return Err(ModelError::Domain(format!("invalid training hyperparameters {self:?}")));
        }
        Ok(())
    }

    pub(crate) fn adam(&self) -> Adam {
        Adam {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            ..Adam::default()
        }
    }
}

/// Maps the latent box `[-1, 1]^latent_dim` onto tests in `[-1, 1]^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorModel {
    pub net: Network,
    pub latent_dim: usize,
}

impl GeneratorModel {
    pub fn new(latent_dim: usize, dim: usize, rng: &mut Rng) -> Result<Self, ModelError> {
        let hidden = [
            Layer::Dense { out: HIDDEN },
            Layer::BatchNorm,
            Layer::Activation(Activation::LeakyRelu(LEAK)),
        ];
        let mut layers = hidden.to_vec();
        layers.extend(hidden);
        layers.push(Layer::Dense { out: dim });
        layers.push(Layer::Activation(Activation::Tanh));
        let spec = NetworkSpec {
            input: InputShape::Vector(latent_dim),
            layers,
        };
        Ok(GeneratorModel {
            net: Network::new(spec, rng)?,
            latent_dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.net.spec.output_width().expect("validated at construction")
    }

    pub(crate) fn latent(&self, n: usize, rng: &mut Rng) -> Tensor {
        let data = (0..n * self.latent_dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Tensor::matrix(n, self.latent_dim, data).expect("sized by construction")
    }
}

/// Scalar critic without normalization layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticModel {
    pub net: Network,
}

impl CriticModel {
    pub fn new(dim: usize, rng: &mut Rng) -> Result<Self, ModelError> {
        let spec = NetworkSpec {
            input: InputShape::Vector(dim),
            layers: vec![
                Layer::Dense { out: HIDDEN },
                Layer::Activation(Activation::LeakyRelu(LEAK)),
                Layer::Dense { out: HIDDEN },
                Layer::Activation(Activation::LeakyRelu(LEAK)),
                Layer::Dense { out: 1 },
            ],
        };
        Ok(CriticModel {
            net: Network::new(spec, rng)?,
        })
    }
}

/// Draws `n` tests through an eval-mode forward of uniform latents.
pub fn sample_generator(gen: &GeneratorModel, n: usize, rng: &mut Rng) -> Result<Vec<Test>, ModelError> {
    if n == 0 {
        return Err(ModelError::Domain("sample size must be at least 1".into()));
    }
    let z = gen.latent(n, rng);
    Ok(gen.net.predict(&z, Mode::Eval)?.to_rows())
}

pub(crate) fn batch_tensor(rows: &[Test]) -> Result<Tensor, ModelError> {
    Ok(Tensor::from_rows(rows)?)
}
