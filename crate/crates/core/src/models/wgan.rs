use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{batch_tensor, CriticModel, GeneratorModel, ModelError, TrainHyper};
use crate::neural::{input_gradient_norm, Graph, Mode, Network, Tensor};
use crate::rng::Rng;
use crate::Test;

/// Values from the last critic iteration and the generator update of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WganDiagnostics {
    pub critic_loss: f64,
    pub penalty: f64,
    /// `mean f(real) - mean f(fake)`.
    pub wasserstein: f64,
    pub generator_loss: f64,
}

/// `n_critic` critic updates on the real batch `real`, then one generator update.
///
/// Every critic iteration reuses `real` with fresh latents and fresh
/// interpolation weights; the fake batch has the size of `real`.
pub fn wgan_step(
    gen: &mut GeneratorModel,
    critic: &mut CriticModel,
    real: &[Test],
    hyper: &TrainHyper,
    rng: &mut Rng,
) -> Result<WganDiagnostics, ModelError> {
    let m = real.len();
    if m < 2 {
        return Err(ModelError::InsufficientBatch(m));
    }
    let x = batch_tensor(real)?;
    let adam = hyper.adam();
    let mut diag = WganDiagnostics {
        critic_loss: 0.0,
        penalty: 0.0,
        wasserstein: 0.0,
        generator_loss: 0.0,
    };
    for _ in 0..hyper.n_critic {
        let z = gen.latent(m, rng);
        let fake = gen.net.predict(&z, Mode::Train)?;
        let eps: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let cols = x.cols();
        let mut hat = fake.clone();
        for i in 0..m {
            for j in 0..cols {
                let k = i * cols + j;
                hat.data[k] = eps[i] * x.data[k] + (1.0 - eps[i]) * fake.data[k];
            }
        }
        let obj = critic_objective(&critic.net, &x, &fake, &hat, hyper.gp_lambda)?;
        diag.critic_loss = obj.loss;
        diag.penalty = obj.penalty;
        diag.wasserstein = obj.wasserstein;
        let grads = obj.grads;
        adam.step(&mut critic.net.params, &grads)?;
    }
    let mut g = Graph::new();
    let gvars = gen.net.bind(&mut g, true)?;
    let cvars = critic.net.bind(&mut g, false)?;
    let z = g.constant(&gen.latent(m, rng))?;
    let fwd = gen.net.forward(&mut g, &gvars, z, Mode::Train)?;
    let score = critic.net.forward(&mut g, &cvars, fwd.output, Mode::Eval)?.output;
    let mean = g.mean(score)?;
    let loss = g.scale(mean, -1.0)?;
    diag.generator_loss = g.scalar(loss);
    let grads = Network::gradients(&mut g, loss, &gvars)?;
    adam.step(&mut gen.net.params, &grads)?;
    gen.net.commit(&fwd.stats);
    Ok(diag)
}

/// Critic loss of one iteration with its parts and parameter gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticObjective {
    pub loss: f64,
    pub penalty: f64,
    pub wasserstein: f64,
    pub grads: Vec<Tensor>,
}

/// `mean f(fake) - mean f(real) + lambda * mean((||grad f(hat)|| - 1)^2)`.
///
/// `hat` rows are the interpolates; the penalty gradient is taken by double backprop.
pub fn critic_objective(
    critic: &Network,
    real: &Tensor,
    fake: &Tensor,
    hat: &Tensor,
    lambda: f64,
) -> Result<CriticObjective, ModelError> {
    let mut g = Graph::new();
    let vars = critic.bind(&mut g, true)?;
    let xr = g.constant(real)?;
    let xf = g.constant(fake)?;
    let xh = g.leaf(hat, true)?;
    let fr = critic.forward(&mut g, &vars, xr, Mode::Eval)?.output;
    let ff = critic.forward(&mut g, &vars, xf, Mode::Eval)?.output;
    let mr = g.mean(fr)?;
    let mf = g.mean(ff)?;
    let norm = input_gradient_norm(&mut g, critic, &vars, xh)?;
    let dev = g.add_scalar(norm, -1.0)?;
    let sq = g.mul(dev, dev)?;
    let pen = g.mean(sq)?;
    let margin = g.sub(mf, mr)?;
    let weighted = g.scale(pen, lambda)?;
    let loss = g.add(margin, weighted)?;
    Ok(CriticObjective {
        loss: g.scalar(loss),
        penalty: g.scalar(pen),
        wasserstein: -g.scalar(margin),
        grads: Network::gradients(&mut g, loss, &vars)?,
    })
}

/// Critic output for each row of `batch`.
#[cfg(test)]
pub(crate) fn critic_scores(critic: &CriticModel, batch: &[Test]) -> Result<Vec<f64>, ModelError> {
    let t: Tensor = batch_tensor(batch)?;
    Ok(critic.net.predict(&t, Mode::Eval)?.data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn one_step_moves_both_models() {
        let mut rng = seeded(1);
        let mut gen = GeneratorModel::new(10, 2, &mut rng).unwrap();
        let mut critic = CriticModel::new(2, &mut rng).unwrap();
        let (g0, c0) = (gen.clone(), critic.clone());
        let real: Vec<Test> = (0..8).map(|i| vec![0.1 * i as f64 - 0.4, 0.05 * i as f64]).collect();
        let d = wgan_step(&mut gen, &mut critic, &real, &TrainHyper::default(), &mut rng).unwrap();
        assert_ne!(gen.net.params, g0.net.params);
        assert_ne!(critic.net.params, c0.net.params);
        assert_eq!(critic.net.params.step, 5);
        assert_eq!(gen.net.params.step, 1);
        assert_ne!(gen.net.running, g0.net.running);
        assert!(d.penalty >= 0.0);
        assert!((d.critic_loss - (-d.wasserstein + 10.0 * d.penalty)).abs() < 1e-12);
    }

    #[test]
    fn unit_linear_critic_on_identical_batches_has_zero_loss() {
        use crate::neural::{InputShape, Layer, NetworkSpec};
        let spec = NetworkSpec {
            input: InputShape::Vector(2),
            layers: vec![Layer::Dense { out: 1 }],
        };
        let mut net = Network::new(spec, &mut seeded(1)).unwrap();
        net.params.params[0].value.data = vec![0.6, -0.8];
        let x = Tensor::matrix(3, 2, vec![0.1, 0.2, -0.5, 0.3, 0.9, -0.9]).unwrap();
        let obj = critic_objective(&net, &x, &x, &x, 10.0).unwrap();
        assert!(obj.loss.abs() < 1e-15);
        assert!(obj.penalty.abs() < 1e-30);
        assert!(obj.wasserstein.abs() < 1e-15);
    }

    #[test]
    fn single_row_batch_rejected() {
        let mut rng = seeded(1);
        let mut gen = GeneratorModel::new(10, 2, &mut rng).unwrap();
        let mut critic = CriticModel::new(2, &mut rng).unwrap();
        let err = wgan_step(&mut gen, &mut critic, &[vec![0.0, 0.0]], &TrainHyper::default(), &mut rng).unwrap_err();
        assert_eq!(err, ModelError::InsufficientBatch(1));
    }

    #[test]
    fn step_is_deterministic() {
        let run = || {
            let mut rng = seeded(5);
            let mut gen = GeneratorModel::new(10, 3, &mut rng).unwrap();
            let mut critic = CriticModel::new(3, &mut rng).unwrap();
            let real: Vec<Test> = (0..4).map(|i| vec![0.2 * i as f64 - 0.3; 3]).collect();
            for _ in 0..3 {
                wgan_step(&mut gen, &mut critic, &real, &TrainHyper::default(), &mut rng).unwrap();
            }
            (gen, critic_scores(&critic, &real).unwrap())
        };
        assert_eq!(run(), run());
    }
}
