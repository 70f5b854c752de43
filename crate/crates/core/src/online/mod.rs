//! The online WOGAN loop: repository, exploration, training cadence, the
//! quantile training-data sampler and analyzer-guided rejection sampling.

mod rejection;
mod sampler;

use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{
    analyzer_train, sample_generator, wgan_step, AnalyzerModel, CriticModel, GeneratorModel, ModelError, TrainHyper,
    WganDiagnostics,
};
use crate::neural::InputShape;
use crate::rng::{seeded, substream, Rng};
use crate::stopwatch::Stopwatch;
use crate::suts::{Objective, SutError};
use crate::Test;

pub use rejection::{
    rejection_sample, Accepted, AnalyzerEstimator, ConstantEstimator, Estimator, PerfectEstimator, RandomEstimator,
    REJECTION_EPSILON,
};
pub use sampler::{
    audit_batch, bin_tests, compute_quantile, compute_weights, quantile_sample, sample_bin_index, uniform_sample,
    BinPartition, Pick, TrainingBatch,
};

/// Attempts per draw before a validity predicate is declared unsatisfiable.
pub const VALIDITY_ATTEMPTS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WoganError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sut(#[from] SutError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("repository is empty")]
    EmptyRepository,
    #[error("no valid test after {0} attempts")]
    ValidityExhausted(usize),
    #[error("bad record: {0}")]
    Record(String),
}

/// Where a repository test came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Initial uniform phase.
    Random,
    /// Uniform exploration after the initial phase.
    Explore,
    /// Rejection sample of the generator.
    Wgan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub test: Test,
    pub rho_bar: f64,
    /// 1-based position in the repository.
    pub iteration: usize,
    pub source: Source,
}

/// Append-only store of executed tests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Repository {
    records: Vec<Record>,
}

impl Repository {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, test: Test, rho_bar: f64, source: Source) -> Result<(), WoganError> {
        if !(0.0..=1.0).contains(&rho_bar) {
            return Err(WoganError::Record(format!("rho_bar {rho_bar} outside [0, 1]")));
        }
        let iteration = self.records.len() + 1;
        self.records.push(Record {
            test,
            rho_bar,
            iteration,
            source,
        });
        Ok(())
    }

    /// Rebuilds a repository, checking the record invariants.
    pub fn from_records(records: Vec<Record>) -> Result<Self, WoganError> {
        let mut repo = Repository::new();
        for r in records {
            if r.iteration != repo.len() + 1 {
                return Err(WoganError::Record(format!("iteration {} out of sequence", r.iteration)));
            }
            repo.push(r.test, r.rho_bar, r.source)?;
        }
        Ok(repo)
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn rho_bars(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.rho_bar).collect()
    }

    pub fn tests(&self) -> Vec<Test> {
        self.records.iter().map(|r| r.test.clone()).collect()
    }
}

/// How the remaining-budget fraction `R` handed to the sampler is computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemainingRule {
    /// `(B - |T|) / B_R`, clamped to `[0, 1]`.
    #[default]
    RandomBudget,
    /// `(B - |T|) / (B - B_R)`, clamped to `[0, 1]`.
    TrainingBudget,
}

impl RemainingRule {
    pub fn remaining(self, budget: usize, random_budget: usize, len: usize) -> f64 {
        let left = budget.saturating_sub(len) as f64;
        let denom = match self {
            RemainingRule::RandomBudget => random_budget,
            RemainingRule::TrainingBudget => budget - random_budget,
        };
        if denom == 0 {
            return 0.0;
        }
        (left / denom as f64).clamp(0.0, 1.0)
    }
}

/// Replacement switches for studying the algorithm's parts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    /// Training batches drawn uniformly from the repository.
    pub random_sampler: bool,
    /// Estimates drawn uniformly from `[0, 1)` instead of from the analyzer.
    pub random_analyzer: bool,
    /// Estimates are exact SUT executions outside the budget.
    pub perfect_analyzer: bool,
    /// Final suites are raw generator draws without rejection sampling.
    pub no_analyzer_sampling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WoganConfig {
    /// Total SUT executions `B`.
    pub budget: usize,
    /// Initial uniform executions `B_R`.
    pub random_budget: usize,
    /// Probability of a uniform exploration round after the initial phase.
    pub explore_probability: f64,
    /// New records required between training events `d_T`.
    pub train_delay: usize,
    /// Latent dimension `d_H`.
    pub latent_dim: usize,
    /// Rejection threshold multiplier.
    pub alpha: f64,
    /// Number of robustness bins `N_B`.
    pub bins: usize,
    pub quantile_slope: f64,
    pub quantile_intercept: f64,
    pub remaining: RemainingRule,
    pub train: TrainHyper,
    pub ablation: Ablation,
}

impl Default for WoganConfig {
    fn default() -> Self {
        WoganConfig {
            budget: 300,
            random_budget: 75,
            explore_probability: 0.0,
            train_delay: 3,
            latent_dim: 10,
            alpha: 0.95,
            bins: 10,
            quantile_slope: 0.4,
            quantile_intercept: 0.1,
            remaining: RemainingRule::default(),
            train: TrainHyper::default(),
            ablation: Ablation::default(),
        }
    }
}

impl WoganConfig {
    pub fn validate(&self) -> Result<(), WoganError> {
        let bad = |m: &str| Err(WoganError::Config(m.to_string()));
        if self.random_budget == 0 || self.random_budget > self.budget {
            return bad("need 0 < random_budget <= budget");
        }
        if !(0.0..=1.0).contains(&self.explore_probability) {
            return bad("explore_probability must lie in [0, 1]");
        }
        if self.train_delay == 0 || self.latent_dim == 0 || self.bins == 0 {
            return bad("train_delay, latent_dim and bins must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        let (lo, hi) = (self.quantile_intercept, self.quantile_intercept + self.quantile_slope);
        if !(lo > 0.0 && lo <= 1.0 && hi > 0.0 && hi <= 1.0) {
            return bad("quantile line must stay in (0, 1] on R in [0, 1]");
        }
        if self.ablation.random_analyzer && self.ablation.perfect_analyzer {
            return bad("random_analyzer and perfect_analyzer are exclusive");
        }
        if self.random_budget < 2 {
            return bad("random_budget must be at least 2 to form a training batch");
        }
        self.train.validate()?;
        Ok(())
    }

    pub fn quantile(&self, r: f64) -> f64 {
        self.quantile_slope * r + self.quantile_intercept
    }
}

/// Generator, critic and analyzer trained together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub generator: GeneratorModel,
    pub critic: CriticModel,
    pub analyzer: AnalyzerModel,
}

impl Bundle {
    pub fn new(dim: usize, analyzer: InputShape, latent_dim: usize, rng: &mut Rng) -> Result<Self, WoganError> {
        let generator = GeneratorModel::new(latent_dim, dim, rng)?;
        let critic = CriticModel::new(dim, rng)?;
        let analyzer = match analyzer {
            InputShape::Sequence { channels, length } => AnalyzerModel::for_signals(channels, length, rng)?,
            InputShape::Vector(n) => AnalyzerModel::for_vectors(n, rng)?,
        };
        Ok(Bundle {
            generator,
            critic,
            analyzer,
        })
    }
}

/// One analyzer-plus-WGAN training event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingEvent {
    /// Repository size when training started.
    pub at: usize,
    pub remaining: f64,
    pub new: Vec<usize>,
    pub analyzer_losses: Vec<f64>,
    pub batches: Vec<TrainingBatch>,
    pub diagnostics: Vec<WganDiagnostics>,
}

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub generation: f64,
    pub training: f64,
    pub execution: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub bundle: Bundle,
    pub repository: Repository,
    pub events: Vec<TrainingEvent>,
    /// Candidate draws of each rejection-sampling call.
    pub rejection_draws: Vec<usize>,
    pub timing: Timing,
}

/// A run aborted by an error, with everything recorded before it.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: WoganError,
    pub repository: Repository,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} after {} executions", self.error, self.repository.len())
    }
}

impl std::error::Error for RunFailure {}

/// Uniform point of `[-1, 1]^dim`.
pub fn uniform_test(dim: usize, rng: &mut Rng) -> Test {
    (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// Repeats `draw` until `objective` accepts the test.
pub fn until_valid(
    objective: &Objective,
    mut draw: impl FnMut() -> Result<Test, WoganError>,
) -> Result<Test, WoganError> {
    for _ in 0..VALIDITY_ATTEMPTS {
        let t = draw()?;
        if objective.is_valid(&t) {
            return Ok(t);
        }
    }
    Err(WoganError::ValidityExhausted(VALIDITY_ATTEMPTS))
}

/// `E_W` WGAN steps, each on a fresh batch of `min(|T|, m)` records.
pub fn train_wgan_online(
    bundle: &mut Bundle,
    repository: &Repository,
    new: &[usize],
    remaining: f64,
    config: &WoganConfig,
    rng: &mut Rng,
) -> Result<(Vec<TrainingBatch>, Vec<WganDiagnostics>), WoganError> {
    if repository.len() < 2 {
        return Err(ModelError::InsufficientBatch(repository.len()).into());
    }
    let rho = repository.rho_bars();
    let tests = repository.records();
    let mut batches = Vec::with_capacity(config.train.wgan_epochs);
    let mut diags = Vec::with_capacity(config.train.wgan_epochs);
    for _ in 0..config.train.wgan_epochs {
        let size = repository.len().min(config.train.batch);
        let batch = if config.ablation.random_sampler {
            uniform_sample(rho.len(), size, rng)
        } else {
            quantile_sample(&rho, new, config.quantile(remaining), config.bins, size, rng)?
        };
        let real: Vec<Test> = batch.indices().iter().map(|&i| tests[i].test.clone()).collect();
        diags.push(wgan_step(
            &mut bundle.generator,
            &mut bundle.critic,
            &real,
            &config.train,
            rng,
        )?);
        batches.push(batch);
    }
    Ok((batches, diags))
}

fn estimator<'a>(bundle: &'a Bundle, objective: &'a Objective, ablation: &Ablation, rng: &mut Rng) -> Box<dyn Estimator + 'a> {
    if ablation.random_analyzer {
        Box::new(RandomEstimator(seeded(rng.gen())))
    } else if ablation.perfect_analyzer {
        Box::new(PerfectEstimator(objective))
    } else {
        Box::new(AnalyzerEstimator(&bundle.analyzer))
    }
}

fn generator_candidate(bundle: &Bundle, objective: &Objective, rng: &mut Rng) -> Result<Test, WoganError> {
    until_valid(objective, || Ok(sample_generator(&bundle.generator, 1, rng)?.remove(0)))
}

const STREAM_INIT: u64 = 1;
const STREAM_UNIFORM: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_CANDIDATES: u64 = 4;
const STREAM_ESTIMATES: u64 = 5;

/// Runs the WOGAN loop for exactly `config.budget` SUT executions.
pub fn wogan_run(objective: &Objective, config: &WoganConfig, seed: u64) -> Result<RunOutput, Box<RunFailure>> {
    let mut repository = Repository::new();
    let fail = |error: WoganError, repository: Repository| Box::new(RunFailure { error, repository });
    if let Err(e) = config.validate() {
        return Err(fail(e, repository));
    }
    let total = Stopwatch::start();
    let mut timing = Timing::default();
    let mut init = seeded(substream(seed, STREAM_INIT));
    let mut bundle = match Bundle::new(
        objective.dim(),
        objective.sut.inputs().analyzer_shape(),
        config.latent_dim,
        &mut init,
    ) {
        Ok(b) => b,
        Err(e) => return Err(fail(e, repository)),
    };
    let mut uniform = seeded(substream(seed, STREAM_UNIFORM));
    let mut train = seeded(substream(seed, STREAM_TRAIN));
    let mut candidates = seeded(substream(seed, STREAM_CANDIDATES));
    let mut estimates = seeded(substream(seed, STREAM_ESTIMATES));
    let mut events = Vec::new();
    let mut rejection_draws = Vec::new();
    let mut last_trained = 0;

    while repository.len() < config.budget {
        let step = (|| -> Result<(Test, Source), WoganError> {
            let n = repository.len();
            let explore = n >= config.random_budget && uniform.gen::<f64>() < config.explore_probability;
            if n < config.random_budget || explore {
                let clock = Stopwatch::start();
                let t = until_valid(objective, || Ok(uniform_test(objective.dim(), &mut uniform)))?;
                timing.generation += clock.elapsed().as_secs_f64();
                let source = if explore { Source::Explore } else { Source::Random };
                return Ok((t, source));
            }
            if n - last_trained >= config.train_delay {
                let clock = Stopwatch::start();
                let ab = &config.ablation;
                let analyzer_losses = if ab.random_analyzer || ab.perfect_analyzer {
                    Vec::new()
                } else {
                    let data: Vec<(Test, f64)> =
                        repository.records().iter().map(|r| (r.test.clone(), r.rho_bar)).collect();
                    analyzer_train(&mut bundle.analyzer, &data, &config.train)?
                };
                let new: Vec<usize> = (n.saturating_sub(config.train_delay)..n).collect();
                let remaining = config.remaining.remaining(config.budget, config.random_budget, n);
                let (batches, diagnostics) =
                    train_wgan_online(&mut bundle, &repository, &new, remaining, config, &mut train)?;
                events.push(TrainingEvent {
                    at: n,
                    remaining,
                    new,
                    analyzer_losses,
                    batches,
                    diagnostics,
                });
                last_trained = n;
                timing.training += clock.elapsed().as_secs_f64();
            }
            let clock = Stopwatch::start();
            let mut est = estimator(&bundle, objective, &config.ablation, &mut estimates);
            let accepted = rejection_sample(
                || generator_candidate(&bundle, objective, &mut candidates),
                est.as_mut(),
                config.alpha,
            )?;
            timing.generation += clock.elapsed().as_secs_f64();
            rejection_draws.push(accepted.draws);
            Ok((accepted.test, Source::Wgan))
        })();
        let (test, source) = match step {
            Ok(v) => v,
            Err(e) => return Err(fail(e, repository)),
        };
        let clock = Stopwatch::start();
        let executed = objective.execute(&test);
        timing.execution += clock.elapsed().as_secs_f64();
        match executed {
            Ok(ex) => {
                if let Err(e) = repository.push(test, ex.rho_bar, source) {
                    return Err(fail(e, repository));
                }
            }
            Err(e) => return Err(fail(e.into(), repository)),
        }
    }
    timing.total = total.elapsed().as_secs_f64();
    log::debug!(
        "wogan run: {} executions, {} training events, timing {:?}",
        repository.len(),
        events.len(),
        timing
    );
    Ok(RunOutput {
        bundle,
        repository,
        events,
        rejection_draws,
        timing,
    })
}

/// `n` final tests: rejection samples under the configured estimator, or raw
/// generator draws with `no_analyzer_sampling`. Each draw repeats until valid.
pub fn generator_sample_suite(
    bundle: &Bundle,
    objective: &Objective,
    config: &WoganConfig,
    n: usize,
    rng: &mut Rng,
) -> Result<Vec<Test>, WoganError> {
    let mut est: Box<dyn Estimator> = if config.ablation.no_analyzer_sampling {
        Box::new(ConstantEstimator(0.0))
    } else {
        estimator(bundle, objective, &config.ablation, rng)
    };
    (0..n)
        .map(|_| {
            let a = rejection_sample(|| generator_candidate(bundle, objective, rng), est.as_mut(), config.alpha)?;
            Ok(a.test)
        })
        .collect()
}

/// `n` uniform tests, each repeated until valid.
pub fn random_sample_suite(objective: &Objective, n: usize, rng: &mut Rng) -> Result<Vec<Test>, WoganError> {
    (0..n)
        .map(|_| until_valid(objective, || Ok(uniform_test(objective.dim(), rng))))
        .collect()
}
