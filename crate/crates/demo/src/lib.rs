//! WebAssembly bindings for the static page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string.

use rand::Rng as _;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use wogan::models::{sample_generator, wgan_step, CriticModel, GeneratorModel, TrainHyper};
use wogan::rng::{seeded, Rng};
use wogan::suts::{Objective, Oscillator, PathFollow, Sut};

fn to_js<T: Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
}

fn err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

#[derive(Serialize)]
struct OscillatorRun {
    requirement: String,
    t: Vec<f64>,
    x: Vec<f64>,
    rho: f64,
    rho_bar: f64,
}

/// Simulates the oscillator on normalized force levels in `[-1, 1]` and scores
/// the default requirement.
#[wasm_bindgen]
pub fn oscillator(levels: &[f64]) -> Result<String, JsError> {
    let sut = Oscillator::new();
    let requirement = sut.default_requirement();
    let objective = Objective::new(Box::new(sut), &requirement).map_err(err)?;
    let run = objective.peek(levels).map_err(err)?;
    let x = run.trace.get("x").map_err(err)?;
    to_js(&OscillatorRun {
        requirement,
        t: (0..x.values.len()).map(|k| x.t0 + k as f64 * x.dt).collect(),
        x: x.values.clone(),
        rho: run.rho,
        rho_bar: run.rho_bar,
    })
}

#[derive(Serialize)]
struct RoadRun {
    valid: bool,
    road: Vec<(f64, f64)>,
    path: Vec<(f64, f64)>,
    max_distance: f64,
    rho_bar: Option<f64>,
}

/// Builds the road of normalized curvatures and drives the follower along it.
/// `rho_bar` is absent for self-intersecting roads.
#[wasm_bindgen]
pub fn road(curvatures: &[f64]) -> Result<String, JsError> {
    let sut = PathFollow::new(curvatures.len()).map_err(err)?;
    let road = sut.road(curvatures).map_err(err)?;
    let valid = sut.is_valid(curvatures);
    let (path, dist) = PathFollow::drive(&road, 15 * sut.segments());
    let rho_bar = if valid {
        let requirement = sut.default_requirement();
        let objective = Objective::new(Box::new(sut), &requirement).map_err(err)?;
        Some(objective.peek(curvatures).map_err(err)?.rho_bar)
    } else {
        None
    };
    to_js(&RoadRun {
        valid,
        road: road.points,
        path,
        max_distance: dist.iter().fold(0.0, |m, &d| f64::max(m, d)),
        rho_bar,
    })
}

/// WGAN learning a uniform box target inside `[-1, 1]^2`.
#[wasm_bindgen]
pub struct ToyWgan {
    gen: GeneratorModel,
    critic: CriticModel,
    target: Vec<Vec<f64>>,
    hyper: TrainHyper,
    rng: Rng,
    steps: usize,
}

#[derive(Serialize)]
struct ToyState {
    steps: usize,
    wasserstein: Option<f64>,
    inside: f64,
    sample: Vec<Vec<f64>>,
}

#[wasm_bindgen]
impl ToyWgan {
    /// Target: 512 uniform points on `[-half, half]^2`.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, half: f64) -> Result<ToyWgan, JsError> {
        if !(half > 0.0 && half <= 1.0) {
            return Err(JsError::new("half width must lie in (0, 1]"));
        }
        let mut rng = seeded(seed as u64);
        let target = (0..512).map(|_| vec![rng.gen_range(-half..=half), rng.gen_range(-half..=half)]).collect();
        Ok(ToyWgan {
            gen: GeneratorModel::new(10, 2, &mut rng).map_err(err)?,
            critic: CriticModel::new(2, &mut rng).map_err(err)?,
            target,
            hyper: TrainHyper::default(),
            rng,
            steps: 0,
        })
    }

    /// Runs `n` training steps, then reports a 300-point generator sample.
    pub fn train(&mut self, n: usize) -> Result<String, JsError> {
        let mut wasserstein = None;
        for _ in 0..n {
            let real: Vec<Vec<f64>> = rand::seq::index::sample(&mut self.rng, self.target.len(), self.hyper.batch)
                .iter()
                .map(|i| self.target[i].clone())
                .collect();
            let d = wgan_step(&mut self.gen, &mut self.critic, &real, &self.hyper, &mut self.rng).map_err(err)?;
            wasserstein = Some(d.wasserstein);
            self.steps += 1;
        }
        let half = self.target.iter().flatten().fold(0.0, |m, &v| f64::max(m, v.abs()));
        let sample = sample_generator(&self.gen, 300, &mut self.rng).map_err(err)?;
        let hits = sample.iter().filter(|p| p.iter().all(|v| v.abs() <= half)).count();
        to_js(&ToyState {
            steps: self.steps,
            wasserstein,
            inside: hits as f64 / sample.len() as f64,
            sample,
        })
    }
}
