use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{ExperimentConfig, GeneratorKind};
use super::store::{first_line, to_json, write_jsonl, write_pretty, SampleRow};
use super::CampaignError;
use crate::online::{generator_sample_suite, random_sample_suite, wogan_run, Timing};
use crate::rng::{replica_seed, seeded, substream};
use crate::stopwatch::Stopwatch;

/// Sub-stream tag of the final evaluation sample.
pub(crate) const SAMPLE_STREAM: u64 = 21;
/// Sub-stream tag of the uniform reference sample used for diversity loss.
pub(crate) const REFERENCE_STREAM: u64 = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplicaState {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaStatus {
    pub index: usize,
    pub seed: u64,
    pub state: ReplicaState,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Contents of `campaign.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignOutcome {
    pub config: ExperimentConfig,
    pub replicas: Vec<ReplicaStatus>,
}

impl CampaignOutcome {
    pub fn failed(&self) -> usize {
        self.replicas.iter().filter(|r| r.state == ReplicaState::Failed).count()
    }
}

pub fn replica_dir_name(index: usize) -> String {
    format!("replica-{index:03}")
}

/// Config echo of replica artifacts. Replica count and output location are
/// left out so a replica's files depend only on its own index.
fn replica_header(config: &ExperimentConfig, kind: &str, index: usize, seed: u64) -> Value {
    let mut c = serde_json::to_value(config).expect("config serializes");
    if let Some(m) = c.as_object_mut() {
        m.remove("replicas");
        m.remove("output_dir");
    }
    json!({ "kind": kind, "replica": index, "seed": seed, "config": c })
}

#[derive(Serialize)]
struct ReplicaTiming {
    #[serde(flatten)]
    run: Timing,
    sampling: f64,
}

fn remove_if_present(path: &Path) -> Result<(), CampaignError> {
    if path.exists() {
        fs::remove_dir_all(path).map_err(|e| CampaignError::io(path, e))?;
    }
    Ok(())
}

fn run_replica(config: &ExperimentConfig, index: usize, tmp: &Path) -> Result<(), CampaignError> {
    let seed = replica_seed(config.seed, index as u64);
    let objective = config.objective()?;
    let header = |kind| replica_header(config, kind, index, seed);
    let mut rng = seeded(substream(seed, SAMPLE_STREAM));
    let mut timing = Timing::default();
    let tests = match config.generator {
        GeneratorKind::Random => random_sample_suite(&objective, config.sample_size, &mut rng)?,
        GeneratorKind::Wogan => {
            let out = match wogan_run(&objective, &config.wogan, seed) {
                Ok(out) => out,
                Err(failure) => {
                    write_jsonl(&tmp.join("repository.jsonl"), &header("repository"), failure.repository.records())?;
                    return Err(failure.error.into());
                }
            };
            write_jsonl(&tmp.join("repository.jsonl"), &header("repository"), out.repository.records())?;
            write_jsonl(&tmp.join("events.jsonl"), &header("events"), &out.events)?;
            write_pretty(&tmp.join("checkpoint.json"), &json!({ "header": header("checkpoint"), "bundle": out.bundle }))?;
            timing = out.timing;
            generator_sample_suite(&out.bundle, &objective, &config.wogan, config.sample_size, &mut rng)?
        }
    };
    let clock = Stopwatch::start();
    let rows = tests
        .into_iter()
        .map(|test| {
            let rho_bar = objective.peek(&test)?.rho_bar;
            Ok(SampleRow { test, rho_bar })
        })
        .collect::<Result<Vec<_>, CampaignError>>()?;
    write_jsonl(&tmp.join("sample.jsonl"), &header("sample"), &rows)?;
    let sampling = clock.elapsed().as_secs_f64();
    write_pretty(&tmp.join("timing.json"), &ReplicaTiming { run: timing, sampling })?;
    Ok(())
}

/// A finished replica is reused when its sample header matches exactly.
fn reusable(config: &ExperimentConfig, index: usize, dir: &Path) -> bool {
    let seed = replica_seed(config.seed, index as u64);
    let expected = to_json(&replica_header(config, "sample", index, seed));
    first_line(&dir.join("sample.jsonl")).is_some_and(|l| l == expected)
}

/// Runs or resumes every replica of a resolved configuration, writes
/// `campaign.json`, then evaluates the campaign.
pub fn run_campaign(config: &ExperimentConfig) -> Result<CampaignOutcome, CampaignError> {
    let root = config.output_dir();
    fs::create_dir_all(&root).map_err(|e| CampaignError::io(&root, e))?;
    let mut statuses = Vec::with_capacity(config.replicas);
    for index in 0..config.replicas {
        let seed = replica_seed(config.seed, index as u64);
        let name = replica_dir_name(index);
        let done = root.join(&name);
        let tmp: PathBuf = root.join(format!("{name}.tmp"));
        let failed: PathBuf = root.join(format!("{name}.failed"));
        if done.is_dir() && reusable(config, index, &done) {
            info!("{name}: reusing finished replica");
            statuses.push(ReplicaStatus { index, seed, state: ReplicaState::Complete, error: None });
            continue;
        }
        for p in [&done, &tmp, &failed] {
            remove_if_present(p)?;
        }
        fs::create_dir_all(&tmp).map_err(|e| CampaignError::io(&tmp, e))?;
        info!("{name}: seed {seed}");
        match run_replica(config, index, &tmp) {
            Ok(()) => {
                fs::rename(&tmp, &done).map_err(|e| CampaignError::io(&done, e))?;
                statuses.push(ReplicaStatus { index, seed, state: ReplicaState::Complete, error: None });
            }
            Err(e) => {
                warn!("{name} failed: {e}");
                write_pretty(&tmp.join("error.json"), &json!({ "error": e.kind(), "message": e.to_string() }))?;
                fs::rename(&tmp, &failed).map_err(|e| CampaignError::io(&failed, e))?;
                statuses.push(ReplicaStatus { index, seed, state: ReplicaState::Failed, error: Some(e.to_string()) });
            }
        }
    }
    let outcome = CampaignOutcome { config: config.clone(), replicas: statuses };
    write_pretty(&root.join("campaign.json"), &outcome)?;
    if outcome.failed() < outcome.replicas.len() {
        super::evaluate(&root)?;
    }
    Ok(outcome)
}
