use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, GeneratorKind};
use super::run::{replica_dir_name, CampaignOutcome, ReplicaState, REFERENCE_STREAM};
use super::store::{read_json, read_jsonl, write_atomic, write_pretty, SampleRow};
use super::CampaignError;
use crate::eval::{
    diversity_score, falsification_metrics, mean_std, quantile_scores, rank_generators, DiversityLoss,
    FalsificationMetrics, LossCategory, ReplicaScores, ScoreSummary,
};
use crate::online::random_sample_suite;
use crate::rng::{seeded, substream};
use crate::Test;

/// Fixed bin count of robustness histograms over `[0, 1]`.
pub const HISTOGRAM_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub replica: usize,
    pub seed: u64,
    pub q_l: f64,
    pub q_u: f64,
    pub diversity: f64,
    pub reference_diversity: f64,
    pub loss_ratio: f64,
    pub loss_category: LossCategory,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub name: String,
    pub generator: GeneratorKind,
    pub sample_size: usize,
    pub failed: Vec<usize>,
    pub scores: ScoreSummary,
    pub diversity_std: f64,
    pub reference_diversity: f64,
    /// Mean sample diversity over mean reference diversity.
    pub diversity_loss: DiversityLoss,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub name: String,
    pub dir: String,
    pub q_l: f64,
    pub s_l: f64,
    pub q_u: f64,
    pub s_u: f64,
    pub diversity: f64,
    pub count: usize,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsificationRow {
    pub replica: usize,
    pub falsifying: usize,
    pub clusters: usize,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub name: String,
    /// `(lower edge, upper edge, count)` per bin; the last bin includes 1.
    pub histogram: Vec<(f64, f64, usize)>,
    pub falsification: FalsificationMetrics,
    pub rows: Vec<FalsificationRow>,
}

fn load_campaign(dir: &Path) -> Result<CampaignOutcome, CampaignError> {
    let outcome: CampaignOutcome = read_json(&dir.join("campaign.json"))?;
    if outcome.config.requirement.is_none() {
        return Err(CampaignError::Artifact("campaign.json holds an unresolved configuration".into()));
    }
    Ok(outcome)
}

/// `(index, seed, rows)` of every complete replica.
fn load_samples(dir: &Path, outcome: &CampaignOutcome) -> Result<Vec<(usize, u64, Vec<SampleRow>)>, CampaignError> {
    let mut out = Vec::new();
    for r in outcome.replicas.iter().filter(|r| r.state == ReplicaState::Complete) {
        let path = dir.join(replica_dir_name(r.index)).join("sample.jsonl");
        let (_, rows): (_, Vec<SampleRow>) = read_jsonl(&path)?;
        if rows.len() != outcome.config.sample_size {
            return Err(CampaignError::Artifact(format!(
                "{} has {} rows, expected {}",
                path.display(),
                rows.len(),
                outcome.config.sample_size
            )));
        }
        out.push((r.index, r.seed, rows));
    }
    if out.is_empty() {
        return Err(CampaignError::Artifact(format!("{}: no complete replicas", dir.display())));
    }
    Ok(out)
}

fn csv_text<R: Serialize>(rows: &[R]) -> Result<String, CampaignError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CampaignError::Artifact(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CampaignError::Artifact(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

/// Per-replica quantile and diversity scores against a paired uniform
/// reference sample; writes `metrics.csv` and `summary.json`.
pub fn evaluate(dir: &Path) -> Result<EvaluationSummary, CampaignError> {
    let outcome = load_campaign(dir)?;
    let config = &outcome.config;
    let objective = config.objective()?;
    let (sim, bound) = (config.similarity(), config.bound());
    let mut rows = Vec::new();
    for (replica, seed, sample) in load_samples(dir, &outcome)? {
        let rho: Vec<f64> = sample.iter().map(|r| r.rho_bar).collect();
        let tests: Vec<Test> = sample.into_iter().map(|r| r.test).collect();
        let (q_l, q_u) = quantile_scores(&rho, config.metrics.q_l)?;
        let mut rng = seeded(substream(seed, REFERENCE_STREAM));
        let reference = random_sample_suite(&objective, tests.len(), &mut rng)?;
        let diversity = diversity_score(&tests, &sim, bound)?;
        let reference_diversity = diversity_score(&reference, &sim, bound)?;
        let loss = DiversityLoss::from_scores(diversity, reference_diversity)?;
        rows.push(MetricsRow {
            replica,
            seed,
            q_l,
            q_u,
            diversity,
            reference_diversity,
            loss_ratio: loss.ratio,
            loss_category: loss.category,
        });
    }
    let scores = ScoreSummary::from_replicas(
        &rows
            .iter()
            .map(|r| ReplicaScores { q_l: r.q_l, q_u: r.q_u, diversity: r.diversity })
            .collect::<Vec<_>>(),
    )?;
    let (_, diversity_std) = mean_std(&rows.iter().map(|r| r.diversity).collect::<Vec<_>>());
    let (reference_diversity, _) = mean_std(&rows.iter().map(|r| r.reference_diversity).collect::<Vec<_>>());
    let summary = EvaluationSummary {
        name: config.name.clone(),
        generator: config.generator,
        sample_size: config.sample_size,
        failed: outcome.replicas.iter().filter(|r| r.state == ReplicaState::Failed).map(|r| r.index).collect(),
        scores,
        diversity_std,
        reference_diversity,
        diversity_loss: DiversityLoss::from_scores(scores.diversity, reference_diversity)?,
        config: config.clone(),
    };
    write_atomic(&dir.join("metrics.csv"), csv_text(&rows)?.as_bytes())?;
    write_pretty(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Tournament ranking of evaluated campaigns; sample sizes must agree.
pub fn rank_summaries(summaries: &[(PathBuf, EvaluationSummary)]) -> Result<Vec<RankRow>, CampaignError> {
    let Some((_, first)) = summaries.first() else {
        return Err(CampaignError::Config("nothing to rank".into()));
    };
    if let Some((dir, s)) = summaries.iter().find(|(_, s)| s.sample_size != first.sample_size) {
        return Err(CampaignError::Config(format!(
            "{} has sample size {}, expected {}",
            dir.display(),
            s.sample_size,
            first.sample_size
        )));
    }
    let scores: Vec<ScoreSummary> = summaries.iter().map(|(_, s)| s.scores).collect();
    let (counts, ranks) = rank_generators(&scores);
    Ok(summaries
        .iter()
        .zip(counts.into_iter().zip(ranks))
        .map(|((dir, s), (count, rank))| RankRow {
            name: s.name.clone(),
            dir: dir.display().to_string(),
            q_l: s.scores.q_l,
            s_l: s.scores.s_l,
            q_u: s.scores.q_u,
            s_u: s.scores.s_u,
            diversity: s.scores.diversity,
            count,
            rank,
        })
        .collect())
}

/// Ranks the campaigns in `dirs` from their `summary.json`.
pub fn rank(dirs: &[PathBuf]) -> Result<Vec<RankRow>, CampaignError> {
    let summaries = dirs
        .iter()
        .map(|d| Ok((d.clone(), read_json(&d.join("summary.json"))?)))
        .collect::<Result<Vec<_>, CampaignError>>()?;
    rank_summaries(&summaries)
}

impl RankRow {
    pub fn csv(rows: &[RankRow]) -> Result<String, CampaignError> {
        csv_text(rows)
    }

    pub fn table(rows: &[RankRow]) -> String {
        let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(4);
        let mut out = format!(
            "{:<width$}  {:>4}  {:>5}  {:>15}  {:>15}  {:>6}\n",
            "name", "rank", "count", "Q_L (sd)", "Q_U (sd)", "D"
        );
        for r in rows {
            out.push_str(&format!(
                "{:<width$}  {:>4}  {:>5}  {:>15}  {:>15}  {:>6.3}\n",
                r.name,
                r.rank,
                r.count,
                format!("{:.3} ({:.3})", r.q_l, r.s_l),
                format!("{:.3} ({:.3})", r.q_u, r.s_u),
                r.diversity
            ));
        }
        out
    }
}

/// Histogram counts of `values` over `HISTOGRAM_BINS` equal bins of `[0, 1]`.
pub(crate) fn histogram(values: &[f64]) -> Vec<(f64, f64, usize)> {
    let mut counts = vec![0usize; HISTOGRAM_BINS];
    for v in values {
        let b = ((v * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1);
        counts[b] += 1;
    }
    let w = 1.0 / HISTOGRAM_BINS as f64;
    counts.into_iter().enumerate().map(|(i, c)| (i as f64 * w, (i + 1) as f64 * w, c)).collect()
}

/// Pooled robustness histogram and falsification metrics; writes
/// `histogram.csv`, `falsification.csv` and `falsification.json`.
pub fn report(dir: &Path) -> Result<CampaignReport, CampaignError> {
    let outcome = load_campaign(dir)?;
    let config = &outcome.config;
    let (sim, bound) = (config.similarity(), config.bound());
    let samples = load_samples(dir, &outcome)?;
    let pooled: Vec<f64> = samples.iter().flat_map(|(_, _, s)| s.iter().map(|r| r.rho_bar)).collect();
    let pairs: Vec<Vec<(Test, f64)>> =
        samples.iter().map(|(_, _, s)| s.iter().map(|r| (r.test.clone(), r.rho_bar)).collect()).collect();
    let falsification = falsification_metrics(&pairs, &sim, bound)?;
    let mut rows = Vec::new();
    for ((replica, _, _), p) in samples.iter().zip(&pairs) {
        let f: Vec<(Test, f64)> = p.iter().filter(|(_, r)| *r == 0.0).cloned().collect();
        let m = falsification_metrics(&[f.clone()], &sim, bound)?;
        rows.push(FalsificationRow {
            replica: *replica,
            falsifying: f.len(),
            clusters: m.diversity as usize,
            normalized: m.normalized,
        });
    }
    let report = CampaignReport { name: config.name.clone(), histogram: histogram(&pooled), falsification, rows };
    #[derive(Serialize)]
    struct Bin {
        lower: f64,
        upper: f64,
        count: usize,
        fraction: f64,
    }
    let total = pooled.len().max(1) as f64;
    let bins: Vec<Bin> = report
        .histogram
        .iter()
        .map(|&(lower, upper, count)| Bin { lower, upper, count, fraction: count as f64 / total })
        .collect();
    write_atomic(&dir.join("histogram.csv"), csv_text(&bins)?.as_bytes())?;
    write_atomic(&dir.join("falsification.csv"), csv_text(&report.rows)?.as_bytes())?;
    write_pretty(&dir.join("falsification.json"), &report.falsification)?;
    Ok(report)
}
