//! Sample evaluation: similarity, greedy clustering, diversity, quantile
//! scores, pairwise generator comparison, ranking and falsification metrics.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::suts::{curvature_to_road, path_length_constant, MAX_CURVATURE};
use crate::Test;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("tests of dimension {0} and {1} cannot be compared")]
    Dimension(usize, usize),
    #[error("empty sample")]
    EmptySample,
    #[error("samples of size {0} and {1} are not comparable")]
    SizeMismatch(usize, usize),
    #[error("argument outside its domain: {0}")]
    Domain(String),
}

/// `1 - 2 max_i |x_i - y_i|`. Negative for gaps above 0.5.
pub fn similarity_maxnorm(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::Dimension(a.len(), b.len()));
    }
    let gap = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(1.0 - 2.0 * gap)
}

/// `1 - sum_i |p_i - q_i| / scale` over the control points of the roads built
/// from normalized curvature tests `a` and `b`.
pub fn similarity_path(a: &[f64], b: &[f64], scale: f64) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::Dimension(a.len(), b.len()));
    }
    if !(scale > 0.0) {
        return Err(EvalError::Domain(format!("path scale must be positive, got {scale}")));
    }
    let road = |t: &[f64]| curvature_to_road(&t.iter().map(|v| v * MAX_CURVATURE).collect::<Vec<_>>());
    let (p, q) = (road(a), road(b));
    let d: f64 = p.points.iter().zip(&q.points).map(|(u, v)| (u.0 - v.0).hypot(u.1 - v.1)).sum();
    Ok(1.0 - d / scale)
}

/// Similarity measure between two tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Similarity {
    Maxnorm,
    /// Road similarity for `segments` curvatures, scaled by the road-length constant.
    Path { segments: usize },
}

impl Similarity {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
        match *self {
            Similarity::Maxnorm => similarity_maxnorm(a, b),
            Similarity::Path { segments } => {
                let scale = path_length_constant(segments)
                    .ok_or_else(|| EvalError::Domain(format!("no path scale for {segments} segments")))?;
                if a.len() != segments {
                    return Err(EvalError::Dimension(a.len(), segments));
                }
                similarity_path(a, b, scale)
            }
        }
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// Greedy clustering in lexicographic order: each test joins the first
/// cluster (by creation) whose every member is at least `bound`-similar.
/// Returns indices into `tests`.
pub fn cluster(tests: &[Test], sim: &Similarity, bound: f64) -> Result<Vec<Vec<usize>>, EvalError> {
    let mut order: Vec<usize> = (0..tests.len()).collect();
    order.sort_by(|&i, &j| lexicographic(&tests[i], &tests[j]));
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    'next: for i in order {
        for c in clusters.iter_mut() {
            let mut fits = true;
            for &j in c.iter() {
                if sim.eval(&tests[i], &tests[j])? < bound {
                    fits = false;
                    break;
                }
            }
            if fits {
                c.push(i);
                continue 'next;
            }
        }
        clusters.push(vec![i]);
    }
    Ok(clusters)
}

/// Cluster count over sample size; 0 for an empty sample.
pub fn diversity_score(tests: &[Test], sim: &Similarity, bound: f64) -> Result<f64, EvalError> {
    if tests.is_empty() {
        return Ok(0.0);
    }
    Ok(cluster(tests, sim, bound)?.len() as f64 / tests.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossCategory {
    Negligible,
    Small,
    Moderate,
    Large,
}

impl LossCategory {
    /// Ratios at or above 0.98, including those above 1, are negligible.
    pub fn of(ratio: f64) -> Self {
        if ratio >= 0.98 {
            LossCategory::Negligible
        } else if ratio >= 0.75 {
            LossCategory::Small
        } else if ratio >= 0.5 {
            LossCategory::Moderate
        } else {
            LossCategory::Large
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            LossCategory::Negligible => "negligible",
            LossCategory::Small => "small",
            LossCategory::Moderate => "moderate",
            LossCategory::Large => "large",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityLoss {
    /// `D(T) / D(R)`, not clamped.
    pub ratio: f64,
    pub category: LossCategory,
}

impl DiversityLoss {
    pub fn from_scores(sample: f64, reference: f64) -> Result<Self, EvalError> {
        if !(reference > 0.0) {
            return Err(EvalError::Domain("reference diversity must be positive".into()));
        }
        let ratio = sample / reference;
        Ok(DiversityLoss {
            ratio,
            category: LossCategory::of(ratio),
        })
    }
}

/// Diversity loss of `sample` against a uniform `reference` of the same size.
pub fn diversity_loss(
    sample: &[Test],
    reference: &[Test],
    sim: &Similarity,
    bound: f64,
) -> Result<DiversityLoss, EvalError> {
    if sample.len() != reference.len() {
        return Err(EvalError::SizeMismatch(sample.len(), reference.len()));
    }
    if reference.is_empty() {
        return Err(EvalError::EmptySample);
    }
    DiversityLoss::from_scores(diversity_score(sample, sim, bound)?, diversity_score(reference, sim, bound)?)
}

/// Smallest observed value with at least `ceil(q n)` values at or below it.
pub fn quantile_value(values: &[f64], q: f64) -> Result<f64, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptySample);
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(EvalError::Domain(format!("quantile level {q} outside (0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((q * v.len() as f64 - 1e-9).ceil() as usize).clamp(1, v.len());
    Ok(v[k - 1])
}

/// `(Q_L, Q_U)` at levels `q_l` and `1 - q_l`.
pub fn quantile_scores(rho_bars: &[f64], q_l: f64) -> Result<(f64, f64), EvalError> {
    if !(q_l > 0.0 && q_l <= 0.5) {
        return Err(EvalError::Domain(format!("q_L {q_l} outside (0, 0.5]")));
    }
    Ok((quantile_value(rho_bars, q_l)?, quantile_value(rho_bars, 1.0 - q_l)?))
}

/// Scores of one replica sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaScores {
    pub q_l: f64,
    pub q_u: f64,
    pub diversity: f64,
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Replica-level score aggregate of one generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub q_l: f64,
    pub q_u: f64,
    pub s_l: f64,
    pub s_u: f64,
    pub diversity: f64,
    pub n: usize,
}

impl ScoreSummary {
    pub fn from_replicas(scores: &[ReplicaScores]) -> Result<Self, EvalError> {
        if scores.is_empty() {
            return Err(EvalError::EmptySample);
        }
        let col = |f: fn(&ReplicaScores) -> f64| scores.iter().map(f).collect::<Vec<_>>();
        let (q_l, s_l) = mean_std(&col(|s| s.q_l));
        let (q_u, s_u) = mean_std(&col(|s| s.q_u));
        let (diversity, _) = mean_std(&col(|s| s.diversity));
        Ok(ScoreSummary {
            q_l,
            q_u,
            s_l,
            s_u,
            diversity,
            n: scores.len(),
        })
    }
}

/// Outcome of comparing two generators; `Better` means lower scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Better,
    Worse,
    Tie,
}

impl Relation {
    pub fn symbol(&self) -> &'static str {
        match self {
            Relation::Better => "<",
            Relation::Worse => ">",
            Relation::Tie => "~",
        }
    }
}

fn interval(m1: f64, s1: f64, m2: f64, s2: f64) -> Relation {
    if m1 + s1 < m2 - s2 {
        Relation::Better
    } else if m2 + s2 < m1 - s1 {
        Relation::Worse
    } else {
        Relation::Tie
    }
}

/// `g1 < g2` when g1's quantile scores are convincingly lower; improvement
/// in `Q_L` counts twice when the two intervals disagree.
pub fn compare_generators(g1: &ScoreSummary, g2: &ScoreSummary) -> Relation {
    let direct = |a: &ScoreSummary, b: &ScoreSummary| {
        use Relation::*;
        let l = interval(a.q_l, a.s_l, b.q_l, b.s_l);
        let u = interval(a.q_u, a.s_u, b.q_u, b.s_u);
        let d_l = b.q_l - a.q_l;
        let d_u = a.q_u - b.q_u;
        match (l, u) {
            (Better, Better) | (Tie, Better) | (Better, Tie) => Better,
            (Better, Worse) if 2.0 * d_l > d_u => Better,
            (Better, Worse) if 2.0 * d_l < d_u => Worse,
            _ => Tie,
        }
    };
    match (direct(g1, g2), direct(g2, g1)) {
        (Relation::Better, _) | (_, Relation::Worse) => Relation::Better,
        (Relation::Worse, _) | (_, Relation::Better) => Relation::Worse,
        _ => Relation::Tie,
    }
}

/// Dense ranks: the largest count gets rank 1, the next distinct count rank 2, and so on.
pub fn ranks_from_counts(counts: &[usize]) -> Vec<usize> {
    let mut distinct = counts.to_vec();
    distinct.sort_unstable_by(|a, b| b.cmp(a));
    distinct.dedup();
    counts.iter().map(|c| 1 + distinct.iter().take_while(|d| *d > c).count()).collect()
}

/// Per generator, the number of generators (itself included) it beats or ties, and the ranks.
pub fn rank_generators(summaries: &[ScoreSummary]) -> (Vec<usize>, Vec<usize>) {
    let counts: Vec<usize> = summaries
        .iter()
        .map(|a| summaries.iter().filter(|b| compare_generators(a, b) != Relation::Worse).count())
        .collect();
    let ranks = ranks_from_counts(&counts);
    (counts, ranks)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FalsificationMetrics {
    /// Fraction of samples containing a falsifying test.
    pub rate: f64,
    /// Mean cluster count of the falsifying subsets.
    pub diversity: f64,
    pub diversity_std: f64,
    /// Mean of `k / |F_i|` over samples, 0 for samples without falsifiers.
    pub normalized: f64,
    pub normalized_std: f64,
    pub n: usize,
}

/// Falsification rate and diversity over `samples` of `(test, rho_bar)`;
/// a test falsifies when its scaled robustness is exactly 0.
pub fn falsification_metrics(
    samples: &[Vec<(Test, f64)>],
    sim: &Similarity,
    bound: f64,
) -> Result<FalsificationMetrics, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptySample);
    }
    let mut hits = 0;
    let mut counts = Vec::with_capacity(samples.len());
    let mut scores = Vec::with_capacity(samples.len());
    for s in samples {
        let f: Vec<Test> = s.iter().filter(|(_, r)| *r == 0.0).map(|(t, _)| t.clone()).collect();
        if !f.is_empty() {
            hits += 1;
        }
        let k = cluster(&f, sim, bound)?.len();
        counts.push(k as f64);
        scores.push(if f.is_empty() { 0.0 } else { k as f64 / f.len() as f64 });
    }
    let (diversity, diversity_std) = mean_std(&counts);
    let (normalized, normalized_std) = mean_std(&scores);
    Ok(FalsificationMetrics {
        rate: hits as f64 / samples.len() as f64,
        diversity,
        diversity_std,
        normalized,
        normalized_std,
        n: samples.len(),
    })
}
