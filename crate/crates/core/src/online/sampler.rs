use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::WoganError;
use crate::rng::Rng;

/// `0.4 R + 0.1`: the lower quantile of the repository eligible for training.
pub fn compute_quantile(r: f64) -> f64 {
    0.4 * r + 0.1
}

/// Size of the lower `q` quantile of `n` records; never zero for `n > 0`.
pub(crate) fn quantile_count(q: f64, n: usize) -> usize {
    // The slack keeps products such as 0.3 * 10 from rounding up to 4.
    ((q * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// Records split into `N_B` robustness bins plus a trailing sink bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinPartition {
    /// Record indices per bin; index `N_B` is the sink.
    pub bins: Vec<Vec<usize>>,
    /// Largest robustness inside the lower quantile.
    pub rho_max: f64,
    /// Normalized selection weights; the sink weight is 0.
    pub weights: Vec<f64>,
}

impl BinPartition {
    pub fn n_bins(&self) -> usize {
        self.bins.len() - 1
    }

    pub fn sink(&self) -> usize {
        self.n_bins()
    }

    /// Bin holding record `index`.
    pub fn bin_of(&self, index: usize) -> Option<usize> {
        self.bins.iter().position(|b| b.contains(&index))
    }
}

/// Bins the lower `ceil(q n)` records of `rho` (ties by index) into `n_bins`
/// equal slices of `[0, rho_max]`; the maximum itself goes to the last bin.
pub fn bin_tests(rho: &[f64], q: f64, n_bins: usize) -> Result<BinPartition, WoganError> {
    if rho.is_empty() {
        return Err(WoganError::EmptyRepository);
    }
    if !(q > 0.0 && q <= 1.0) || n_bins == 0 {
        return Err(WoganError::Config(format!("bin_tests needs q in (0, 1] and N_B >= 1, got {q}, {n_bins}")));
    }
    let mut order: Vec<usize> = (0..rho.len()).collect();
    order.sort_by(|&a, &b| rho[a].total_cmp(&rho[b]).then(a.cmp(&b)));
    let members = quantile_count(q, rho.len());
    let rho_max = rho[order[members - 1]];
    let mut bins = vec![Vec::new(); n_bins + 1];
    let mut in_quantile = vec![false; rho.len()];
    for &i in &order[..members] {
        in_quantile[i] = true;
    }
    for (i, &r) in rho.iter().enumerate() {
        let b = if !in_quantile[i] {
            n_bins
        } else if rho_max == 0.0 {
            0
        } else if r >= rho_max {
            n_bins - 1
        } else {
            ((r * n_bins as f64 / rho_max).floor() as usize).min(n_bins - 1)
        };
        bins[b].push(i);
    }
    let weights = compute_weights(&bins);
    Ok(BinPartition { bins, rho_max, weights })
}

/// Weight `N_B - i + 1` for non-empty bin `i` (1-based), 0 for empty bins and
/// the sink, normalized to sum 1. All zeros when every bin is empty.
pub fn compute_weights(bins: &[Vec<usize>]) -> Vec<f64> {
    let n_bins = bins.len() - 1;
    let mut w: Vec<f64> = bins
        .iter()
        .enumerate()
        .map(|(i, b)| if i < n_bins && !b.is_empty() { (n_bins - i) as f64 } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|v| *v /= total);
    }
    w
}

/// Draws a bin index with probabilities `weights`; the sink when all are zero.
pub fn sample_bin_index(weights: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = weights.len() - 1;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Why a record entered a training batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Pick {
    /// NEW record in bin `bin` passed against the drawn bin `drawn`.
    New { index: usize, bin: usize, drawn: usize },
    /// Drawn from bin `bin` after drawing `drawn` and skipping empty bins.
    Bin { index: usize, bin: usize, drawn: usize },
    /// Uniform draw from the whole repository.
    Uniform { index: usize },
}

impl Pick {
    pub fn index(&self) -> usize {
        match *self {
            Pick::New { index, .. } | Pick::Bin { index, .. } | Pick::Uniform { index } => index,
        }
    }
}

/// A training batch with the justification of every element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingBatch {
    pub picks: Vec<Pick>,
    /// Partition the picks refer to; absent for uniform batches.
    pub partition: Option<BinPartition>,
    pub quantile: Option<f64>,
}

impl TrainingBatch {
    pub fn indices(&self) -> Vec<usize> {
        self.picks.iter().map(Pick::index).collect()
    }
}

/// Quantile training-data sampler over records with robustness `rho`.
///
/// NEW records (indices into `rho`) enter first when their bin index is at most
/// a freshly drawn bin index; inclusions stop once `size` is reached. Remaining
/// slots draw a bin by weight, move right past empty bins (wrapping after the
/// sink) and take a uniform member without replacement. The batch has
/// `min(size, rho.len())` distinct records.
pub fn quantile_sample(
    rho: &[f64],
    new: &[usize],
    q: f64,
    n_bins: usize,
    size: usize,
    rng: &mut Rng,
) -> Result<TrainingBatch, WoganError> {
    let partition = bin_tests(rho, q, n_bins)?;
    let size = size.min(rho.len());
    let mut bins = partition.bins.clone();
    let mut picks = Vec::with_capacity(size);
    for &t in new {
        let drawn = sample_bin_index(&partition.weights, rng);
        let Some(bin) = bins.iter().position(|b| b.contains(&t)) else {
            continue;
        };
        if bin <= drawn && picks.len() < size {
            bins[bin].retain(|&i| i != t);
            picks.push(Pick::New { index: t, bin, drawn });
        }
    }
    while picks.len() < size {
        let drawn = sample_bin_index(&partition.weights, rng);
        let mut bin = drawn;
        while bins[bin].is_empty() {
            bin = (bin + 1) % bins.len();
        }
        let k = rng.gen_range(0..bins[bin].len());
        let index = bins[bin].remove(k);
        picks.push(Pick::Bin { index, bin, drawn });
    }
    Ok(TrainingBatch {
        picks,
        partition: Some(partition),
        quantile: Some(q),
    })
}

/// `min(size, n)` distinct records drawn uniformly.
pub fn uniform_sample(n: usize, size: usize, rng: &mut Rng) -> TrainingBatch {
    let picks = index::sample(rng, n, size.min(n))
        .into_iter()
        .map(|index| Pick::Uniform { index })
        .collect();
    TrainingBatch {
        picks,
        partition: None,
        quantile: None,
    }
}

/// Checks every pick of `batch` against its partition and the NEW list.
pub fn audit_batch(batch: &TrainingBatch, new: &[usize]) -> Result<(), String> {
    let mut seen = std::collections::BTreeSet::new();
    for p in &batch.picks {
        if !seen.insert(p.index()) {
            return Err(format!("record {} picked twice", p.index()));
        }
        match (*p, &batch.partition) {
            (Pick::Uniform { .. }, None) => {}
            (Pick::New { index, bin, drawn }, Some(part)) => {
                if !new.contains(&index) {
                    return Err(format!("record {index} is not NEW"));
                }
                if part.bin_of(index) != Some(bin) || bin > drawn || bin == part.sink() {
                    return Err(format!("NEW record {index} in bin {bin} fails against draw {drawn}"));
                }
            }
            (Pick::Bin { index, bin, drawn }, Some(part)) => {
                if part.bin_of(index) != Some(bin) {
                    return Err(format!("record {index} not in bin {bin}"));
                }
                if part.weights[drawn] == 0.0 && part.weights.iter().any(|w| *w > 0.0) {
                    return Err(format!("bin {drawn} has zero weight"));
                }
            }
            _ => return Err("pick kind does not match the batch kind".into()),
        }
    }
    Ok(())
}
