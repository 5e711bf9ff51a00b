//! Scoring decoded crossings and patterns against ground truth.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::{nearest_crossing, BinaryPattern, CrossPoint, YarnGrid};

/// How predicted points are paired with truth points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchRule {
    /// Closest remaining pair first; every prediction is used at most once.
    #[default]
    OneToOne,
    /// Each truth point independently takes its nearest prediction, which
    /// may also serve other truth points.
    ManyToOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub s: f64,
    pub total: usize,
    pub correct: usize,
    pub error: usize,
    pub missed: usize,
    pub correct_rate: f64,
    pub error_rate: f64,
    /// `1 - correct_rate - error_rate`, so that the three rates sum to exactly 1.
    pub missed_rate: f64,
    /// `(truth index, prediction index, distance)`.
    pub pairs: Vec<(usize, usize, f64)>,
}

impl MatchReport {
    fn from_pairs(truth: &[CrossPoint], pred: &[CrossPoint], s: f64, mut pairs: Vec<(usize, usize, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let total = truth.len();
        let correct = pairs.iter().filter(|(t, p, _)| truth[*t].v == pred[*p].v).count();
        let error = pairs.len() - correct;
        let correct_rate = correct as f64 / total as f64;
        let error_rate = error as f64 / total as f64;
        Self {
            s,
            total,
            correct,
            error,
            missed: total - pairs.len(),
            correct_rate,
            error_rate,
            missed_rate: 1.0 - (correct_rate + error_rate),
            pairs,
        }
    }
}

/// Pairs each truth point with a prediction within distance `s`.
///
/// A paired truth point is correct when the values agree and an error when
/// they differ; unpaired truth points are missed.
pub fn match_points(truth: &[CrossPoint], pred: &[CrossPoint], s: f64, rule: MatchRule) -> Result<MatchReport> {
    if truth.is_empty() {
        return Err(Error::InvalidInput("truth set is empty".into()));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("s must be positive, got {s}")));
    }
    let pairs = match rule {
        MatchRule::ManyToOne => truth
            .iter()
            .enumerate()
            .filter_map(|(t, p)| nearest_crossing(pred, p.x, p.y).filter(|(_, d)| *d <= s).map(|(i, d)| (t, i, d)))
            .collect(),
        MatchRule::OneToOne => {
            let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
            for (t, a) in truth.iter().enumerate() {
                for (p, b) in pred.iter().enumerate() {
                    let d = a.distance(b.x, b.y);
                    if d <= s {
                        candidates.push((t, p, d));
                    }
                }
            }
            candidates.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
            let mut truth_used = vec![false; truth.len()];
            let mut pred_used = vec![false; pred.len()];
            let mut pairs = Vec::new();
            for (t, p, d) in candidates {
                if !truth_used[t] && !pred_used[p] {
                    truth_used[t] = true;
                    pred_used[p] = true;
                    pairs.push((t, p, d));
                }
            }
            pairs
        }
    };
    Ok(MatchReport::from_pairs(truth, pred, s, pairs))
}

/// One report per entry of `s_values`.
pub fn roc_curve(truth: &[CrossPoint], pred: &[CrossPoint], s_values: &[f64], rule: MatchRule) -> Result<Vec<MatchReport>> {
    if s_values.is_empty() {
        return Err(Error::InvalidParameter("s_values is empty".into()));
    }
    s_values.iter().map(|&s| match_points(truth, pred, s, rule)).collect()
}

/// Confusion counts with class 1 (weft on top) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PatternReport {
    pub true_zero: usize,
    pub true_one: usize,
    /// Truth 0 predicted as 1.
    pub false_one: usize,
    /// Truth 1 predicted as 0.
    pub false_zero: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl PatternReport {
    pub fn from_counts(true_zero: usize, true_one: usize, false_one: usize, false_zero: usize) -> Self {
        let total = true_zero + true_one + false_one + false_zero;
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let precision = ratio(true_one, true_one + false_one);
        let recall = ratio(true_one, true_one + false_zero);
        Self {
            true_zero,
            true_one,
            false_one,
            false_zero,
            accuracy: ratio(true_zero + true_one, total),
            precision,
            recall,
            // Same as 2PR/(P+R), and defined as 1 when there is nothing to find.
            f_measure: ratio(2 * true_one, 2 * true_one + false_one + false_zero),
        }
    }

    fn tally(pairs: impl IntoIterator<Item = (u8, u8)>) -> Self {
        let mut c = [[0usize; 2]; 2];
        for (truth, pred) in pairs {
            c[truth as usize][pred as usize] += 1;
        }
        Self::from_counts(c[0][0], c[1][1], c[0][1], c[1][0])
    }
}

/// Cell-by-cell comparison of two patterns of equal size.
pub fn pattern_metrics(truth: &BinaryPattern, pred: &BinaryPattern) -> Result<PatternReport> {
    if (truth.rows(), truth.cols()) != (pred.rows(), pred.cols()) {
        return Err(Error::InvalidInput(format!(
            "pattern sizes differ: {}x{} vs {}x{}",
            truth.rows(),
            truth.cols(),
            pred.rows(),
            pred.cols()
        )));
    }
    Ok(PatternReport::tally(truth.cells().iter().copied().zip(pred.cells().iter().copied())))
}

/// Compares a predicted pattern on its own grid with the nearest truth
/// crossing of each grid point.
pub fn pattern_metrics_on_grid(truth: &[CrossPoint], grid: &YarnGrid, pred: &BinaryPattern) -> Result<PatternReport> {
    if truth.is_empty() {
        return Err(Error::InvalidInput("truth set is empty".into()));
    }
    if (grid.weft_y.len(), grid.warp_x.len()) != (pred.rows(), pred.cols()) {
        return Err(Error::InvalidInput(format!(
            "pattern is {}x{} but grid is {}x{}",
            pred.rows(),
            pred.cols(),
            grid.weft_y.len(),
            grid.warp_x.len()
        )));
    }
    Ok(PatternReport::tally(grid.points().map(|(i, j, x, y)| {
        let (t, _) = nearest_crossing(truth, x, y).expect("truth is non-empty");
        (truth[t].v, pred.get(i, j))
    })))
}

/// A cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` with `seed` and cuts it into `k` folds whose sizes differ
/// by at most one; the first `n % k` folds get the extra item.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidInput(format!("cannot split {n} items into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut test = order[start..start + len].to_vec();
        test.sort_unstable();
        let mut train: Vec<usize> = order[..start].iter().chain(&order[start + len..]).copied().collect();
        train.sort_unstable();
        folds.push(Fold { train, test });
        start += len;
    }
    Ok(folds)
}

/// Mean, extremes and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(Summary {
        count: values.len(),
        mean,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        std: var.sqrt(),
    })
}

/// CSV with one row per report.
pub fn reports_to_csv(reports: &[MatchReport]) -> String {
    let mut out = String::from("s,total,correct,error,missed,correct_rate,error_rate,missed_rate\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.s, r.total, r.correct, r.error, r.missed, r.correct_rate, r.error_rate, r.missed_rate
        ));
    }
    out
}
