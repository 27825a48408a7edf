//! Evaluation metrics: rating error, classification scores, rank correlation
//! with bootstrap intervals, temporal click bands, rating distributions, and
//! context-conditioned genre shifts.

pub mod experiments;

use crate::domain::{Action, TimeBand, Trajectory};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("input length mismatch: {0} vs {1}")]
    ShapeError(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("statistic undefined: {0}")]
    Undefined(String),
    #[error("strategy keys mismatch: {0:?}")]
    KeyMismatch(Vec<String>),
    #[error("bad configuration: {0}")]
    ConfigError(String),
}

/// One experiment's results: parameters, aggregate metrics, per-seed values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub experiment: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_seed: BTreeMap<String, BTreeMap<String, f64>>,
}

impl MetricsReport {
    pub fn new(experiment: impl Into<String>) -> Self {
        Self { experiment: experiment.into(), ..Default::default() }
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn param(&mut self, name: impl Into<String>, value: impl Serialize) {
        self.parameters.insert(
            name.into(),
            serde_json::to_value(value).expect("parameter serializes"),
        );
    }

    /// All declared metric values are finite.
    pub fn all_finite(&self) -> bool {
        self.metrics.values().all(|v| v.is_finite())
            && self.per_seed.values().flat_map(|m| m.values()).all(|v| v.is_finite())
    }
}

/// Root-mean-square error and mean absolute error.
pub fn rmse_mae(predictions: &[f64], truths: &[f64]) -> Result<(f64, f64), MetricsError> {
    if predictions.len() != truths.len() {
        return Err(MetricsError::ShapeError(predictions.len(), truths.len()));
    }
    if predictions.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = predictions.len() as f64;
    let mut square_sum = 0.0;
    let mut abs_sum = 0.0;
    for (p, t) in predictions.iter().zip(truths) {
        let e = p - t;
        square_sum += e * e;
        abs_sum += e.abs();
    }
    Ok(((square_sum / n).sqrt(), abs_sum / n))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Averaging {
    Binary { positive: String },
    Macro,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Standard classification metrics. Zero-denominator classes score 0 and are
/// logged.
pub fn classification_metrics(
    truths: &[String],
    predictions: &[String],
    averaging: &Averaging,
) -> Result<ClassificationScores, MetricsError> {
    if truths.len() != predictions.len() {
        return Err(MetricsError::ShapeError(truths.len(), predictions.len()));
    }
    if truths.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let total = truths.len() as f64;
    let correct = truths.iter().zip(predictions).filter(|(t, p)| t == p).count() as f64;
    let accuracy = correct / total;

    let classes: BTreeSet<&String> = truths.iter().chain(predictions.iter()).collect();
    let per_class = |class: &String| -> (f64, f64, f64, f64) {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fn_ = 0.0;
        let mut support = 0.0;
        for (t, p) in truths.iter().zip(predictions) {
            if t == class {
                support += 1.0;
                if p == class {
                    tp += 1.0;
                } else {
                    fn_ += 1.0;
                }
            } else if p == class {
                fp += 1.0;
            }
        }
        let precision = if tp + fp > 0.0 {
            tp / (tp + fp)
        } else {
            log::warn!("class {class}: zero predicted, precision scored 0");
            0.0
        };
        let recall = if tp + fn_ > 0.0 {
            tp / (tp + fn_)
        } else {
            log::warn!("class {class}: zero support, recall scored 0");
            0.0
        };
        let f1 =
            if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        (precision, recall, f1, support)
    };

    let (precision, recall, f1) = match averaging {
        Averaging::Binary { positive } => {
            let (p, r, f, _) = per_class(positive);
            (p, r, f)
        }
        Averaging::Macro => {
            let k = classes.len() as f64;
            let mut sums = (0.0, 0.0, 0.0);
            for class in &classes {
                let (p, r, f, _) = per_class(class);
                sums.0 += p;
                sums.1 += r;
                sums.2 += f;
            }
            (sums.0 / k, sums.1 / k, sums.2 / k)
        }
        Averaging::Weighted => {
            let mut sums = (0.0, 0.0, 0.0);
            for class in &classes {
                let (p, r, f, support) = per_class(class);
                let weight = support / total;
                sums.0 += weight * p;
                sums.1 += weight * r;
                sums.2 += weight * f;
            }
            sums
        }
    };
    Ok(ClassificationScores { accuracy, precision, recall, f1 })
}

/// Mid-rank assignment (average rank for ties), 1-based.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut index = 0;
    while index < n {
        let mut end = index;
        while end + 1 < n && values[order[end + 1]] == values[order[index]] {
            end += 1;
        }
        // Average of 1-based positions index+1 ..= end+1.
        let rank = (index + 1 + end + 1) as f64 / 2.0;
        for &position in &order[index..=end] {
            ranks[position] = rank;
        }
        index = end + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson over mid-ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, MetricsError> {
    if xs.len() != ys.len() {
        return Err(MetricsError::ShapeError(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(MetricsError::Undefined("fewer than 2 points".into()));
    }
    let rank_x = mid_ranks(xs);
    let rank_y = mid_ranks(ys);
    let n = xs.len() as f64;
    let mean_x = rank_x.iter().sum::<f64>() / n;
    let mean_y = rank_y.iter().sum::<f64>() / n;
    let mut covariance = 0.0;
    let mut variance_x = 0.0;
    let mut variance_y = 0.0;
    for (x, y) in rank_x.iter().zip(&rank_y) {
        covariance += (x - mean_x) * (y - mean_y);
        variance_x += (x - mean_x) * (x - mean_x);
        variance_y += (y - mean_y) * (y - mean_y);
    }
    if variance_x == 0.0 || variance_y == 0.0 {
        return Err(MetricsError::Undefined("zero rank variance".into()));
    }
    Ok(covariance / (variance_x * variance_y).sqrt())
}

/// Seeded percentile bootstrap interval for the Spearman correlation.
pub fn spearman_bootstrap_ci(
    xs: &[f64],
    ys: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64), MetricsError> {
    use rand::Rng;
    if xs.len() != ys.len() {
        return Err(MetricsError::ShapeError(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(MetricsError::Undefined("fewer than 2 points".into()));
    }
    let mut rng = crate::seeds::rng(seed, "bootstrap", &[]);
    let n = xs.len();
    let mut rhos = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut sample_x = Vec::with_capacity(n);
        let mut sample_y = Vec::with_capacity(n);
        for _ in 0..n {
            let index = rng.gen_range(0..n);
            sample_x.push(xs[index]);
            sample_y.push(ys[index]);
        }
        if let Ok(rho) = spearman(&sample_x, &sample_y) {
            rhos.push(rho);
        }
    }
    if rhos.is_empty() {
        return Err(MetricsError::Undefined("all bootstrap resamples degenerate".into()));
    }
    rhos.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pick = |q: f64| rhos[((rhos.len() - 1) as f64 * q).round() as usize];
    Ok((pick(0.025), pick(0.975)))
}

/// Click shares over (Morning, Afternoon, Evening, Night). Zero clicks yield
/// all-zero shares with the flag set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandShares {
    pub shares: [f64; 4],
    pub total_clicks: u64,
}

pub fn temporal_ctr(trajectories: &[Trajectory]) -> BandShares {
    let mut counts = [0u64; 4];
    for trajectory in trajectories {
        let band = TimeBand::from_minute_of_day(trajectory.context.temporal.minute_of_day);
        let clicks = trajectory
            .steps
            .iter()
            .filter(|s| matches!(s.action, Action::ClickItem { .. } | Action::WebClick { .. }))
            .count() as u64;
        counts[band.index()] += clicks;
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        log::warn!("temporal_ctr: zero clicks");
        return BandShares { shares: [0.0; 4], total_clicks: 0 };
    }
    BandShares {
        shares: [0, 1, 2, 3].map(|i| counts[i] as f64 / total as f64),
        total_clicks: total,
    }
}

/// Normalized histogram over ratings 1..5.
pub fn rating_distribution(ratings: &[u8]) -> Result<[f64; 5], MetricsError> {
    if ratings.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut counts = [0u64; 5];
    for &rating in ratings {
        if !(1..=5).contains(&rating) {
            return Err(MetricsError::ConfigError(format!("rating {rating} ∉ 1..5")));
        }
        counts[rating as usize - 1] += 1;
    }
    let total = ratings.len() as f64;
    Ok([0, 1, 2, 3, 4].map(|i| counts[i] as f64 / total))
}

/// Total variation distance between two normalized histograms.
pub fn tv_distance(h1: &[f64; 5], h2: &[f64; 5]) -> f64 {
    0.5 * h1.iter().zip(h2).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// One positive ("liked") interaction with its genre labels and context label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikedEvent {
    pub categories: Vec<String>,
    pub context_label: String,
}

/// ln(p(g|c) / p(g|all)) with add-one smoothing over the observed genre set.
pub fn log_freq_ratio(
    events: &[LikedEvent],
    genre: &str,
    context_label: &str,
) -> Result<f64, MetricsError> {
    if events.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let genres: BTreeSet<&str> =
        events.iter().flat_map(|e| e.categories.iter().map(|c| c.as_str())).collect();
    let g = genres.len() as f64;
    let overall_count =
        events.iter().filter(|e| e.categories.iter().any(|c| c == genre)).count() as f64;
    if overall_count == 0.0 {
        return Err(MetricsError::Undefined(format!("genre {genre} absent from liked set")));
    }
    let in_context: Vec<&LikedEvent> =
        events.iter().filter(|e| e.context_label == context_label).collect();
    if in_context.is_empty() {
        return Err(MetricsError::Undefined(format!("no liked events in context {context_label}")));
    }
    let context_count =
        in_context.iter().filter(|e| e.categories.iter().any(|c| c == genre)).count() as f64;
    let p_conditional = (context_count + 1.0) / (in_context.len() as f64 + g);
    let p_marginal = (overall_count + 1.0) / (events.len() as f64 + g);
    Ok((p_conditional / p_marginal).ln())
}

/// Exact structural action match, including ids and input text.
pub fn action_match(predicted: &Action, truth: &Action) -> bool {
    predicted == truth
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionOutcome {
    Purchase,
    Terminate,
}

/// Session outcome from the terminal action tag.
pub fn session_outcome(trajectory: &Trajectory) -> SessionOutcome {
    match &trajectory.terminal_action {
        Action::WebClick { semantic_id } if crate::domain::is_purchase_tagged(semantic_id) => {
            SessionOutcome::Purchase
        }
        _ => SessionOutcome::Terminate,
    }
}
