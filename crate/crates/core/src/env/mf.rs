//! Biased matrix factorization trained by SGD on squared error with L2
//! regularization. Predictions are μ + b_u + b_i + p_u·q_i clamped to [1,5].

use crate::domain::InteractionRecord;
use crate::seeds;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MfError {
    #[error("no rated records to train on")]
    EmptyTraining,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfParams {
    pub dimension: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub regularization: f64,
}

impl Default for MfParams {
    fn default() -> Self {
        Self { dimension: 32, learning_rate: 0.005, epochs: 30, regularization: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfModel {
    pub dimension: usize,
    pub global_mean: f64,
    pub user_bias: BTreeMap<String, f64>,
    pub item_bias: BTreeMap<String, f64>,
    pub user_factors: BTreeMap<String, Vec<f64>>,
    pub item_factors: BTreeMap<String, Vec<f64>>,
}

impl MfModel {
    /// Raw score before clamping; missing users/items contribute zero terms.
    pub fn score(&self, user_id: &str, item_id: &str) -> f64 {
        let mut score = self.global_mean;
        score += self.user_bias.get(user_id).copied().unwrap_or(0.0);
        score += self.item_bias.get(item_id).copied().unwrap_or(0.0);
        if let (Some(p), Some(q)) = (self.user_factors.get(user_id), self.item_factors.get(item_id))
        {
            score += dot(p, q);
        }
        score
    }

    /// Predicted rating clamped to the 1..5 scale.
    pub fn predict(&self, user_id: &str, item_id: &str) -> f64 {
        self.score(user_id, item_id).clamp(1.0, 5.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A float-valued training observation.
pub type RatedTriple = (String, String, f64);

pub fn triples_from_records(records: &[InteractionRecord]) -> Vec<RatedTriple> {
    records
        .iter()
        .filter_map(|r| r.rating.map(|v| (r.user_id.clone(), r.item_id.clone(), v as f64)))
        .collect()
}

/// Train on integer-rated interaction records.
pub fn train_mf(
    records: &[InteractionRecord],
    params: &MfParams,
    seed: u64,
) -> Result<MfModel, MfError> {
    train_triples(&triples_from_records(records), params, seed)
}

/// Train on float triples (the kernel `train_mf` wraps).
pub fn train_triples(
    triples: &[RatedTriple],
    params: &MfParams,
    seed: u64,
) -> Result<MfModel, MfError> {
    if triples.is_empty() {
        return Err(MfError::EmptyTraining);
    }
    let mut rng = seeds::rng(seed, "mf-init", &[]);
    let global_mean = triples.iter().map(|(_, _, r)| r).sum::<f64>() / triples.len() as f64;

    let mut model = MfModel {
        dimension: params.dimension,
        global_mean,
        user_bias: BTreeMap::new(),
        item_bias: BTreeMap::new(),
        user_factors: BTreeMap::new(),
        item_factors: BTreeMap::new(),
    };
    let scale = 0.1 / (params.dimension as f64).sqrt();
    for (user, item, _) in triples {
        model.user_bias.entry(user.clone()).or_insert(0.0);
        model.item_bias.entry(item.clone()).or_insert(0.0);
        model
            .user_factors
            .entry(user.clone())
            .or_insert_with(|| (0..params.dimension).map(|_| rng.gen_range(-scale..scale)).collect());
        model
            .item_factors
            .entry(item.clone())
            .or_insert_with(|| (0..params.dimension).map(|_| rng.gen_range(-scale..scale)).collect());
    }

    let mut order: Vec<usize> = (0..triples.len()).collect();
    let mut epoch_rng = seeds::rng(seed, "mf-epochs", &[]);
    for _ in 0..params.epochs {
        order.shuffle(&mut epoch_rng);
        for &index in &order {
            let (user, item, rating) = &triples[index];
            let error = rating - model.score(user, item);
            let user_bias = model.user_bias.get_mut(user).unwrap();
            *user_bias += params.learning_rate * (error - params.regularization * *user_bias);
            let item_bias = model.item_bias.get_mut(item).unwrap();
            *item_bias += params.learning_rate * (error - params.regularization * *item_bias);
            // Split borrows: take p out, update against q, put back.
            let mut p = std::mem::take(model.user_factors.get_mut(user).unwrap());
            let q = model.item_factors.get_mut(item).unwrap();
            for d in 0..params.dimension {
                let (pd, qd) = (p[d], q[d]);
                p[d] += params.learning_rate * (error * qd - params.regularization * pd);
                q[d] += params.learning_rate * (error * pd - params.regularization * qd);
            }
            *model.user_factors.get_mut(user).unwrap() = p;
        }
    }
    Ok(model)
}

pub fn train_rmse(model: &MfModel, triples: &[RatedTriple]) -> f64 {
    let sse: f64 = triples
        .iter()
        .map(|(u, i, r)| {
            let e = r - model.predict(u, i);
            e * e
        })
        .sum();
    (sse / triples.len() as f64).sqrt()
}

/// Full objective: Σ (r − score)² + λ(Σb_u² + Σb_i² + Σ‖p‖² + Σ‖q‖²).
pub fn objective(model: &MfModel, triples: &[RatedTriple], regularization: f64) -> f64 {
    let sse: f64 = triples
        .iter()
        .map(|(u, i, r)| {
            let e = r - model.score(u, i);
            e * e
        })
        .sum();
    let reg: f64 = model.user_bias.values().map(|b| b * b).sum::<f64>()
        + model.item_bias.values().map(|b| b * b).sum::<f64>()
        + model.user_factors.values().flat_map(|p| p.iter().map(|x| x * x)).sum::<f64>()
        + model.item_factors.values().flat_map(|q| q.iter().map(|x| x * x)).sum::<f64>();
    sse + regularization * reg
}

/// Analytic gradient of `objective` with respect to every parameter, in the
/// same shapes as the model. Used by the finite-difference check.
pub fn gradient(model: &MfModel, triples: &[RatedTriple], regularization: f64) -> MfModel {
    let mut grad = MfModel {
        dimension: model.dimension,
        global_mean: 0.0,
        user_bias: model.user_bias.keys().map(|k| (k.clone(), 0.0)).collect(),
        item_bias: model.item_bias.keys().map(|k| (k.clone(), 0.0)).collect(),
        user_factors: model
            .user_factors
            .keys()
            .map(|k| (k.clone(), vec![0.0; model.dimension]))
            .collect(),
        item_factors: model
            .item_factors
            .keys()
            .map(|k| (k.clone(), vec![0.0; model.dimension]))
            .collect(),
    };
    for (user, item, rating) in triples {
        let error = rating - model.score(user, item);
        *grad.user_bias.get_mut(user).unwrap() += -2.0 * error;
        *grad.item_bias.get_mut(item).unwrap() += -2.0 * error;
        let p = &model.user_factors[user];
        let q = &model.item_factors[item];
        let gp = grad.user_factors.get_mut(user).unwrap();
        for d in 0..model.dimension {
            gp[d] += -2.0 * error * q[d];
        }
        let gq = grad.item_factors.get_mut(item).unwrap();
        for d in 0..model.dimension {
            gq[d] += -2.0 * error * p[d];
        }
    }
    for (k, g) in grad.user_bias.iter_mut() {
        *g += 2.0 * regularization * model.user_bias[k];
    }
    for (k, g) in grad.item_bias.iter_mut() {
        *g += 2.0 * regularization * model.item_bias[k];
    }
    for (k, g) in grad.user_factors.iter_mut() {
        for d in 0..model.dimension {
            g[d] += 2.0 * regularization * model.user_factors[k][d];
        }
    }
    for (k, g) in grad.item_factors.iter_mut() {
        for d in 0..model.dimension {
            g[d] += 2.0 * regularization * model.item_factors[k][d];
        }
    }
    grad
}
