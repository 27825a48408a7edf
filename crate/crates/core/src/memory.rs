//! Episodic memory with lexical-overlap/recency retrieval, and emotional
//! memory with clamped bounded updates.

use crate::domain::{tokenize, EmotionalState};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MemoryError {
    #[error("step index {new} decreases below last {last}")]
    OrderViolation { last: u64, new: u64 },
}

/// What kind of episode a record describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    View,
    Rate,
    Click,
    Reflection,
    Preference,
}

/// One remembered episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodicRecord {
    pub step_index: u64,
    pub kind: RecordKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_id: Option<String>,
}

/// Ordered episodic store for one agent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodicMemory {
    pub agent_id: String,
    pub records: Vec<EpisodicRecord>,
}

/// Retrieval weight on lexical overlap; the remainder goes to recency.
pub const RETRIEVAL_OVERLAP_WEIGHT: f64 = 0.7;

impl EpisodicMemory {
    pub fn new(agent_id: impl Into<String>) -> Self {
        Self { agent_id: agent_id.into(), records: Vec::new() }
    }

    pub fn last_step_index(&self) -> Option<u64> {
        self.records.last().map(|r| r.step_index)
    }

    /// Append a record; step indices must be non-decreasing.
    pub fn append(&mut self, record: EpisodicRecord) -> Result<(), MemoryError> {
        if let Some(last) = self.last_step_index() {
            if record.step_index < last {
                return Err(MemoryError::OrderViolation { last, new: record.step_index });
            }
        }
        self.records.push(record);
        Ok(())
    }

    /// True if any record references this item id.
    pub fn contains_item(&self, item_id: &str) -> bool {
        self.records.iter().any(|r| r.item_id.as_deref() == Some(item_id))
    }

    /// Item ids mentioned anywhere in memory, deduplicated and ordered.
    pub fn item_ids(&self) -> BTreeSet<String> {
        self.records.iter().filter_map(|r| r.item_id.clone()).collect()
    }

    /// Top-k records by `0.7·overlap(query, text) + 0.3·recency`, ties broken
    /// by higher step index, then by later list position.
    pub fn retrieve(&self, query: &str, k: usize) -> Vec<EpisodicRecord> {
        if k == 0 || self.records.is_empty() {
            return Vec::new();
        }
        let query_tokens: BTreeSet<String> = tokenize(query).into_iter().collect();
        let max_step = self.records.iter().map(|r| r.step_index).max().unwrap_or(0);
        let mut scored: Vec<(f64, u64, usize)> = self
            .records
            .iter()
            .enumerate()
            .map(|(position, record)| {
                let score = retrieval_score(&query_tokens, record, max_step);
                (score, record.step_index, position)
            })
            .collect();
        scored.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.1.cmp(&a.1))
                .then(b.2.cmp(&a.2))
        });
        scored.into_iter().take(k).map(|(_, _, position)| self.records[position].clone()).collect()
    }
}

fn retrieval_score(query_tokens: &BTreeSet<String>, record: &EpisodicRecord, max_step: u64) -> f64 {
    let record_tokens: BTreeSet<String> = tokenize(&record.text).into_iter().collect();
    let overlap = if query_tokens.is_empty() {
        0.0
    } else {
        query_tokens.intersection(&record_tokens).count() as f64 / query_tokens.len() as f64
    };
    let recency = (1 + record.step_index) as f64 / (1 + max_step) as f64;
    RETRIEVAL_OVERLAP_WEIGHT * overlap + (1.0 - RETRIEVAL_OVERLAP_WEIGHT) * recency
}

/// Per-coordinate additive deltas for an emotional update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EmotionDeltas {
    pub fatigue: f64,
    pub satisfaction: f64,
    pub curiosity: f64,
    pub boredom: f64,
}

/// Bounded affect state plus the update log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionalMemory {
    pub state: EmotionalState,
    pub update_log: Vec<(u64, EmotionDeltas)>,
}

impl Default for EmotionalMemory {
    fn default() -> Self {
        Self { state: EmotionalState::neutral(), update_log: Vec::new() }
    }
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

impl EmotionalMemory {
    /// Apply clamped deltas and log them.
    pub fn update(&mut self, step_index: u64, deltas: EmotionDeltas) {
        self.state.fatigue = clamp01(self.state.fatigue + deltas.fatigue);
        self.state.satisfaction = clamp01(self.state.satisfaction + deltas.satisfaction);
        self.state.curiosity = clamp01(self.state.curiosity + deltas.curiosity);
        self.state.boredom = clamp01(self.state.boredom + deltas.boredom);
        self.update_log.push((step_index, deltas));
    }

    /// Set coordinates to a target state, logging the difference as deltas.
    pub fn set_to(&mut self, step_index: u64, target: EmotionalState) {
        let deltas = EmotionDeltas {
            fatigue: target.fatigue - self.state.fatigue,
            satisfaction: target.satisfaction - self.state.satisfaction,
            curiosity: target.curiosity - self.state.curiosity,
            boredom: target.boredom - self.state.boredom,
        };
        self.update(step_index, deltas);
    }
}

/// One agent's full memory bundle, the persistence unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySnapshot {
    pub agent_id: String,
    pub episodic: EpisodicMemory,
    pub emotional: EmotionalMemory,
}
