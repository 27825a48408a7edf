//! Thought-synthesis corpora: Item Disentanglement and Trajectory Alignment
//! records, built per user and exported as line-JSON for external SFT.

use crate::agent::legal_actions;
use crate::backend::{Backend, BackendError, CompletionRequest, TaskTag};
use crate::domain::{
    Action, ContextVector, DomainMode, InteractionRecord, Item, Persona, SessionState, Trajectory,
};
use crate::env::render_action;
use crate::prompts;
use crate::seeds;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ThoughtsError {
    #[error("backend failure: {0}")]
    Backend(#[from] BackendError),
    #[error("io failure on {path}: {source}")]
    IoFailure { path: String, source: std::io::Error },
    #[error("corpus line unparseable: {0}")]
    Corrupt(String),
}

/// Default per-user cap on Item Disentanglement records.
pub const ID_CAP_PER_USER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ThoughtTask {
    #[serde(rename = "ID")]
    ItemDisentanglement,
    #[serde(rename = "TA")]
    TrajectoryAlignment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThoughtInputs {
    pub state_digest: String,
    pub action: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternatives: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    pub persona: String,
    pub history_excerpt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThoughtRecord {
    pub task: ThoughtTask,
    pub agent_id: String,
    pub inputs: ThoughtInputs,
    pub target_rationale: String,
}

fn persona_digest(persona: &Persona) -> String {
    format!("{} y/o {}; prefers: {}", persona.age, persona.occupation, persona.preferences)
}

fn history_excerpt(history: &[(&Item, Option<u8>)], cap: usize) -> String {
    let lines: Vec<String> = history
        .iter()
        .rev()
        .take(cap)
        .map(|(item, rating)| match rating {
            Some(value) => format!("rated {} {}/5", item.title, value),
            None => format!("viewed {}", item.title),
        })
        .collect();
    lines.join("; ")
}

/// Build Item Disentanglement records for one user: up to `cap` rated train
/// interactions (uniform seeded sample when over the cap), each explained by
/// the backend.
pub fn build_id_records(
    persona: &Persona,
    train_interactions: &[&InteractionRecord],
    catalog: &BTreeMap<String, Item>,
    context: Option<&ContextVector>,
    cap: usize,
    seed: u64,
    backend: &dyn Backend,
) -> Result<Vec<ThoughtRecord>, ThoughtsError> {
    let mut rated: Vec<&InteractionRecord> = train_interactions
        .iter()
        .copied()
        .filter(|r| r.rating.is_some() && catalog.contains_key(&r.item_id))
        .collect();
    if rated.is_empty() {
        log::info!("user {} has no rated history; skipping ID records", persona.agent_id);
        return Ok(Vec::new());
    }
    rated.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.item_id.cmp(&b.item_id)));
    if rated.len() > cap {
        let mut rng = seeds::agent_rng(seed, "id-sample", &persona.agent_id, &[]);
        rated.shuffle(&mut rng);
        rated.truncate(cap);
        rated.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.item_id.cmp(&b.item_id)));
    }
    let history: Vec<(&Item, Option<u8>)> =
        rated.iter().map(|r| (&catalog[&r.item_id], r.rating)).collect();
    let excerpt = history_excerpt(&history, 10);
    let context_text =
        context.map(|c| crate::domain::context_text(c, &crate::domain::FactorMask::all()));

    let mut records = Vec::with_capacity(rated.len());
    for interaction in &rated {
        let item = &catalog[&interaction.item_id];
        let rating = interaction.rating.expect("filtered to rated");
        let (system, body) = prompts::thought_item_disentanglement(
            persona,
            context_text.as_deref(),
            item,
            rating,
            &excerpt,
        );
        let request = CompletionRequest::new(TaskTag::ThoughtId, system, body).with_seed(
            seeds::derive(seed, "thought-id", &[
                seeds::hash_str(&persona.agent_id),
                seeds::hash_str(&interaction.item_id),
            ]),
        );
        let response = backend.complete(&request)?;
        records.push(ThoughtRecord {
            task: ThoughtTask::ItemDisentanglement,
            agent_id: persona.agent_id.clone(),
            inputs: ThoughtInputs {
                state_digest: format!("item {} rated {rating}/5", item.item_id),
                action: render_action(&Action::Rate {
                    item_id: item.item_id.clone(),
                    value: rating,
                }),
                alternatives: Vec::new(),
                context: context_text.clone(),
                persona: persona_digest(persona),
                history_excerpt: excerpt.clone(),
            },
            target_rationale: response.text.trim().to_string(),
        });
    }
    Ok(records)
}

/// One source step for trajectory alignment: the state, the taken action, and
/// the legal-action set it was taken from.
pub struct TaStep {
    pub state_digest: String,
    pub action: Action,
    pub legal_actions: Vec<String>,
    pub context: Option<String>,
}

/// Build Trajectory Alignment records from session steps: one record per
/// step, alternatives = legal actions minus the taken action.
pub fn build_ta_records(
    persona: &Persona,
    steps: &[TaStep],
    history: &str,
    backend: &dyn Backend,
) -> Result<Vec<ThoughtRecord>, ThoughtsError> {
    let mut records = Vec::with_capacity(steps.len());
    for (index, step) in steps.iter().enumerate() {
        if step.legal_actions.is_empty() {
            log::warn!("step {index} for {} has no legal-action set; skipped", persona.agent_id);
            continue;
        }
        let action_text = render_action(&step.action);
        let alternatives: Vec<String> =
            step.legal_actions.iter().filter(|a| **a != action_text).cloned().collect();
        let (system, body) = prompts::thought_trajectory_alignment(
            persona,
            step.context.as_deref(),
            &step.state_digest,
            &action_text,
            &alternatives,
            history,
        );
        let request = CompletionRequest::new(TaskTag::ThoughtTa, system, body).with_seed(
            seeds::derive(0, "thought-ta", &[seeds::hash_str(&persona.agent_id), index as u64]),
        );
        let response = backend.complete(&request)?;
        records.push(ThoughtRecord {
            task: ThoughtTask::TrajectoryAlignment,
            agent_id: persona.agent_id.clone(),
            inputs: ThoughtInputs {
                state_digest: step.state_digest.clone(),
                action: action_text,
                alternatives,
                context: step.context.clone(),
                persona: persona_digest(persona),
                history_excerpt: history.to_string(),
            },
            target_rationale: response.text.trim().to_string(),
        });
    }
    Ok(records)
}

/// TA sources from logged trajectories.
pub fn ta_steps_from_trajectory(trajectory: &Trajectory, mode: DomainMode) -> Vec<TaStep> {
    trajectory
        .steps
        .iter()
        .map(|step| {
            let state = reconstruct_state(&step.state_digest, mode);
            let mut legal = legal_actions(&state, true);
            let action_text = render_action(&step.action);
            if !legal.contains(&action_text) {
                legal.push(action_text);
            }
            TaStep {
                state_digest: step.state_digest.clone(),
                action: step.action.clone(),
                legal_actions: legal,
                context: Some(crate::domain::context_text(
                    &trajectory.context,
                    &crate::domain::FactorMask::all(),
                )),
            }
        })
        .collect()
}

fn reconstruct_state(digest: &str, mode: DomainMode) -> SessionState {
    // Digest format: "page N items [a,b,c] expanded=x".
    let page_number = digest
        .strip_prefix("page ")
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|n| n.parse().ok())
        .unwrap_or(1);
    let ids: Vec<String> = digest
        .split_once('[')
        .and_then(|(_, rest)| rest.split_once(']'))
        .map(|(inside, _)| {
            inside.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
        })
        .unwrap_or_default();
    let expanded_item = digest.split_once("expanded=").map(|(_, id)| id.trim().to_string());
    SessionState {
        mode,
        page_number,
        items: ids
            .into_iter()
            .map(|id| Item {
                item_id: id.clone(),
                title: id,
                description: String::new(),
                categories: Vec::new(),
                brand: None,
                price: None,
                stat_count: 0,
                stat_mean_rating: None,
            })
            .collect(),
        page_context: String::new(),
        user_context: neutral_context(),
        expanded_item,
        interactive_elements: match mode {
            DomainMode::Webshop => vec!["purchase_cart".into(), "search_box".into()],
            DomainMode::Recommendation => Vec::new(),
        },
        terminated: false,
        own_ratings: BTreeMap::new(),
    }
}

fn neutral_context() -> ContextVector {
    ContextVector {
        temporal: crate::domain::TemporalContext { minute_of_day: 0, day_of_week: 0 },
        location: "home".into(),
        situational: crate::domain::SituationalContext {
            latest_activity: "daily routine".into(),
            mood: crate::domain::Mood::Neutral,
            need_level: 0.5,
            energy_level: 0.5,
        },
        goal: "browse".into(),
        constraint: crate::domain::ConstraintContext { budget: None, time_available_minutes: 30 },
    }
}

/// TA sources reconstructed from rating-only datasets: rated items arranged
/// into synthetic pages with Rate actions. Flagged in the manifest.
pub fn ta_steps_from_ratings(
    train_interactions: &[&InteractionRecord],
    catalog: &BTreeMap<String, Item>,
    page_size: usize,
) -> Vec<TaStep> {
    let mut rated: Vec<&InteractionRecord> = train_interactions
        .iter()
        .copied()
        .filter(|r| r.rating.is_some() && catalog.contains_key(&r.item_id))
        .collect();
    rated.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.item_id.cmp(&b.item_id)));
    let mut steps = Vec::new();
    for (page_index, chunk) in rated.chunks(page_size.max(1)).enumerate() {
        let ids: Vec<&str> = chunk.iter().map(|r| r.item_id.as_str()).collect();
        let digest = format!("page {} items [{}]", page_index + 1, ids.join(","));
        let state = reconstruct_state(&digest, DomainMode::Recommendation);
        let legal = legal_actions(&state, true);
        for interaction in chunk {
            let action = Action::Rate {
                item_id: interaction.item_id.clone(),
                value: interaction.rating.expect("filtered to rated"),
            };
            let mut legal = legal.clone();
            let action_text = render_action(&action);
            if !legal.contains(&action_text) {
                legal.push(action_text);
            }
            steps.push(TaStep {
                state_digest: digest.clone(),
                action,
                legal_actions: legal,
                context: None,
            });
        }
    }
    steps
}

/// Sidecar manifest written next to each corpus export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub total: usize,
    pub per_task: BTreeMap<String, usize>,
    pub per_user: BTreeMap<String, usize>,
    /// True when TA sources were reconstructed from ratings, not real sessions.
    pub reconstructed_sessions: bool,
    /// Training hyperparameters an external SFT consumer should apply.
    pub sft_metadata: SftMetadata,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SftMetadata {
    pub epochs: u32,
    pub batch_size: u32,
    pub learning_rate: f64,
    pub optimizer: String,
    pub max_sequence_length: u32,
    pub lora_rank: u32,
    pub lora_alpha: u32,
}

impl Default for SftMetadata {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 16,
            learning_rate: 1e-5,
            optimizer: "AdamW".into(),
            max_sequence_length: 4096,
            lora_rank: 8,
            lora_alpha: 16,
        }
    }
}

/// Write records as line-JSON plus a sidecar manifest; returns the count.
pub fn export_jsonl(
    records: &[ThoughtRecord],
    path: &Path,
    reconstructed_sessions: bool,
) -> Result<usize, ThoughtsError> {
    let io_err = |source: std::io::Error| ThoughtsError::IoFailure {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut writer = std::io::BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).expect("thought record serializes");
        writeln!(writer, "{line}").map_err(io_err)?;
    }
    writer.flush().map_err(io_err)?;

    let mut per_task: BTreeMap<String, usize> = BTreeMap::new();
    let mut per_user: BTreeMap<String, usize> = BTreeMap::new();
    for record in records {
        let task = match record.task {
            ThoughtTask::ItemDisentanglement => "ID",
            ThoughtTask::TrajectoryAlignment => "TA",
        };
        *per_task.entry(task.to_string()).or_default() += 1;
        *per_user.entry(record.agent_id.clone()).or_default() += 1;
    }
    let manifest = CorpusManifest {
        total: records.len(),
        per_task,
        per_user,
        reconstructed_sessions,
        sft_metadata: SftMetadata::default(),
    };
    let manifest_path = path.with_extension("manifest.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(|source| ThoughtsError::IoFailure {
        path: manifest_path.display().to_string(),
        source,
    })?;
    Ok(records.len())
}

/// Read a corpus back; inverse of `export_jsonl`.
pub fn import_jsonl(path: &Path) -> Result<Vec<ThoughtRecord>, ThoughtsError> {
    let file = std::fs::File::open(path).map_err(|source| ThoughtsError::IoFailure {
        path: path.display().to_string(),
        source,
    })?;
    let mut records = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| ThoughtsError::IoFailure {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        records
            .push(serde_json::from_str(&line).map_err(|e| ThoughtsError::Corrupt(e.to_string()))?);
    }
    Ok(records)
}
