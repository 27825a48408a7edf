//! The user-agent policy loop: appraise the page, infer internal state,
//! select an action with a thought, step the environment, reflect, repeat
//! until a terminal action or the step cap.

use crate::backend::{
    parse_tagged_f64, parse_tagged_field, parse_tagged_int, Backend, BackendError,
    CompletionRequest, TaskTag,
};
use crate::domain::{
    Action, ContextVector, DomainMode, EmotionalState, FactorMask, Item, Persona, SessionState,
    Trajectory, TrajectoryStep,
};
use crate::env::{self, Session};
use crate::memory::{EmotionDeltas, EmotionalMemory, EpisodicMemory, EpisodicRecord, RecordKind};
use crate::prompts::{self, SessionTelemetry};
use crate::seeds;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("appraisal output unparseable after retry")]
    AppraisalFailure,
    #[error("rating unparseable after retry")]
    RatingFailure,
    #[error("classification label count mismatch after retry")]
    ClassificationFailure,
    #[error("interview rating invalid after retry")]
    InterviewFailure,
    #[error("backend failure: {0}")]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Watch,
    Skip,
}

/// Per-item appraisal outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intention {
    pub item_id: String,
    pub verdict: Verdict,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Sim,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub variant: Variant,
    pub max_steps_per_session: u32,
    pub context_factor_mask: FactorMask,
    pub thought_mode: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Sim,
            max_steps_per_session: 20,
            context_factor_mask: FactorMask::all(),
            thought_mode: true,
        }
    }
}

/// One agent's mutable state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentBundle {
    pub persona: Persona,
    pub episodic: EpisodicMemory,
    pub emotional: EmotionalMemory,
    /// The agent's own item ratings (historical plus simulated).
    #[serde(default)]
    pub ratings: std::collections::BTreeMap<String, u8>,
}

impl AgentBundle {
    pub fn new(persona: Persona) -> Self {
        let episodic = EpisodicMemory::new(persona.agent_id.clone());
        Self {
            persona,
            episodic,
            emotional: EmotionalMemory::default(),
            ratings: std::collections::BTreeMap::new(),
        }
    }

    fn next_step_index(&self) -> u64 {
        self.episodic.last_step_index().map(|s| s + 1).unwrap_or(0)
    }

    /// Populate episodic memory from training interactions and the
    /// preference description.
    pub fn seed_memory(&mut self, history: &[(&Item, Option<u8>)]) {
        let mut step = self.next_step_index();
        let preferences = self.persona.preferences.clone();
        self.episodic
            .append(EpisodicRecord {
                step_index: step,
                kind: RecordKind::Preference,
                text: preferences,
                item_id: None,
            })
            .expect("monotone step index");
        step += 1;
        for (item, rating) in history {
            if let Some(value) = rating {
                self.ratings.insert(item.item_id.clone(), *value);
            }
            let (kind, text) = match rating {
                Some(value) => {
                    (RecordKind::Rate, format!("rated {} {}/5 ({})", item.title, value, item.categories.join(", ")))
                }
                None => (RecordKind::View, format!("viewed {} ({})", item.title, item.categories.join(", "))),
            };
            self.episodic
                .append(EpisodicRecord {
                    step_index: step,
                    kind,
                    text,
                    item_id: Some(item.item_id.clone()),
                })
                .expect("monotone step index");
            step += 1;
        }
    }
}

fn page_items_with_ratings(state: &SessionState) -> Vec<(Item, Option<u8>)> {
    state
        .items
        .iter()
        .map(|item| (item.clone(), state.own_ratings.get(&item.item_id).copied()))
        .collect()
}

/// Appraise every item on the page into WATCH/SKIP intentions.
pub fn appraise_page(
    state: &SessionState,
    persona: &Persona,
    context: &ContextVector,
    mask: &FactorMask,
    memory: &EpisodicMemory,
    backend: &dyn Backend,
) -> Result<Vec<Intention>, AgentError> {
    if state.items.is_empty() {
        return Ok(Vec::new());
    }
    let titles: Vec<&str> = state.items.iter().map(|i| i.title.as_str()).collect();
    let evidence = memory.retrieve(&titles.join(" "), 5);
    let page_items = page_items_with_ratings(state);
    let (system, body) = prompts::appraise(persona, context, mask, &evidence, &page_items);
    let request = CompletionRequest::new(TaskTag::Appraise, system, body)
        .with_seed(seeds::hash_str(&persona.agent_id));
    for attempt in 0..2 {
        let response = backend.complete(&request)?;
        if let Some(intentions) = parse_intentions(&response.text, state) {
            return Ok(intentions);
        }
        if attempt == 0 {
            log::warn!("appraisal parse failed for {}, retrying", persona.agent_id);
        }
    }
    Err(AgentError::AppraisalFailure)
}

fn parse_intentions(text: &str, state: &SessionState) -> Option<Vec<Intention>> {
    let mut parsed: Vec<(String, Verdict, f64)> = Vec::new();
    for line in text.lines() {
        let Some(rest) = line.trim().strip_prefix("INTENTION: ") else { continue };
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() < 2 {
            continue;
        }
        let verdict = match parts[1].to_uppercase().as_str() {
            "WATCH" => Verdict::Watch,
            "SKIP" => Verdict::Skip,
            _ => continue,
        };
        let confidence =
            parts.get(2).and_then(|c| c.parse::<f64>().ok()).unwrap_or(0.5).clamp(0.0, 1.0);
        parsed.push((parts[0].to_string(), verdict, confidence));
    }
    // Exactly one intention per page item, in page order.
    let mut intentions = Vec::with_capacity(state.items.len());
    for item in &state.items {
        let (_, verdict, confidence) =
            parsed.iter().find(|(id, _, _)| id == &item.item_id)?;
        intentions.push(Intention {
            item_id: item.item_id.clone(),
            verdict: *verdict,
            confidence: *confidence,
        });
    }
    Some(intentions)
}

/// Scripted internal-state rule, also the fallback when LLM fields go missing.
pub fn internal_state_rule(
    telemetry: &SessionTelemetry,
    persona: &Persona,
    current: &EmotionalState,
) -> EmotionalState {
    let fatigue = (telemetry.base_fatigue + 0.05 * telemetry.steps_taken as f64).clamp(0.0, 1.0);
    let boredom = if telemetry.page_watch_count > 0 {
        0.0
    } else {
        (telemetry.boredom_before + 0.15).clamp(0.0, 1.0)
    };
    let curiosity = (0.2
        + 0.2 * persona.traits.openness_normalized()
        + 0.3 * telemetry.novelty_fraction)
        .clamp(0.0, 1.0);
    EmotionalState { fatigue, satisfaction: current.satisfaction, curiosity, boredom }
}

/// Infer fatigue/curiosity/boredom from the session so far. Missing fields in
/// the backend reply fall back to the scripted rule, logged.
pub fn infer_internal_state(
    telemetry: &SessionTelemetry,
    persona: &Persona,
    context: &ContextVector,
    mask: &FactorMask,
    current: &EmotionalState,
    backend: &dyn Backend,
) -> Result<EmotionalState, AgentError> {
    let (system, body) = prompts::infer_internal(persona, context, mask, telemetry);
    let request = CompletionRequest::new(TaskTag::Internal, system, body)
        .with_seed(seeds::hash_str(&persona.agent_id));
    let response = backend.complete(&request)?;
    let fatigue = parse_tagged_f64(&response.text, "FATIGUE");
    let curiosity = parse_tagged_f64(&response.text, "CURIOSITY");
    let boredom = parse_tagged_f64(&response.text, "BOREDOM");
    match (fatigue, curiosity, boredom) {
        (Ok(fatigue), Ok(curiosity), Ok(boredom)) => Ok(EmotionalState {
            fatigue: fatigue.clamp(0.0, 1.0),
            satisfaction: current.satisfaction,
            curiosity: curiosity.clamp(0.0, 1.0),
            boredom: boredom.clamp(0.0, 1.0),
        }),
        _ => {
            log::warn!(
                "internal-state fields missing for {}; using scripted rule",
                persona.agent_id
            );
            Ok(internal_state_rule(telemetry, persona, current))
        }
    }
}

/// Legal action strings for the current state (templates for parameterized
/// forms use the page's item ids).
pub fn legal_actions(state: &SessionState, has_more_pages: bool) -> Vec<String> {
    let mut actions = Vec::new();
    if has_more_pages {
        actions.push("[NEXT_PAGE]".to_string());
    }
    if state.page_number > 1 {
        actions.push("[PREVIOUS_PAGE]".to_string());
    }
    for item in &state.items {
        actions.push(format!("[CLICK_ITEM:{}]", item.item_id));
    }
    if let Some(expanded) = &state.expanded_item {
        actions.push(format!("[RATE:{expanded}:<1-5>]"));
    }
    actions.push("[SEARCH:<query>]".to_string());
    actions.push("[EXIT]".to_string());
    if state.mode == DomainMode::Webshop {
        for element in &state.interactive_elements {
            actions.push(format!("click({element})"));
        }
        actions.push("input(<semantic_id>, <text>)".to_string());
        actions.push("terminate".to_string());
        actions.push("[PURCHASE CART]".to_string());
    }
    actions
}

/// Outcome of one action-selection call.
pub struct Selected {
    pub thought: String,
    pub action: Action,
    pub forced: bool,
}

#[allow(clippy::too_many_arguments)]
fn select_action_once(
    view: &prompts::ActView<'_>,
    backend: &dyn Backend,
    correction: Option<&str>,
) -> Result<(String, Option<Action>), AgentError> {
    let (system, mut body) = prompts::select_action(view);
    if let Some(correction) = correction {
        body.push_str(correction);
    }
    let request = CompletionRequest::new(TaskTag::Act, system, body)
        .with_seed(seeds::hash_str(&view.persona.agent_id));
    let response = backend.complete(&request)?;
    let thought = parse_tagged_field(&response.text, "THOUGHT").unwrap_or_default();
    let action_text =
        parse_tagged_field(&response.text, "ACTION").unwrap_or_else(|_| response.text.clone());
    let action = env::parse_action(&action_text)
        .or_else(|_| env::parse_action(&response.text))
        .ok();
    Ok((thought, action))
}

const ACTION_CORRECTION: &str = "\nCORRECTION: the previous reply did not contain a legal action. \
Reply with exactly one action in the grammar [NEXT_PAGE] | [PREVIOUS_PAGE] | [CLICK_ITEM:<item_id>] \
| [SEARCH:<query>] | [RATE:<item_id>:<1-5>] | [EXIT] | [PURCHASE CART] | click(<semantic_id>) | \
input(<semantic_id>, <text>) | terminate.\n";

/// Select an action with its thought. A malformed reply gets one corrective
/// re-prompt quoting the grammar; a second failure forces Exit (logged).
pub fn select_action(
    view: &prompts::ActView<'_>,
    backend: &dyn Backend,
) -> Result<Selected, AgentError> {
    let (thought, action) = select_action_once(view, backend, None)?;
    if let Some(action) = action {
        return Ok(Selected { thought, action, forced: false });
    }
    log::warn!("malformed action from backend for {}; re-prompting", view.persona.agent_id);
    let (thought, action) = select_action_once(view, backend, Some(ACTION_CORRECTION))?;
    match action {
        Some(action) => Ok(Selected { thought, action, forced: false }),
        None => {
            log::warn!("forced exit for {} after corrective re-prompt", view.persona.agent_id);
            Ok(Selected { thought: String::from("(forced exit)"), action: Action::Exit, forced: true })
        }
    }
}

/// Rate one item 1..5. Out-of-range replies get one re-prompt, then clamp;
/// persistent parse failure is an error.
pub fn rate_item(
    item: &Item,
    persona: &Persona,
    context: &ContextVector,
    mask: &FactorMask,
    memory: &EpisodicMemory,
    backend: &dyn Backend,
) -> Result<u8, AgentError> {
    let evidence = memory.retrieve(&item.title, 5);
    let mut last_out_of_range = None;
    for _ in 0..2 {
        let (system, body) = prompts::rate_item(persona, context, mask, &evidence, item);
        let request = CompletionRequest::new(TaskTag::Rate, system, body)
            .with_seed(seeds::hash_str(&persona.agent_id));
        let response = backend.complete(&request)?;
        match parse_tagged_int(&response.text, "RATING") {
            Ok(value) if (1..=5).contains(&value) => return Ok(value as u8),
            Ok(value) => last_out_of_range = Some(value),
            Err(_) => {}
        }
    }
    match last_out_of_range {
        Some(value) => Ok(value.clamp(1, 5) as u8),
        None => Err(AgentError::RatingFailure),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Interacted,
    NotInteracted,
}

/// Classify whether the agent's human counterpart interacted with each item.
pub fn classify_interacted(
    items: &[Item],
    persona: &Persona,
    memory: &EpisodicMemory,
    item_type: &str,
    backend: &dyn Backend,
) -> Result<Vec<Classification>, AgentError> {
    let memory_ids: Vec<String> = memory.item_ids().into_iter().collect();
    let (system, body) = prompts::classify_interacted(persona, &memory_ids, items, item_type);
    let request = CompletionRequest::new(TaskTag::Classify, system, body)
        .with_seed(seeds::hash_str(&persona.agent_id));
    for attempt in 0..2 {
        let response = backend.complete(&request)?;
        if let Some(labels) = parse_labels(&response.text, items) {
            return Ok(labels);
        }
        if attempt == 0 {
            log::warn!("classification parse failed for {}, retrying", persona.agent_id);
        }
    }
    Err(AgentError::ClassificationFailure)
}

fn parse_labels(text: &str, items: &[Item]) -> Option<Vec<Classification>> {
    let mut labeled: Vec<(String, Classification)> = Vec::new();
    for line in text.lines() {
        let Some(rest) = line.trim().strip_prefix("LABEL: ") else { continue };
        let (id, label) = rest.split_once(' ')?;
        let classification = if label.trim().eq_ignore_ascii_case("interacted") {
            Classification::Interacted
        } else if label.trim().eq_ignore_ascii_case("not interacted") {
            Classification::NotInteracted
        } else {
            continue;
        };
        labeled.push((id.to_string(), classification));
    }
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        let (_, classification) = labeled.iter().find(|(id, _)| id == &item.item_id)?;
        out.push(*classification);
    }
    Some(out)
}

/// Short self-reflection appended to episodic memory after a step.
pub fn reflect(
    persona: &Persona,
    action: &Action,
    acted_item: Option<(&Item, Option<u8>)>,
    step_index: u64,
    backend: &dyn Backend,
) -> Result<EpisodicRecord, AgentError> {
    let action_text = env::render_action(action);
    let (system, body) = prompts::reflect(persona, &action_text, acted_item);
    let request = CompletionRequest::new(TaskTag::Reflect, system, body)
        .with_seed(seeds::hash_str(&persona.agent_id));
    let response = backend.complete(&request)?;
    let text = response.text.trim().to_string();
    Ok(EpisodicRecord {
        step_index,
        kind: RecordKind::Reflection,
        text: if text.is_empty() { format!("chose {action_text}") } else { text },
        item_id: acted_item.map(|(item, _)| item.item_id.clone()),
    })
}

/// Post-session interview: 1..10 satisfaction rating plus reason.
pub fn post_interview(
    persona: &Persona,
    trajectory: &Trajectory,
    satisfaction: f64,
    backend: &dyn Backend,
) -> Result<(u8, String), AgentError> {
    let log_lines: Vec<String> = trajectory
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| format!("step {}: {}", i + 1, env::render_action(&s.action)))
        .collect();
    let session_log = log_lines.join("\n");
    for _ in 0..2 {
        let (system, body) = prompts::post_interview(persona, &session_log, satisfaction);
        let request = CompletionRequest::new(TaskTag::Interview, system, body)
            .with_seed(seeds::hash_str(&persona.agent_id));
        let response = backend.complete(&request)?;
        if let Ok(rating) = parse_tagged_int(&response.text, "RATING") {
            if (1..=10).contains(&rating) {
                let reason = parse_tagged_field(&response.text, "REASON").unwrap_or_default();
                return Ok((rating as u8, reason));
            }
        }
    }
    Err(AgentError::InterviewFailure)
}

/// Run one full session loop against a live environment session.
pub fn run_session(
    bundle: &mut AgentBundle,
    session: &mut Session<'_>,
    config: &AgentConfig,
    session_id: &str,
    backend: &dyn Backend,
) -> Result<Trajectory, AgentError> {
    let mask = config.context_factor_mask;
    let context = session.state().user_context.clone();
    let base_fatigue = bundle.emotional.state.fatigue;
    let mut steps: Vec<TrajectoryStep> = Vec::new();
    let mut terminal_action = Action::Exit;
    let mut forced_exit = true; // assume cap until a terminal action lands
    let mut complete = true;
    let mut rated_expanded = false;

    for step_count in 0..config.max_steps_per_session {
        let state = session.state().clone();
        let step_index = bundle.next_step_index();

        let loop_result: Result<(Selected, SessionTelemetry), AgentError> = (|| {
            let intentions =
                appraise_page(&state, &bundle.persona, &context, &mask, &bundle.episodic, backend)?;
            let watch_count =
                intentions.iter().filter(|i| i.verdict == Verdict::Watch).count() as u32;
            let novelty_fraction = if state.items.is_empty() {
                0.0
            } else {
                state
                    .items
                    .iter()
                    .filter(|i| !bundle.episodic.contains_item(&i.item_id))
                    .count() as f64
                    / state.items.len() as f64
            };
            let telemetry = SessionTelemetry {
                steps_taken: step_count,
                base_fatigue,
                boredom_before: bundle.emotional.state.boredom,
                page_watch_count: watch_count,
                novelty_fraction,
            };
            let internal = infer_internal_state(
                &telemetry,
                &bundle.persona,
                &context,
                &mask,
                &bundle.emotional.state,
                backend,
            )?;
            bundle.emotional.set_to(step_index, internal);

            let page_items = page_items_with_ratings(&state);
            let intention_rows: Vec<(String, bool, f64)> = intentions
                .iter()
                .map(|i| (i.item_id.clone(), i.verdict == Verdict::Watch, i.confidence))
                .collect();
            let visited: Vec<String> = session.visited().iter().cloned().collect();
            let page_text = env::render_page(&state, &mask);
            let legal = legal_actions(&state, session.has_more_pages());
            let view = prompts::ActView {
                persona: &bundle.persona,
                context: &context,
                mask: &mask,
                page_text: &page_text,
                page_items: &page_items,
                intentions: &intention_rows,
                visited: &visited,
                expanded_item: state.expanded_item.as_deref(),
                expanded_rated: rated_expanded,
                has_more_pages: session.has_more_pages(),
                boredom: bundle.emotional.state.boredom,
                fatigue: bundle.emotional.state.fatigue,
                curiosity: bundle.emotional.state.curiosity,
                legal_actions: &legal,
                thought_mode: config.thought_mode,
            };
            let selected = select_action(&view, backend)?;
            Ok((selected, telemetry))
        })();

        let (mut selected, _telemetry) = match loop_result {
            Ok(v) => v,
            Err(AgentError::Backend(error)) => {
                log::warn!("session {session_id} aborted mid-way: {error}");
                complete = false;
                break;
            }
            Err(error) => return Err(error),
        };

        // Apply to the environment; an invalid transition gets one forced Exit.
        let mut action = selected.action.clone();
        if session.step(&action).is_err() {
            log::warn!(
                "invalid transition {action:?} in session {session_id}; forcing exit"
            );
            selected.forced = true;
            action = Action::Exit;
            let _ = session.step(&action);
        }

        match &action {
            Action::ClickItem { item_id } => {
                rated_expanded = state.own_ratings.contains_key(item_id);
            }
            Action::Rate { item_id, value } => {
                if state.expanded_item.as_deref() == Some(item_id.as_str()) {
                    rated_expanded = true;
                }
                bundle.ratings.insert(item_id.clone(), *value);
                // Satisfaction moves with how much the agent liked what it found.
                bundle.emotional.update(
                    step_index,
                    EmotionDeltas {
                        satisfaction: (*value as f64 - 3.0) * 0.1,
                        ..Default::default()
                    },
                );
            }
            _ => {}
        }

        let thought = if config.thought_mode {
            if selected.thought.is_empty() {
                "weighed the options on this page".to_string()
            } else {
                selected.thought.clone()
            }
        } else {
            String::new()
        };
        steps.push(TrajectoryStep {
            page_number: state.page_number,
            state_digest: env::state_digest(&state),
            thought,
            action: action.clone(),
        });

        // Episodic updates: the interaction itself, then the reflection.
        let acted_item = match &action {
            Action::ClickItem { item_id } | Action::Rate { item_id, .. } => state
                .items
                .iter()
                .find(|i| &i.item_id == item_id)
                .map(|i| (i.clone(), state.own_ratings.get(item_id).copied())),
            _ => None,
        };
        match &action {
            Action::ClickItem { item_id } => {
                let title = acted_item.as_ref().map(|(i, _)| i.title.clone()).unwrap_or_default();
                let record = EpisodicRecord {
                    step_index: bundle.next_step_index(),
                    kind: RecordKind::Click,
                    text: format!("clicked {title}"),
                    item_id: Some(item_id.clone()),
                };
                bundle.episodic.append(record).expect("monotone step index");
            }
            Action::Rate { item_id, value } => {
                let title = acted_item.as_ref().map(|(i, _)| i.title.clone()).unwrap_or_default();
                let record = EpisodicRecord {
                    step_index: bundle.next_step_index(),
                    kind: RecordKind::Rate,
                    text: format!("rated {title} {value}/5"),
                    item_id: Some(item_id.clone()),
                };
                bundle.episodic.append(record).expect("monotone step index");
            }
            _ => {}
        }
        let reflection = reflect(
            &bundle.persona,
            &action,
            acted_item.as_ref().map(|(item, rating)| (item, *rating)),
            bundle.next_step_index(),
            backend,
        )?;
        bundle.episodic.append(reflection).expect("monotone step index");

        if action.is_terminal() {
            terminal_action = action;
            forced_exit = selected.forced;
            break;
        }
    }

    if steps.is_empty() {
        // Backend died before the first step completed; synthesize a record
        // so the trajectory invariant (non-empty steps) holds.
        steps.push(TrajectoryStep {
            page_number: session.state().page_number,
            state_digest: env::state_digest(session.state()),
            thought: String::new(),
            action: Action::Exit,
        });
        complete = false;
    }

    Ok(Trajectory {
        agent_id: bundle.persona.agent_id.clone(),
        session_id: session_id.to_string(),
        context,
        steps,
        terminal_action,
        forced_exit,
        complete,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;
    use crate::domain::{
        BigFive, ConstraintContext, Mood, SituationalContext, TemporalContext, Validate,
    };
    use crate::env::{Recommender, Strategy};
    use std::collections::{BTreeMap, BTreeSet};

    fn persona(preferences: &str) -> Persona {
        Persona {
            agent_id: "u1".into(),
            age: 30,
            occupation: "office worker".into(),
            traits: BigFive {
                openness: 3,
                conscientiousness: 2,
                extraversion: 2,
                agreeableness: 2,
                neuroticism: 1,
            },
            habits: vec!["engagement: high".into()],
            recent_goals: vec!["relax".into()],
            preferences: preferences.into(),
            context_summary: None,
        }
    }

    fn context() -> ContextVector {
        ContextVector {
            temporal: TemporalContext { minute_of_day: 1140, day_of_week: 1 },
            location: "home".into(),
            situational: SituationalContext {
                latest_activity: "dinner".into(),
                mood: Mood::Relaxed,
                need_level: 0.4,
                energy_level: 0.7,
            },
            goal: "find something entertaining".into(),
            constraint: ConstraintContext { budget: Some(20.0), time_available_minutes: 90 },
        }
    }

    fn catalog(specs: &[(&str, &[&str])]) -> BTreeMap<String, Item> {
        specs
            .iter()
            .enumerate()
            .map(|(index, (id, categories))| {
                (
                    id.to_string(),
                    Item {
                        item_id: id.to_string(),
                        title: format!("Title {id}"),
                        description: format!("About {id}"),
                        categories: categories.iter().map(|c| c.to_string()).collect(),
                        brand: None,
                        price: None,
                        stat_count: (specs.len() - index) as u64,
                        stat_mean_rating: Some(3.5),
                    },
                )
            })
            .collect()
    }

    fn run_one(
        catalog: &BTreeMap<String, Item>,
        preferences: &str,
        max_steps: u32,
    ) -> (Trajectory, AgentBundle) {
        let backend = ScriptedBackend::default();
        let recommender = Recommender::new(Strategy::Popularity, 5, 0);
        let snapshot = BTreeMap::new();
        let mut session = Session::start(
            catalog,
            &recommender,
            &snapshot,
            1,
            "u1",
            DomainMode::Recommendation,
            context(),
            BTreeSet::new(),
            BTreeMap::new(),
        );
        let mut bundle = AgentBundle::new(persona(preferences));
        let config = AgentConfig { max_steps_per_session: max_steps, ..AgentConfig::default() };
        let trajectory =
            run_session(&mut bundle, &mut session, &config, "s1", &backend).unwrap();
        (trajectory, bundle)
    }

    #[test]
    fn zero_match_catalog_exits_by_boredom() {
        // Boredom accumulation oracle: 0.15 per zero-WATCH page from 0 →
        // exit within ⌈0.8/0.15⌉ + 1 = 7 pages.
        let catalog = catalog(&[
            ("a", &["Horror"]),
            ("b", &["Horror"]),
            ("c", &["Horror"]),
            ("d", &["Horror"]),
            ("e", &["Horror"]),
            ("f", &["Horror"]),
            ("g", &["Horror"]),
            ("h", &["Horror"]),
            ("i", &["Horror"]),
            ("j", &["Horror"]),
            ("k", &["Horror"]),
            ("l", &["Horror"]),
            ("m", &["Horror"]),
            ("n", &["Horror"]),
            ("o", &["Horror"]),
            ("p", &["Horror"]),
            ("q", &["Horror"]),
            ("r", &["Horror"]),
            ("s", &["Horror"]),
            ("t", &["Horror"]),
            ("u", &["Horror"]),
            ("v", &["Horror"]),
            ("w", &["Horror"]),
            ("x", &["Horror"]),
            ("y", &["Horror"]),
            ("z", &["Horror"]),
            ("a2", &["Horror"]),
            ("b2", &["Horror"]),
            ("c2", &["Horror"]),
            ("d2", &["Horror"]),
            ("e2", &["Horror"]),
            ("f2", &["Horror"]),
            ("g2", &["Horror"]),
            ("h2", &["Horror"]),
            ("i2", &["Horror"]),
        ]);
        let (trajectory, _) = run_one(&catalog, "Enjoys Comedy", 30);
        assert_eq!(trajectory.terminal_action, Action::Exit);
        assert!(!trajectory.forced_exit);
        assert!(trajectory.pages_visited() <= 7, "pages {}", trajectory.pages_visited());
        assert!(trajectory.is_valid());
    }

    #[test]
    fn matching_catalog_clicks_and_rates() {
        let catalog = catalog(&[
            ("match", &["Comedy", "Drama"]),
            ("other", &["Horror"]),
            ("third", &["Horror"]),
        ]);
        let (trajectory, bundle) = run_one(&catalog, "Enjoys Comedy and Drama", 30);
        let actions: Vec<&Action> = trajectory.steps.iter().map(|s| &s.action).collect();
        assert!(actions.iter().any(|a| matches!(a, Action::ClickItem { item_id } if item_id == "match")));
        assert!(actions
            .iter()
            .any(|a| matches!(a, Action::Rate { item_id, value } if item_id == "match" && *value == 5)));
        // Reflections and interaction records landed in memory.
        assert!(bundle.episodic.records.iter().any(|r| r.kind == RecordKind::Reflection));
        assert!(bundle.episodic.records.iter().any(|r| r.kind == RecordKind::Rate));
        // Thoughts recorded on every step.
        assert!(trajectory.steps.iter().all(|s| !s.thought.is_empty()));
    }

    #[test]
    fn max_steps_forces_exit() {
        let catalog = catalog(&[("match", &["Comedy"]), ("b", &["Horror"])]);
        let (trajectory, _) = run_one(&catalog, "Enjoys Comedy", 1);
        assert_eq!(trajectory.steps.len(), 1);
        assert!(trajectory.forced_exit);
        assert_eq!(trajectory.terminal_action, Action::Exit);
        assert!(trajectory.is_valid());
    }

    #[test]
    fn session_length_caps_at_max_steps() {
        let catalog = catalog(&[
            ("a", &["Comedy"]),
            ("b", &["Comedy"]),
            ("c", &["Comedy"]),
            ("d", &["Comedy"]),
            ("e", &["Comedy"]),
            ("f", &["Comedy"]),
        ]);
        for max_steps in [1u32, 3, 5, 8] {
            let (trajectory, _) = run_one(&catalog, "Enjoys Comedy", max_steps);
            assert!(trajectory.steps.len() <= max_steps as usize);
        }
    }

    #[test]
    fn thought_mode_off_leaves_thoughts_empty_but_reflects() {
        let catalog = catalog(&[("match", &["Comedy"]), ("b", &["Horror"])]);
        let backend = ScriptedBackend::default();
        let recommender = Recommender::new(Strategy::Popularity, 5, 0);
        let snapshot = BTreeMap::new();
        let mut session = Session::start(
            &catalog,
            &recommender,
            &snapshot,
            1,
            "u1",
            DomainMode::Recommendation,
            context(),
            BTreeSet::new(),
            BTreeMap::new(),
        );
        let mut bundle = AgentBundle::new(persona("Enjoys Comedy"));
        let config = AgentConfig {
            thought_mode: false,
            max_steps_per_session: 10,
            ..AgentConfig::default()
        };
        let trajectory = run_session(&mut bundle, &mut session, &config, "s1", &backend).unwrap();
        assert!(trajectory.steps.iter().all(|s| s.thought.is_empty()));
        assert!(bundle.episodic.records.iter().any(|r| r.kind == RecordKind::Reflection));
    }

    #[test]
    fn replay_trajectory_transitions() {
        // Replay check: re-simulate the logged actions from a fresh session
        // and assert no InvalidTransition.
        let catalog = catalog(&[
            ("match", &["Comedy", "Drama"]),
            ("second", &["Comedy"]),
            ("other", &["Horror"]),
            ("more", &["Horror"]),
            ("extra", &["Horror"]),
            ("sixth", &["Horror"]),
        ]);
        let (trajectory, _) = run_one(&catalog, "Enjoys Comedy and Drama", 30);
        let recommender = Recommender::new(Strategy::Popularity, 5, 0);
        let snapshot = BTreeMap::new();
        let mut replay = Session::start(
            &catalog,
            &recommender,
            &snapshot,
            1,
            "u1",
            DomainMode::Recommendation,
            context(),
            BTreeSet::new(),
            BTreeMap::new(),
        );
        for step in &trajectory.steps {
            replay.step(&step.action).unwrap();
        }
    }

    #[test]
    fn classify_membership_rule() {
        let catalog = catalog(&[("a", &["Comedy"]), ("b", &["Comedy"]), ("c", &["Horror"])]);
        let backend = ScriptedBackend::default();
        let mut bundle = AgentBundle::new(persona("Enjoys Comedy"));
        let item_a = catalog["a"].clone();
        bundle.seed_memory(&[(&item_a, Some(5))]);
        let items: Vec<Item> = vec![catalog["a"].clone(), catalog["b"].clone(), catalog["c"].clone()];
        let labels =
            classify_interacted(&items, &bundle.persona, &bundle.episodic, "movie", &backend)
                .unwrap();
        assert_eq!(
            labels,
            vec![
                Classification::Interacted,
                Classification::NotInteracted,
                Classification::NotInteracted
            ]
        );
        assert_eq!(labels.len(), items.len());
    }

    #[test]
    fn rate_item_scripted_values() {
        let backend = ScriptedBackend::default();
        let bundle = AgentBundle::new(persona("Enjoys Comedy and Drama"));
        let item = Item {
            item_id: "x".into(),
            title: "X".into(),
            description: String::new(),
            categories: vec!["Comedy".into(), "Drama".into(), "Horror".into()],
            brand: None,
            price: None,
            stat_count: 0,
            stat_mean_rating: None,
        };
        let mask = FactorMask::all();
        let rating =
            rate_item(&item, &bundle.persona, &context(), &mask, &bundle.episodic, &backend)
                .unwrap();
        assert_eq!(rating, 4); // overlap 2/3 → 1 + round(8/3) = 4
    }

    #[test]
    fn interview_scripted_mapping() {
        let backend = ScriptedBackend::default();
        let bundle = AgentBundle::new(persona("Enjoys Comedy"));
        let trajectory = Trajectory {
            agent_id: "u1".into(),
            session_id: "s".into(),
            context: context(),
            steps: vec![TrajectoryStep {
                page_number: 1,
                state_digest: "d".into(),
                thought: "t".into(),
                action: Action::Exit,
            }],
            terminal_action: Action::Exit,
            forced_exit: false,
            complete: true,
        };
        let (rating, reason) =
            post_interview(&bundle.persona, &trajectory, 0.8, &backend).unwrap();
        assert_eq!(rating, 8);
        assert!(!reason.is_empty());
    }

    #[test]
    fn empty_mask_removes_context_from_all_prompts() {
        // Capture every prompt body the loop produces with mask = ∅ and
        // assert no CONTEXT line survives.
        struct Recording<'a> {
            inner: &'a ScriptedBackend,
            seen: std::sync::Mutex<Vec<String>>,
        }
        impl Backend for Recording<'_> {
            fn complete(
                &self,
                request: &CompletionRequest,
            ) -> Result<crate::backend::CompletionResponse, BackendError> {
                self.seen.lock().unwrap().push(request.user_text.clone());
                self.inner.complete(request)
            }
            fn name(&self) -> &str {
                "recording"
            }
            fn deterministic(&self) -> bool {
                true
            }
        }
        let catalog = catalog(&[("match", &["Comedy"]), ("b", &["Horror"])]);
        let scripted = ScriptedBackend::default();
        let backend = Recording { inner: &scripted, seen: std::sync::Mutex::new(Vec::new()) };
        let recommender = Recommender::new(Strategy::Popularity, 5, 0);
        let snapshot = BTreeMap::new();
        let mut session = Session::start(
            &catalog,
            &recommender,
            &snapshot,
            1,
            "u1",
            DomainMode::Recommendation,
            context(),
            BTreeSet::new(),
            BTreeMap::new(),
        );
        let mut bundle = AgentBundle::new(persona("Enjoys Comedy"));
        let config = AgentConfig {
            context_factor_mask: FactorMask::none(),
            max_steps_per_session: 6,
            ..AgentConfig::default()
        };
        run_session(&mut bundle, &mut session, &config, "s1", &backend).unwrap();
        let seen = backend.seen.lock().unwrap();
        assert!(!seen.is_empty());
        for prompt in seen.iter() {
            for line in prompt.lines() {
                assert!(
                    !line.starts_with("CONTEXT:"),
                    "context leaked into masked prompt: {line}"
                );
            }
        }
    }
}
