//! Daily-life simulation: 48-slot schedules, engagement timing, context
//! vectors for each engagement, and the 30-day context summary.

use crate::backend::{Backend, BackendError, CompletionRequest, TaskTag};
use crate::domain::{
    ConstraintContext, ContextVector, HabitLevel, Mood, Persona, SituationalContext,
    TemporalContext, TimeBand, Validate, Violation,
};
use crate::memory::EmotionalMemory;
use crate::seeds;

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const SLOTS_PER_DAY: usize = 48;
pub const MINUTES_PER_SLOT: u16 = 30;

/// Default schedule template library, shipped as an editable data file.
pub const DEFAULT_TEMPLATES: &str = include_str!("../data/schedule_templates.json");

#[derive(Debug, Error)]
pub enum LifesimError {
    #[error("backend failure: {0}")]
    Backend(#[from] BackendError),
    #[error("schedule parse failure: missing slots {missing:?} after repair")]
    ScheduleParseFailure { missing: Vec<u8> },
    #[error("no contexts to summarize")]
    EmptyHorizon,
    #[error("template library invalid: {0}")]
    TemplateError(String),
}

/// Coarse activity classes that drive engagement probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityClass {
    Sleep,
    Work,
    Commute,
    Meal,
    Leisure,
    Social,
    Chores,
    Rest,
}

impl ActivityClass {
    pub const ALL: [ActivityClass; 8] = [
        ActivityClass::Sleep,
        ActivityClass::Work,
        ActivityClass::Commute,
        ActivityClass::Meal,
        ActivityClass::Leisure,
        ActivityClass::Social,
        ActivityClass::Chores,
        ActivityClass::Rest,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ActivityClass::Sleep => "sleep",
            ActivityClass::Work => "work",
            ActivityClass::Commute => "commute",
            ActivityClass::Meal => "meal",
            ActivityClass::Leisure => "leisure",
            ActivityClass::Social => "social",
            ActivityClass::Chores => "chores",
            ActivityClass::Rest => "rest",
        }
    }

    pub fn from_label(label: &str) -> Option<ActivityClass> {
        ActivityClass::ALL.into_iter().find(|c| c.label() == label.trim().to_lowercase())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Weekday,
    Weekend,
}

impl DayType {
    pub fn label(&self) -> &'static str {
        match self {
            DayType::Weekday => "weekday",
            DayType::Weekend => "weekend",
        }
    }

    /// Day 0 is a Monday; days 5 and 6 of each week are the weekend.
    pub fn from_day_index(day_index: u32) -> DayType {
        if day_index % 7 >= 5 {
            DayType::Weekend
        } else {
            DayType::Weekday
        }
    }
}

/// One half-hour slot of a daily schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSlot {
    pub index: u8,
    pub start_minute: u16,
    pub activity: String,
    pub activity_class: ActivityClass,
    pub location: String,
}

/// External conditions a day is generated under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Externals {
    pub weather: String,
    pub season: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
}

/// A full 48-slot day for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySchedule {
    pub agent_id: String,
    pub day_index: u32,
    pub day_type: DayType,
    pub externals: Externals,
    pub slots: Vec<ScheduleSlot>,
}

impl DailySchedule {
    pub fn day_of_week(&self) -> u8 {
        (self.day_index % 7) as u8
    }
}

impl Validate for DailySchedule {
    fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.slots.len() != SLOTS_PER_DAY {
            v.push(Violation::new("slots", format!("expected 48 slots, got {}", self.slots.len())));
        }
        for (i, slot) in self.slots.iter().enumerate() {
            if slot.index as usize != i {
                v.push(Violation::new(format!("slots[{i}].index"), "index out of order"));
            }
            if slot.start_minute != slot.index as u16 * MINUTES_PER_SLOT {
                v.push(Violation::new(format!("slots[{i}].start_minute"), "start_minute ≠ 30·index"));
            }
        }
        v
    }
}

// --- Template library -------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OccupationClassDef {
    pub name: String,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateBlock {
    pub start: u8,
    /// Exclusive end slot.
    pub end: u8,
    pub activity: String,
    pub class: ActivityClass,
    pub location: String,
    #[serde(default)]
    pub variants: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleTemplate {
    pub occupation_class: String,
    pub day_type: DayType,
    pub blocks: Vec<TemplateBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateLibrary {
    pub occupation_classes: Vec<OccupationClassDef>,
    pub templates: Vec<ScheduleTemplate>,
    pub goal_templates: BTreeMap<String, Vec<String>>,
    pub budget_ranges: BTreeMap<String, (f64, f64)>,
}

impl Default for TemplateLibrary {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_TEMPLATES).expect("embedded template library parses")
    }
}

impl TemplateLibrary {
    pub fn from_json(json: &str) -> Result<Self, LifesimError> {
        let lib: TemplateLibrary =
            serde_json::from_str(json).map_err(|e| LifesimError::TemplateError(e.to_string()))?;
        for t in &lib.templates {
            let mut covered = [false; SLOTS_PER_DAY];
            for b in &t.blocks {
                if b.end > SLOTS_PER_DAY as u8 || b.start >= b.end {
                    return Err(LifesimError::TemplateError(format!(
                        "bad block {}..{} in {}/{}",
                        b.start,
                        b.end,
                        t.occupation_class,
                        t.day_type.label()
                    )));
                }
                for s in b.start..b.end {
                    if covered[s as usize] {
                        return Err(LifesimError::TemplateError(format!(
                            "slot {s} covered twice in {}/{}",
                            t.occupation_class,
                            t.day_type.label()
                        )));
                    }
                    covered[s as usize] = true;
                }
            }
            if covered.iter().any(|c| !c) {
                return Err(LifesimError::TemplateError(format!(
                    "incomplete coverage in {}/{}",
                    t.occupation_class,
                    t.day_type.label()
                )));
            }
        }
        Ok(lib)
    }

    /// Map free-text occupation to a template class by keyword, falling back
    /// to "general".
    pub fn classify_occupation(&self, occupation: &str) -> String {
        let lower = occupation.to_lowercase();
        for def in &self.occupation_classes {
            if def.keywords.iter().any(|k| lower.contains(k.as_str())) {
                return def.name.clone();
            }
        }
        "general".to_string()
    }

    pub fn template_for(&self, occupation_class: &str, day_type: DayType) -> Option<&ScheduleTemplate> {
        self.templates
            .iter()
            .find(|t| t.occupation_class == occupation_class && t.day_type == day_type)
            .or_else(|| {
                self.templates.iter().find(|t| t.occupation_class == "general" && t.day_type == day_type)
            })
    }

    pub fn goal_for(&self, class: ActivityClass, rng: &mut impl Rng) -> String {
        match self.goal_templates.get(class.label()).filter(|v| !v.is_empty()) {
            Some(variants) => variants[rng.gen_range(0..variants.len())].clone(),
            None => format!("find a recommendation during {}", class.label()),
        }
    }

    pub fn budget_range(&self, occupation_class: &str) -> (f64, f64) {
        self.budget_ranges.get(occupation_class).copied().unwrap_or((10.0, 50.0))
    }

    /// Fill a 48-slot table from a template with seeded activity-text
    /// perturbations. Block boundaries and classes stay fixed.
    pub fn render_slots(&self, occupation_class: &str, day_type: DayType, seed: u64) -> Vec<ScheduleSlot> {
        let template = self
            .template_for(occupation_class, day_type)
            .expect("template library validated to contain a general template");
        let mut rng = seeds::rng(seed, "schedule-perturb", &[]);
        let mut slots = Vec::with_capacity(SLOTS_PER_DAY);
        for block in &template.blocks {
            let activity = if block.variants.len() > 1 {
                block.variants[rng.gen_range(0..block.variants.len())].clone()
            } else {
                block.activity.clone()
            };
            for index in block.start..block.end {
                slots.push(ScheduleSlot {
                    index,
                    start_minute: index as u16 * MINUTES_PER_SLOT,
                    activity: activity.clone(),
                    activity_class: block.class,
                    location: block.location.clone(),
                });
            }
        }
        slots.sort_by_key(|s| s.index);
        slots
    }
}

// --- Schedule generation through the backend --------------------------------

pub const SCHEDULE_SYSTEM: &str =
    "You simulate one day in the life of a specific person as a half-hour activity table.";

/// Prompt body for the SCHEDULE task (the `#TASK:` line is prepended by
/// `CompletionRequest::new`).
pub fn schedule_prompt_body(
    persona: &Persona,
    day_index: u32,
    day_type: DayType,
    externals: &Externals,
    missing: Option<&[u8]>,
) -> String {
    let mut body = String::new();
    body.push_str(&format!("AGENT: {}\n", persona.agent_id));
    body.push_str(&format!("DAY_INDEX: {day_index}\n"));
    body.push_str(&format!("DAY_TYPE: {}\n", day_type.label()));
    body.push_str(&format!("OCCUPATION: {}\n", persona.occupation));
    body.push_str(&format!("AGE: {}\n", persona.age));
    body.push_str(&format!(
        "TRAITS: openness={} conscientiousness={} extraversion={} agreeableness={} neuroticism={}\n",
        persona.traits.openness,
        persona.traits.conscientiousness,
        persona.traits.extraversion,
        persona.traits.agreeableness,
        persona.traits.neuroticism
    ));
    body.push_str(&format!("HABITS: {}\n", persona.habits.join("; ")));
    body.push_str(&format!(
        "EXTERNALS: weather={}; season={}; event={}\n",
        externals.weather,
        externals.season,
        externals.event.as_deref().unwrap_or("-")
    ));
    if let Some(missing) = missing {
        let list: Vec<String> = missing.iter().map(|m| m.to_string()).collect();
        body.push_str(&format!("REPAIR_MISSING_SLOTS: {}\n", list.join(",")));
    }
    body.push_str(
        "\nPlan this person's day from 00:00 to 24:00 in 30-minute slots, consistent with \
         their occupation, habits, the day type, and the external conditions.\n\
         Respond with exactly 48 lines, one per slot, in the form:\n\
         SLOT <index>: <activity> | <class> | <location>\n\
         where <class> is one of sleep, work, commute, meal, leisure, social, chores, rest.\n",
    );
    body
}

fn parse_slot_lines(text: &str) -> BTreeMap<u8, ScheduleSlot> {
    let mut slots = BTreeMap::new();
    for line in text.lines() {
        let trimmed = line.trim();
        let Some(rest) = trimmed.strip_prefix("SLOT ").or_else(|| trimmed.strip_prefix("slot ")) else {
            continue;
        };
        let Some((index_text, fields)) = rest.split_once(':') else { continue };
        let Ok(index) = index_text.trim().parse::<u8>() else { continue };
        if index as usize >= SLOTS_PER_DAY {
            continue;
        }
        let parts: Vec<&str> = fields.split('|').map(|p| p.trim()).collect();
        if parts.len() != 3 || parts[0].is_empty() || parts[2].is_empty() {
            continue;
        }
        let Some(class) = ActivityClass::from_label(parts[1]) else { continue };
        slots.insert(
            index,
            ScheduleSlot {
                index,
                start_minute: index as u16 * MINUTES_PER_SLOT,
                activity: parts[0].to_string(),
                activity_class: class,
                location: parts[2].to_string(),
            },
        );
    }
    slots
}

/// Generate a 48-slot schedule through the backend (SCHEDULE task), with one
/// repair round when slots come back missing.
pub fn generate_schedule(
    persona: &Persona,
    day_index: u32,
    day_type: DayType,
    externals: &Externals,
    seed: u64,
    backend: &dyn Backend,
) -> Result<DailySchedule, LifesimError> {
    let request_seed = seeds::derive(seed, "schedule", &[seeds::hash_str(&persona.agent_id), day_index as u64]);
    let body = schedule_prompt_body(persona, day_index, day_type, externals, None);
    let request =
        CompletionRequest::new(TaskTag::Schedule, SCHEDULE_SYSTEM, &body).with_seed(request_seed);
    let response = backend.complete(&request)?;
    let mut slots = parse_slot_lines(&response.text);

    let missing: Vec<u8> =
        (0..SLOTS_PER_DAY as u8).filter(|i| !slots.contains_key(i)).collect();
    if !missing.is_empty() {
        let repair_body = schedule_prompt_body(persona, day_index, day_type, externals, Some(&missing));
        let repair = CompletionRequest::new(TaskTag::Schedule, SCHEDULE_SYSTEM, &repair_body)
            .with_seed(request_seed);
        let response = backend.complete(&repair)?;
        for (index, slot) in parse_slot_lines(&response.text) {
            slots.entry(index).or_insert(slot);
        }
        let still_missing: Vec<u8> =
            (0..SLOTS_PER_DAY as u8).filter(|i| !slots.contains_key(i)).collect();
        if !still_missing.is_empty() {
            return Err(LifesimError::ScheduleParseFailure { missing: still_missing });
        }
    }

    Ok(DailySchedule {
        agent_id: persona.agent_id.clone(),
        day_index,
        day_type,
        externals: externals.clone(),
        slots: slots.into_values().collect(),
    })
}

// --- Engagement probability --------------------------------------------------

/// Engagement-probability tables. All values are configuration, not dataset
/// facts; defaults below are the artifact's numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementParams {
    pub base_probability: BTreeMap<ActivityClass, f64>,
    pub habit_multiplier_low: f64,
    pub habit_multiplier_medium: f64,
    pub habit_multiplier_high: f64,
    pub fatigue_damping: f64,
}

impl Default for EngagementParams {
    fn default() -> Self {
        let base_probability = BTreeMap::from([
            (ActivityClass::Sleep, 0.0),
            (ActivityClass::Work, 0.05),
            (ActivityClass::Commute, 0.2),
            (ActivityClass::Meal, 0.15),
            (ActivityClass::Chores, 0.05),
            (ActivityClass::Rest, 0.25),
            (ActivityClass::Social, 0.1),
            (ActivityClass::Leisure, 0.3),
        ]);
        Self {
            base_probability,
            habit_multiplier_low: 0.5,
            habit_multiplier_medium: 1.0,
            habit_multiplier_high: 1.5,
            fatigue_damping: 0.5,
        }
    }
}

impl EngagementParams {
    pub fn habit_multiplier(&self, level: HabitLevel) -> f64 {
        match level {
            HabitLevel::Low => self.habit_multiplier_low,
            HabitLevel::Medium => self.habit_multiplier_medium,
            HabitLevel::High => self.habit_multiplier_high,
        }
    }
}

/// p = base(class) × habit_mult(engagement habit) × (1 − 0.5·fatigue), clamped.
pub fn engagement_probability(
    slot: &ScheduleSlot,
    persona: &Persona,
    emotional: &crate::domain::EmotionalState,
    params: &EngagementParams,
) -> f64 {
    let base = params.base_probability.get(&slot.activity_class).copied().unwrap_or(0.0);
    let habit = params.habit_multiplier(persona.engagement_habit());
    let p = base * habit * (1.0 - params.fatigue_damping * emotional.fatigue);
    p.clamp(0.0, 1.0)
}

// --- Context construction ----------------------------------------------------

fn mood_weights(neuroticism: u8) -> Vec<(Mood, u32)> {
    let n = neuroticism.clamp(1, 3) as u32;
    vec![
        (Mood::Happy, 4 - n),
        (Mood::Relaxed, 3),
        (Mood::Neutral, 3),
        (Mood::Bored, 2),
        (Mood::Stressed, 2 * n - 1),
        (Mood::Sad, n - 1),
    ]
}

fn sample_mood(neuroticism: u8, rng: &mut impl Rng) -> Mood {
    let weights = mood_weights(neuroticism);
    let total: u32 = weights.iter().map(|(_, w)| w).sum();
    let mut pick = rng.gen_range(0..total);
    for (mood, w) in weights {
        if pick < w {
            return mood;
        }
        pick -= w;
    }
    Mood::Neutral
}

/// Minutes from `slot_index` to the first following non-leisure slot (48 = end
/// of day when leisure runs out the clock).
pub fn time_available_minutes(schedule: &DailySchedule, slot_index: u8) -> u32 {
    let mut cursor = slot_index as usize;
    while cursor < SLOTS_PER_DAY && schedule.slots[cursor].activity_class == ActivityClass::Leisure {
        cursor += 1;
    }
    if cursor == slot_index as usize {
        // Engagement at a non-leisure slot: the next slot boundary.
        cursor = slot_index as usize + 1;
    }
    (cursor as u32 - slot_index as u32) * MINUTES_PER_SLOT as u32
}

/// Build the five-factor context for an engagement at `slot_index`.
pub fn build_context(
    schedule: &DailySchedule,
    slot_index: u8,
    persona: &Persona,
    seed: u64,
    library: &TemplateLibrary,
) -> ContextVector {
    let slot = &schedule.slots[slot_index as usize];
    let mut rng = seeds::agent_rng(
        seed,
        "context",
        &schedule.agent_id,
        &[schedule.day_index as u64, slot_index as u64],
    );
    let latest_activity = if slot_index == 0 {
        "sleeping".to_string()
    } else {
        schedule.slots[slot_index as usize - 1].activity.clone()
    };
    let mood = sample_mood(persona.traits.neuroticism, &mut rng);
    let need_level = round2(rng.gen_range(0.0..=1.0));
    let energy_level = round2(rng.gen_range(0.0..=1.0));
    let goal = library.goal_for(slot.activity_class, &mut rng);
    let (lo, hi) = library.budget_range(&library.classify_occupation(&persona.occupation));
    let budget = round2(rng.gen_range(lo..=hi));
    ContextVector {
        temporal: TemporalContext {
            minute_of_day: slot.start_minute,
            day_of_week: schedule.day_of_week(),
        },
        location: slot.location.clone(),
        situational: SituationalContext { latest_activity, mood, need_level, energy_level },
        goal,
        constraint: ConstraintContext {
            budget: Some(budget),
            time_available_minutes: time_available_minutes(schedule, slot_index),
        },
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Sample external conditions for a day.
pub fn sample_externals(day_index: u32, seed: u64) -> Externals {
    let mut rng = seeds::rng(seed, "externals", &[day_index as u64]);
    let season = ["spring", "summer", "autumn", "winter"][((day_index / 91) % 4) as usize];
    let roll: f64 = rng.gen();
    let weather = if season == "winter" {
        if roll < 0.35 {
            "sunny"
        } else if roll < 0.65 {
            "cloudy"
        } else if roll < 0.85 {
            "rainy"
        } else {
            "snowy"
        }
    } else if roll < 0.45 {
        "sunny"
    } else if roll < 0.75 {
        "cloudy"
    } else {
        "rainy"
    };
    let event_roll: f64 = rng.gen();
    let event = if event_roll < 0.05 {
        Some("local festival".to_string())
    } else if event_roll < 0.1 {
        Some("sports game".to_string())
    } else {
        None
    };
    Externals { weather: weather.to_string(), season: season.to_string(), event }
}

// --- Context summary (sum variant) --------------------------------------------

/// Exact aggregates over an engagement-context collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryAggregates {
    /// Shares over (Morning, Afternoon, Evening, Night).
    pub band_frequencies: [f64; 4],
    pub top_locations: Vec<(String, u64)>,
    pub top_goals: Vec<(String, u64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSummary {
    pub agent_id: String,
    pub horizon_days: u32,
    pub summary_text: String,
    pub aggregates: SummaryAggregates,
}

fn top_counts(counts: BTreeMap<String, u64>, k: usize) -> Vec<(String, u64)> {
    let mut entries: Vec<(String, u64)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    entries.truncate(k);
    entries
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2.0 })
}

/// Compute exact aggregates over contexts.
pub fn aggregate_contexts(contexts: &[ContextVector]) -> Result<SummaryAggregates, LifesimError> {
    if contexts.is_empty() {
        return Err(LifesimError::EmptyHorizon);
    }
    let mut band_counts = [0u64; 4];
    let mut locations: BTreeMap<String, u64> = BTreeMap::new();
    let mut goals: BTreeMap<String, u64> = BTreeMap::new();
    let mut budgets = Vec::new();
    for c in contexts {
        band_counts[TimeBand::from_minute_of_day(c.temporal.minute_of_day).index()] += 1;
        *locations.entry(c.location.clone()).or_default() += 1;
        *goals.entry(c.goal.clone()).or_default() += 1;
        if let Some(b) = c.constraint.budget {
            budgets.push(b);
        }
    }
    let total = contexts.len() as f64;
    let band_frequencies =
        [0, 1, 2, 3].map(|i| band_counts[i] as f64 / total);
    Ok(SummaryAggregates {
        band_frequencies,
        top_locations: top_counts(locations, 3),
        top_goals: top_counts(goals, 3),
        budget_median: median(budgets),
    })
}

pub const SUMMARIZE_SYSTEM: &str =
    "You condense a month of simulated daily-life engagements into a short profile sentence.";

pub fn summarize_prompt_body(agent_id: &str, horizon_days: u32, agg: &SummaryAggregates) -> String {
    let mut body = String::new();
    body.push_str(&format!("AGENT: {agent_id}\n"));
    body.push_str(&format!("HORIZON_DAYS: {horizon_days}\n"));
    body.push_str(&format!(
        "BANDS: morning={:.4} afternoon={:.4} evening={:.4} night={:.4}\n",
        agg.band_frequencies[0], agg.band_frequencies[1], agg.band_frequencies[2], agg.band_frequencies[3]
    ));
    let locations: Vec<&str> = agg.top_locations.iter().map(|(l, _)| l.as_str()).collect();
    body.push_str(&format!("TOP_LOCATIONS: {}\n", locations.join(", ")));
    let goals: Vec<&str> = agg.top_goals.iter().map(|(g, _)| g.as_str()).collect();
    body.push_str(&format!("TOP_GOALS: {}\n", goals.join(", ")));
    match agg.budget_median {
        Some(m) => body.push_str(&format!("BUDGET_MEDIAN: {m:.2}\n")),
        None => body.push_str("BUDGET_MEDIAN: -\n"),
    }
    body.push_str(
        "\nWrite one short paragraph summarizing when, where, and why this person typically \
         engages with recommendations, and their usual budget.\n",
    );
    body
}

/// Summarize a collection of engagement contexts (SUMMARIZE task).
pub fn summarize_contexts(
    agent_id: &str,
    contexts: &[ContextVector],
    horizon_days: u32,
    backend: &dyn Backend,
) -> Result<ContextSummary, LifesimError> {
    let aggregates = aggregate_contexts(contexts)?;
    let body = summarize_prompt_body(agent_id, horizon_days, &aggregates);
    let request = CompletionRequest::new(TaskTag::Summarize, SUMMARIZE_SYSTEM, &body)
        .with_seed(seeds::derive(0, "summarize", &[seeds::hash_str(agent_id)]));
    let response = backend.complete(&request)?;
    Ok(ContextSummary {
        agent_id: agent_id.to_string(),
        horizon_days,
        summary_text: response.text,
        aggregates,
    })
}

/// Per-slot engagement decision for one day, seeded by (agent, day).
pub fn engagement_slots(
    schedule: &DailySchedule,
    persona: &Persona,
    emotional: &EmotionalMemory,
    params: &EngagementParams,
    seed: u64,
) -> Vec<u8> {
    let mut rng = seeds::agent_rng(seed, "engage", &schedule.agent_id, &[schedule.day_index as u64]);
    let mut out = Vec::new();
    for slot in &schedule.slots {
        let p = engagement_probability(slot, persona, &emotional.state, params);
        if rng.gen::<f64>() < p {
            out.push(slot.index);
        }
    }
    out
}

/// Uniformly sampled engagement slots, for the no-lifesim ablation.
pub fn uniform_engagement_slots(
    agent_id: &str,
    day_index: u32,
    expected_count: f64,
    seed: u64,
) -> Vec<u8> {
    let mut rng = seeds::agent_rng(seed, "engage-uniform", agent_id, &[day_index as u64]);
    let mut out = Vec::new();
    let per_slot = (expected_count / SLOTS_PER_DAY as f64).clamp(0.0, 1.0);
    for index in 0..SLOTS_PER_DAY as u8 {
        if rng.gen::<f64>() < per_slot {
            out.push(index);
        }
    }
    out
}

/// Context describing a time-only engagement (sum variant): the band is drawn
/// from the agent's summary band frequencies, other factors are neutral.
pub fn sum_variant_context(
    summary: &SummaryAggregates,
    agent_id: &str,
    session_index: u64,
    seed: u64,
) -> ContextVector {
    let mut rng = seeds::agent_rng(seed, "sum-context", agent_id, &[session_index]);
    let roll: f64 = rng.gen();
    let mut cumulative = 0.0;
    let mut band = TimeBand::Evening;
    for b in TimeBand::ALL {
        cumulative += summary.band_frequencies[b.index()];
        if roll < cumulative {
            band = b;
            break;
        }
    }
    let (lo, hi) = match band {
        TimeBand::Morning => (6u16, 12u16),
        TimeBand::Afternoon => (12, 18),
        TimeBand::Evening => (18, 24),
        TimeBand::Night => (0, 6),
    };
    let minute_of_day = rng.gen_range(lo * 60..hi * 60);
    let day_of_week = rng.gen_range(0..7u8);
    ContextVector {
        temporal: TemporalContext { minute_of_day, day_of_week },
        location: summary
            .top_locations
            .first()
            .map(|(l, _)| l.clone())
            .unwrap_or_else(|| "home".to_string()),
        situational: SituationalContext {
            latest_activity: "daily routine".to_string(),
            mood: Mood::Neutral,
            need_level: 0.5,
            energy_level: 0.5,
        },
        goal: summary
            .top_goals
            .first()
            .map(|(g, _)| g.clone())
            .unwrap_or_else(|| "find a recommendation".to_string()),
        constraint: ConstraintContext {
            budget: summary.budget_median,
            time_available_minutes: 60,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;
    use crate::domain::{BigFive, EmotionalState};

    fn persona(occupation: &str, engagement: &str) -> Persona {
        Persona {
            agent_id: "u1".into(),
            age: 34,
            occupation: occupation.into(),
            traits: BigFive {
                openness: 2,
                conscientiousness: 2,
                extraversion: 2,
                agreeableness: 2,
                neuroticism: 2,
            },
            habits: vec![
                format!("engagement: {engagement}"),
                "conformity: medium".into(),
                "variety: medium".into(),
            ],
            recent_goals: vec!["relax in the evening".into()],
            preferences: "Enjoys comedy and drama".into(),
            context_summary: None,
        }
    }

    fn externals() -> Externals {
        Externals { weather: "sunny".into(), season: "spring".into(), event: None }
    }

    #[test]
    fn embedded_library_is_valid() {
        let lib = TemplateLibrary::from_json(DEFAULT_TEMPLATES).unwrap();
        assert!(lib.templates.len() >= 10);
        // Every class/day_type pair named in occupation_classes resolves.
        for def in &lib.occupation_classes {
            for day_type in [DayType::Weekday, DayType::Weekend] {
                assert!(lib.template_for(&def.name, day_type).is_some());
            }
        }
    }

    #[test]
    fn office_weekday_blocks_match_template_table() {
        // Template-table oracle: office weekday has sleep through the small
        // hours, work 08:30-17:30 at the office, evening leisure at home.
        let backend = ScriptedBackend::default();
        let schedule = generate_schedule(
            &persona("office worker", "medium"),
            1,
            DayType::Weekday,
            &externals(),
            7,
            &backend,
        )
        .unwrap();
        assert!(schedule.validate().is_empty());
        for slot in &schedule.slots[3..15] {
            assert_eq!(slot.activity_class, ActivityClass::Sleep, "slot {}", slot.index);
            assert_eq!(slot.location, "home");
        }
        for index in [17usize, 20, 24, 30, 34] {
            assert_eq!(schedule.slots[index].activity_class, ActivityClass::Work, "slot {index}");
            assert_eq!(schedule.slots[index].location, "office");
        }
        assert_eq!(schedule.slots[25].activity_class, ActivityClass::Meal);
        for slot in &schedule.slots[38..46] {
            assert_eq!(slot.activity_class, ActivityClass::Leisure, "slot {}", slot.index);
            assert_eq!(slot.location, "home");
        }
    }

    #[test]
    fn schedule_deterministic_under_seed() {
        let backend = ScriptedBackend::default();
        let p = persona("teacher", "high");
        let a = generate_schedule(&p, 3, DayType::Weekday, &externals(), 11, &backend).unwrap();
        let b = generate_schedule(&p, 3, DayType::Weekday, &externals(), 11, &backend).unwrap();
        assert_eq!(a, b);
        let c = generate_schedule(&p, 3, DayType::Weekday, &externals(), 12, &backend).unwrap();
        assert_eq!(c.slots.len(), SLOTS_PER_DAY);
    }

    #[test]
    fn engagement_probability_formula() {
        let params = EngagementParams::default();
        let neutral = EmotionalState::neutral();
        let slot = |class| ScheduleSlot {
            index: 40,
            start_minute: 1200,
            activity: "x".into(),
            activity_class: class,
            location: "home".into(),
        };
        // sleep → 0 regardless of persona
        assert_eq!(
            engagement_probability(&slot(ActivityClass::Sleep), &persona("office", "high"), &neutral, &params),
            0.0
        );
        // leisure, high engagement, fatigue 0 → 0.3 × 1.5 × 1.0 = 0.45
        let p = engagement_probability(&slot(ActivityClass::Leisure), &persona("office", "high"), &neutral, &params);
        assert!((p - 0.45).abs() < 1e-12);
        // leisure, medium, fatigue 1.0 → 0.3 × 1.0 × 0.5 = 0.15
        let tired = EmotionalState { fatigue: 1.0, ..EmotionalState::neutral() };
        let p = engagement_probability(&slot(ActivityClass::Leisure), &persona("office", "medium"), &tired, &params);
        assert!((p - 0.15).abs() < 1e-12);
    }

    #[test]
    fn engagement_probability_monotone_over_tables() {
        // Exhaustive over the finite tables: non-decreasing in habit level,
        // non-increasing in fatigue.
        let params = EngagementParams::default();
        let levels = ["low", "medium", "high"];
        for class in ActivityClass::ALL {
            let slot = ScheduleSlot {
                index: 0,
                start_minute: 0,
                activity: "x".into(),
                activity_class: class,
                location: "home".into(),
            };
            for fatigue in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let state = EmotionalState { fatigue, ..EmotionalState::neutral() };
                let ps: Vec<f64> = levels
                    .iter()
                    .map(|l| engagement_probability(&slot, &persona("office", l), &state, &params))
                    .collect();
                assert!(ps[0] <= ps[1] && ps[1] <= ps[2], "habit monotonicity for {class:?}");
            }
            for level in levels {
                let p = |fatigue: f64| {
                    let state = EmotionalState { fatigue, ..EmotionalState::neutral() };
                    engagement_probability(&slot, &persona("office", level), &state, &params)
                };
                let mut last = p(0.0);
                for fatigue in [0.25, 0.5, 0.75, 1.0] {
                    let current = p(fatigue);
                    assert!(current <= last + 1e-12, "fatigue monotonicity for {class:?}");
                    last = current;
                }
            }
        }
    }

    #[test]
    fn context_fields_from_slot() {
        let backend = ScriptedBackend::default();
        let lib = TemplateLibrary::default();
        let p = persona("office worker", "medium");
        // Day index 1 → Tuesday (day 0 is a Monday).
        let schedule =
            generate_schedule(&p, 1, DayType::Weekday, &externals(), 5, &backend).unwrap();
        let context = build_context(&schedule, 38, &p, 5, &lib);
        assert_eq!(context.temporal.minute_of_day, 1140);
        assert_eq!(context.temporal.day_of_week, 1);
        assert_eq!(context.situational.latest_activity, schedule.slots[37].activity);
        assert!(context.validate().is_empty());
    }

    #[test]
    fn time_available_scans_to_next_non_leisure() {
        // Oracle: hand-built day with leisure 38..42 then sleep.
        let mut slots = Vec::new();
        for index in 0..SLOTS_PER_DAY as u8 {
            let class = if (38..42).contains(&index) {
                ActivityClass::Leisure
            } else if index >= 42 {
                ActivityClass::Sleep
            } else {
                ActivityClass::Work
            };
            slots.push(ScheduleSlot {
                index,
                start_minute: index as u16 * 30,
                activity: "x".into(),
                activity_class: class,
                location: "home".into(),
            });
        }
        let schedule = DailySchedule {
            agent_id: "u1".into(),
            day_index: 0,
            day_type: DayType::Weekday,
            externals: externals(),
            slots,
        };
        assert_eq!(time_available_minutes(&schedule, 38), 120);
        assert_eq!(time_available_minutes(&schedule, 10), 30);
    }

    #[test]
    fn aggregates_and_summary() {
        let lib = TemplateLibrary::default();
        let backend = ScriptedBackend::default();
        let p = persona("office worker", "medium");
        let mut contexts = Vec::new();
        // All engagements at 19:00 → Evening band.
        for day in 0..30 {
            let schedule = generate_schedule(
                &p,
                day,
                DayType::from_day_index(day),
                &externals(),
                9,
                &backend,
            )
            .unwrap();
            contexts.push(build_context(&schedule, 38, &p, 9, &lib));
        }
        let agg = aggregate_contexts(&contexts).unwrap();
        assert_eq!(agg.band_frequencies, [0.0, 0.0, 1.0, 0.0]);
        let summary = summarize_contexts("u1", &contexts, 30, &backend).unwrap();
        assert!(summary.summary_text.contains("Evening"), "text: {}", summary.summary_text);
    }

    #[test]
    fn median_of_budgets() {
        assert_eq!(median(vec![10.0, 20.0, 30.0]), Some(20.0));
        assert_eq!(median(vec![10.0, 20.0]), Some(15.0));
        assert_eq!(median(vec![]), None);
    }

    #[test]
    fn empty_horizon_is_error() {
        assert!(matches!(aggregate_contexts(&[]), Err(LifesimError::EmptyHorizon)));
    }

    #[test]
    fn coverage_over_random_personas() {
        // 1,000 random (persona, seed) pairs all satisfy the 48-slot invariant.
        let backend = ScriptedBackend::default();
        let occupations = ["office worker", "student", "chef", "artist", "zookeeper", "nurse"];
        for i in 0..1000u64 {
            let mut p = persona(occupations[(i % 6) as usize], "medium");
            p.agent_id = format!("u{i}");
            let day = (i % 14) as u32;
            let schedule = generate_schedule(
                &p,
                day,
                DayType::from_day_index(day),
                &externals(),
                i,
                &backend,
            )
            .unwrap();
            assert!(schedule.validate().is_empty(), "pair {i}");
        }
    }
}
