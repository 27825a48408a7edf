//! Shared domain vocabulary: personas, context vectors, items, actions,
//! session states, trajectories, and bounded emotional state.
//!
//! Every type here is an immutable value with a `Validate` impl that reports
//! invariant violations as data rather than panicking.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// A single invariant violation, with the field path that broke it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Invariant checking for domain values. Returns every violated invariant;
/// an empty list means the value is well-formed.
pub trait Validate {
    fn validate(&self) -> Vec<Violation>;

    fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }
}

/// Big Five personality traits on a 1-3 integer scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BigFive {
    pub openness: u8,
    pub conscientiousness: u8,
    pub extraversion: u8,
    pub agreeableness: u8,
    pub neuroticism: u8,
}

impl BigFive {
    /// Openness mapped from {1,2,3} to [0,1].
    pub fn openness_normalized(&self) -> f64 {
        (self.openness.saturating_sub(1)) as f64 / 2.0
    }
}

impl Validate for BigFive {
    fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        for (name, value) in [
            ("openness", self.openness),
            ("conscientiousness", self.conscientiousness),
            ("extraversion", self.extraversion),
            ("agreeableness", self.agreeableness),
            ("neuroticism", self.neuroticism),
        ] {
            if !(1..=3).contains(&value) {
                v.push(Violation::new(format!("traits.{name}"), format!("{name} ∉ 1..3")));
            }
        }
        v
    }
}

/// The agent's stable identity: demographics, traits, habits, goals, tastes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub agent_id: String,
    pub age: u32,
    pub occupation: String,
    pub traits: BigFive,
    /// Tendency labels, e.g. "engagement: high".
    pub habits: Vec<String>,
    pub recent_goals: Vec<String>,
    pub preferences: String,
    /// Filled only in the sum variant, from the 30-day context summary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_summary: Option<String>,
}

impl Persona {
    /// Parse the "engagement" habit level; defaults to medium when absent.
    pub fn engagement_habit(&self) -> HabitLevel {
        habit_level(&self.habits, "engagement")
    }

    /// Lowercase alphanumeric tokens of the preferences text, for overlap scoring.
    pub fn preference_keywords(&self) -> Vec<String> {
        tokenize(&self.preferences)
    }
}

/// Low/medium/high tendency strength used by habit labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HabitLevel {
    Low,
    Medium,
    High,
}

impl HabitLevel {
    pub fn label(&self) -> &'static str {
        match self {
            HabitLevel::Low => "low",
            HabitLevel::Medium => "medium",
            HabitLevel::High => "high",
        }
    }
}

fn habit_level(habits: &[String], name: &str) -> HabitLevel {
    for habit in habits {
        let lower = habit.to_lowercase();
        if let Some(rest) = lower.strip_prefix(name) {
            let value = rest.trim_start_matches([':', '=', ' ']);
            if value.starts_with("low") {
                return HabitLevel::Low;
            } else if value.starts_with("high") {
                return HabitLevel::High;
            } else if value.starts_with("medium") {
                return HabitLevel::Medium;
            }
        }
    }
    HabitLevel::Medium
}

/// Split text into lowercase alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

impl Validate for Persona {
    fn validate(&self) -> Vec<Violation> {
        let mut v = self.traits.validate();
        if !(13..=100).contains(&self.age) {
            v.push(Violation::new("age", "age ∉ [13,100]"));
        }
        if self.preferences.trim().is_empty() {
            v.push(Violation::new("preferences", "preferences empty"));
        }
        if self.habits.is_empty() {
            v.push(Violation::new("habits", "habits empty"));
        }
        v
    }
}

/// Closed mood label set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mood {
    Happy,
    Relaxed,
    Neutral,
    Bored,
    Stressed,
    Sad,
}

impl Mood {
    pub const ALL: [Mood; 6] =
        [Mood::Happy, Mood::Relaxed, Mood::Neutral, Mood::Bored, Mood::Stressed, Mood::Sad];

    pub fn label(&self) -> &'static str {
        match self {
            Mood::Happy => "happy",
            Mood::Relaxed => "relaxed",
            Mood::Neutral => "neutral",
            Mood::Bored => "bored",
            Mood::Stressed => "stressed",
            Mood::Sad => "sad",
        }
    }
}

/// Time-of-day band, by hour: Morning [6,12), Afternoon [12,18),
/// Evening [18,24), Night [0,6).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TimeBand {
    Morning,
    Afternoon,
    Evening,
    Night,
}

impl TimeBand {
    pub const ALL: [TimeBand; 4] =
        [TimeBand::Morning, TimeBand::Afternoon, TimeBand::Evening, TimeBand::Night];

    pub fn from_minute_of_day(minute: u16) -> TimeBand {
        match minute / 60 {
            6..=11 => TimeBand::Morning,
            12..=17 => TimeBand::Afternoon,
            18..=23 => TimeBand::Evening,
            _ => TimeBand::Night,
        }
    }

    pub fn from_hour(hour: u32) -> TimeBand {
        TimeBand::from_minute_of_day(((hour % 24) * 60) as u16)
    }

    pub fn label(&self) -> &'static str {
        match self {
            TimeBand::Morning => "Morning",
            TimeBand::Afternoon => "Afternoon",
            TimeBand::Evening => "Evening",
            TimeBand::Night => "Night",
        }
    }

    pub fn index(&self) -> usize {
        match self {
            TimeBand::Morning => 0,
            TimeBand::Afternoon => 1,
            TimeBand::Evening => 2,
            TimeBand::Night => 3,
        }
    }
}

/// Temporal factor: minute of day plus day of week (0 = Monday).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalContext {
    pub minute_of_day: u16,
    pub day_of_week: u8,
}

/// Situational factor: what the user was just doing and how they feel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SituationalContext {
    pub latest_activity: String,
    pub mood: Mood,
    pub need_level: f64,
    pub energy_level: f64,
}

/// Constraint factor: money and time available for this engagement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintContext {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    pub time_available_minutes: u32,
}

/// The five contextual factors attached to every engagement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextVector {
    pub temporal: TemporalContext,
    pub location: String,
    pub situational: SituationalContext,
    pub goal: String,
    pub constraint: ConstraintContext,
}

impl Validate for ContextVector {
    fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.temporal.minute_of_day > 1439 {
            v.push(Violation::new("temporal.minute_of_day", "minute_of_day ∉ 0..1439"));
        }
        if self.temporal.day_of_week > 6 {
            v.push(Violation::new("temporal.day_of_week", "day_of_week ∉ 0..6"));
        }
        if !(0.0..=1.0).contains(&self.situational.need_level) {
            v.push(Violation::new("situational.need_level", "need_level ∉ [0,1]"));
        }
        if !(0.0..=1.0).contains(&self.situational.energy_level) {
            v.push(Violation::new("situational.energy_level", "energy_level ∉ [0,1]"));
        }
        if let Some(b) = self.constraint.budget {
            if !(b >= 0.0) {
                v.push(Violation::new("constraint.budget", "budget < 0"));
            }
        }
        if self.goal.trim().is_empty() {
            v.push(Violation::new("goal", "goal empty for an engagement"));
        }
        v
    }
}

/// Which of the five context factors are visible to the agent (Table-8 style
/// toggles). Default: all on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorMask {
    pub temporal: bool,
    pub spatial: bool,
    pub situational: bool,
    pub goal: bool,
    pub constraint: bool,
}

impl Default for FactorMask {
    fn default() -> Self {
        Self::all()
    }
}

impl FactorMask {
    pub fn all() -> Self {
        Self { temporal: true, spatial: true, situational: true, goal: true, constraint: true }
    }

    pub fn none() -> Self {
        Self { temporal: false, spatial: false, situational: false, goal: false, constraint: false }
    }

    pub fn time_only() -> Self {
        Self { temporal: true, ..Self::none() }
    }

    /// Parse labels like "c_t,c_l"; unknown labels are ignored.
    pub fn from_labels(labels: &[String]) -> Self {
        let mut mask = Self::none();
        for label in labels {
            match label.trim() {
                "c_t" | "temporal" | "time" => mask.temporal = true,
                "c_l" | "spatial" | "location" => mask.spatial = true,
                "c_s" | "situational" | "situation" => mask.situational = true,
                "c_g" | "goal" => mask.goal = true,
                "c_b" | "constraint" | "budget" => mask.constraint = true,
                _ => {}
            }
        }
        mask
    }

    pub fn intersect(&self, other: &FactorMask) -> FactorMask {
        FactorMask {
            temporal: self.temporal && other.temporal,
            spatial: self.spatial && other.spatial,
            situational: self.situational && other.situational,
            goal: self.goal && other.goal,
            constraint: self.constraint && other.constraint,
        }
    }
}

pub const DAY_LABELS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];

/// Render the masked context factors as a single line; empty when every
/// factor is masked off.
pub fn context_text(context: &ContextVector, mask: &FactorMask) -> String {
    let mut segments = Vec::new();
    if mask.temporal {
        let day = DAY_LABELS[(context.temporal.day_of_week % 7) as usize];
        let hour = context.temporal.minute_of_day / 60;
        let minute = context.temporal.minute_of_day % 60;
        segments.push(format!("{day} {hour:02}:{minute:02}"));
    }
    if mask.spatial {
        segments.push(format!("at {}", context.location));
    }
    if mask.situational {
        segments.push(format!(
            "after {}, mood {}, need {:.2}, energy {:.2}",
            context.situational.latest_activity,
            context.situational.mood.label(),
            context.situational.need_level,
            context.situational.energy_level
        ));
    }
    if mask.goal {
        segments.push(format!("goal: {}", context.goal));
    }
    if mask.constraint {
        let budget = match context.constraint.budget {
            Some(b) => format!("budget {b:.2}"),
            None => "no budget limit".to_string(),
        };
        segments.push(format!("{budget}, {} min available", context.constraint.time_available_minutes));
    }
    segments.join("; ")
}

/// A catalog item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    pub title: String,
    pub description: String,
    pub categories: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brand: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    #[serde(default)]
    pub stat_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stat_mean_rating: Option<f64>,
}

impl Item {
    /// Tokens an agent matches preferences against: category labels plus brand.
    pub fn matching_tokens(&self) -> Vec<String> {
        let mut tokens: Vec<String> = self.categories.iter().flat_map(|c| tokenize(c)).collect();
        if let Some(brand) = &self.brand {
            tokens.extend(tokenize(brand));
        }
        tokens.sort();
        tokens.dedup();
        tokens
    }
}

impl Validate for Item {
    fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.title.trim().is_empty() {
            v.push(Violation::new("title", "title empty"));
        }
        match (self.stat_count, self.stat_mean_rating) {
            (0, Some(_)) => v.push(Violation::new(
                "stat_mean_rating",
                "stat_mean_rating present with stat_count = 0",
            )),
            (c, None) if c > 0 => {
                v.push(Violation::new("stat_mean_rating", "stat_mean_rating missing with stat_count > 0"))
            }
            (_, Some(m)) if !(1.0..=5.0).contains(&m) => {
                v.push(Violation::new("stat_mean_rating", "stat_mean_rating ∉ [1,5]"))
            }
            _ => {}
        }
        if let Some(p) = self.price {
            if !(p >= 0.0) {
                v.push(Violation::new("price", "price < 0"));
            }
        }
        v
    }
}

/// What happened between a user and an item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionKind {
    View,
    Rate,
    Click,
    Purchase,
}

/// One dataset interaction row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user_id: String,
    pub item_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<u8>,
    pub timestamp: i64,
    pub kind: InteractionKind,
}

impl Validate for InteractionRecord {
    fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.kind == InteractionKind::Rate && self.rating.is_none() {
            v.push(Violation::new("rating", "kind = rate without rating"));
        }
        if let Some(r) = self.rating {
            if !(1..=5).contains(&r) {
                v.push(Violation::new("rating", "rating ∉ 1..5"));
            }
        }
        v
    }
}

/// The discrete action grammar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    NextPage,
    PrevPage,
    ClickItem { item_id: String },
    Search { query: String },
    Rate { item_id: String, value: u8 },
    Exit,
    WebClick { semantic_id: String },
    WebInput { semantic_id: String, text: String },
    WebTerminate,
}

/// True for semantic ids that end a webshop session with a purchase.
pub fn is_purchase_tagged(semantic_id: &str) -> bool {
    let lower = semantic_id.to_lowercase();
    lower.contains("purchase") || lower.contains("buy")
}

impl Action {
    /// Whether this action ends a session.
    pub fn is_terminal(&self) -> bool {
        match self {
            Action::Exit | Action::WebTerminate => true,
            Action::WebClick { semantic_id } => is_purchase_tagged(semantic_id),
            _ => false,
        }
    }

    /// High-level action category (click / input / navigate / rate / search / terminate).
    pub fn type_label(&self) -> &'static str {
        match self {
            Action::NextPage | Action::PrevPage => "navigate",
            Action::ClickItem { .. } | Action::WebClick { .. } => "click",
            Action::Search { .. } => "search",
            Action::Rate { .. } => "rate",
            Action::WebInput { .. } => "input",
            Action::Exit | Action::WebTerminate => "terminate",
        }
    }
}

impl Validate for Action {
    fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        match self {
            Action::Rate { value, .. } => {
                if !(1..=5).contains(value) {
                    v.push(Violation::new("rate.value", "rate value ∉ 1..5"));
                }
            }
            Action::WebInput { text, .. } => {
                if text.is_empty() {
                    v.push(Violation::new("web_input.text", "input text empty"));
                }
            }
            Action::Search { query } => {
                if query.is_empty() {
                    v.push(Violation::new("search.query", "search query empty"));
                }
            }
            _ => {}
        }
        v
    }
}

/// Recommendation pages vs webshop pages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainMode {
    Recommendation,
    Webshop,
}

/// What the agent currently sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub mode: DomainMode,
    pub page_number: u32,
    pub items: Vec<Item>,
    pub page_context: String,
    pub user_context: ContextVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expanded_item: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interactive_elements: Vec<String>,
    pub terminated: bool,
    /// The agent's own historical ratings, shown as "History ratings" when present.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub own_ratings: BTreeMap<String, u8>,
}

impl Validate for SessionState {
    fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.page_number < 1 {
            v.push(Violation::new("page_number", "page_number < 1"));
        }
        for (i, item) in self.items.iter().enumerate() {
            for mut violation in item.validate() {
                violation.path = format!("items[{i}].{}", violation.path);
                v.push(violation);
            }
        }
        v
    }
}

/// One executed step: what the agent saw, thought, and did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub page_number: u32,
    pub state_digest: String,
    pub thought: String,
    pub action: Action,
}

/// A full session: context plus the ordered step record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub agent_id: String,
    pub session_id: String,
    pub context: ContextVector,
    pub steps: Vec<TrajectoryStep>,
    pub terminal_action: Action,
    /// True when the step cap forced the exit rather than the agent choosing it.
    #[serde(default)]
    pub forced_exit: bool,
    /// False when a backend failure aborted the session mid-way.
    #[serde(default = "default_true")]
    pub complete: bool,
}

fn default_true() -> bool {
    true
}

impl Trajectory {
    /// Number of distinct pages the agent saw.
    pub fn pages_visited(&self) -> usize {
        let mut pages: Vec<u32> = self.steps.iter().map(|s| s.page_number).collect();
        pages.sort_unstable();
        pages.dedup();
        pages.len()
    }
}

impl Validate for Trajectory {
    fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.steps.is_empty() {
            v.push(Violation::new("steps", "steps empty"));
        }
        let terminal_ok = match &self.terminal_action {
            Action::Exit | Action::WebTerminate => true,
            Action::WebClick { semantic_id } => is_purchase_tagged(semantic_id),
            _ => false,
        };
        if !terminal_ok {
            v.push(Violation::new(
                "terminal_action",
                "terminal_action not Exit/WebTerminate/purchase-tagged click",
            ));
        }
        v
    }
}

/// Bounded affect coordinates, each in [0,1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionalState {
    pub fatigue: f64,
    pub satisfaction: f64,
    pub curiosity: f64,
    pub boredom: f64,
}

impl EmotionalState {
    /// Rested neutral start: accumulators at zero, valence coordinates mid-scale.
    pub fn neutral() -> Self {
        Self { fatigue: 0.0, satisfaction: 0.5, curiosity: 0.5, boredom: 0.0 }
    }

    pub fn coordinates(&self) -> [(&'static str, f64); 4] {
        [
            ("fatigue", self.fatigue),
            ("satisfaction", self.satisfaction),
            ("curiosity", self.curiosity),
            ("boredom", self.boredom),
        ]
    }
}

impl Validate for EmotionalState {
    fn validate(&self) -> Vec<Violation> {
        self.coordinates()
            .iter()
            .filter(|(_, value)| !(0.0..=1.0).contains(value))
            .map(|(name, _)| Violation::new(*name, format!("{name} ∉ [0,1]")))
            .collect()
    }
}
