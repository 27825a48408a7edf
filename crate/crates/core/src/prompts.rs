//! Prompt builders for every reasoning task.
//!
//! Each prompt mixes natural-language instructions with machine-readable
//! field lines (`NAME: value`, `ITEM: id | title | categories | brand | rating`)
//! so the same text drives both the HTTP backend and the deterministic
//! scripted backend. `CompletionRequest::new` prepends the `#TASK:` line.

use crate::backend::{CompletionRequest, TaskTag};
use crate::domain::{context_text, ContextVector, FactorMask, Item, Persona};
use crate::memory::EpisodicRecord;

/// Replace field-separator characters so item lines stay parseable.
pub fn sanitize(text: &str) -> String {
    text.replace('|', "/").replace('\n', " ")
}

/// Canonical item line. `rating` is the agent's own rating when known.
pub fn item_line(item: &Item, rating: Option<u8>) -> String {
    let categories: Vec<String> = item.categories.iter().map(|c| sanitize(c)).collect();
    format!(
        "ITEM: {} | {} | {} | brand={} | rating={}",
        sanitize(&item.item_id),
        sanitize(&item.title),
        categories.join(","),
        item.brand.as_deref().map(|b| sanitize(b)).unwrap_or_else(|| "-".into()),
        rating.map(|r| r.to_string()).unwrap_or_else(|| "-".into()),
    )
}

fn persona_block(persona: &Persona) -> String {
    format!(
        "PERSONA: {} years old, {}; openness={} conscientiousness={} extraversion={} agreeableness={} neuroticism={}\n\
         HABITS: {}\nGOALS: {}\nPREFERENCES: {}\n{}",
        persona.age,
        sanitize(&persona.occupation),
        persona.traits.openness,
        persona.traits.conscientiousness,
        persona.traits.extraversion,
        persona.traits.agreeableness,
        persona.traits.neuroticism,
        persona.habits.join("; "),
        persona.recent_goals.join("; "),
        sanitize(&persona.preferences),
        persona
            .context_summary
            .as_ref()
            .map(|s| format!("CONTEXT_SUMMARY: {}\n", sanitize(s)))
            .unwrap_or_default(),
    )
}

fn context_block(context: &ContextVector, mask: &FactorMask) -> String {
    let text = context_text(context, mask);
    if text.is_empty() {
        String::new()
    } else {
        format!("CONTEXT: {text}\n")
    }
}

pub const AGENT_SYSTEM: &str = "You are simulating a specific person using a recommendation \
service. Stay in character: decide exactly as this person would, given their persona, context, \
and history.";

// --- persona ---------------------------------------------------------------

pub fn persona_generate(
    agent_id: &str,
    candidate_index: usize,
    history: &[(Item, Option<u8>)],
    known_demographics: Option<(u32, &str)>,
) -> (String, String) {
    let mut body = String::new();
    body.push_str(&format!("AGENT: {agent_id}\n"));
    body.push_str(&format!("CANDIDATE_INDEX: {candidate_index}\n"));
    if let Some((age, occupation)) = known_demographics {
        body.push_str(&format!("DEMOGRAPHICS_KNOWN: age={age} occupation={}\n", sanitize(occupation)));
    }
    body.push_str("HISTORY:\n");
    for (item, rating) in history {
        body.push_str(&item_line(item, *rating));
        body.push('\n');
    }
    body.push_str(
        "\nFrom this interaction history, invent one plausible persona for the person behind it.\n\
         Respond with exactly these fields:\n\
         AGE: <integer 13-100>\nOCCUPATION: <short text>\n\
         OPENNESS: <1-3>\nCONSCIENTIOUSNESS: <1-3>\nEXTRAVERSION: <1-3>\nAGREEABLENESS: <1-3>\nNEUROTICISM: <1-3>\n\
         HABITS: engagement=<low|medium|high>; conformity=<low|medium|high>; variety=<low|medium|high>\n\
         GOALS: <goal>; <goal>\nPREFERENCES: <one sentence naming favorite categories>\n",
    );
    ("You reconstruct user profiles from interaction histories.".into(), body)
}

pub fn persona_score(preferences: &str, held_out: &[Item]) -> (String, String) {
    let mut body = String::new();
    body.push_str(&format!("PREFERENCES: {}\n", sanitize(preferences)));
    body.push_str("HELD_OUT:\n");
    for item in held_out {
        body.push_str(&item_line(item, None));
        body.push('\n');
    }
    body.push_str(
        "\nJudge how consistent these held-out interactions are with the stated preferences.\n\
         Respond with:\nSCORE: <number 0-100>\n",
    );
    ("You score persona consistency against held-out interactions.".into(), body)
}

// --- agent loop --------------------------------------------------------------

pub fn appraise(
    persona: &Persona,
    context: &ContextVector,
    mask: &FactorMask,
    evidence: &[EpisodicRecord],
    page_items: &[(Item, Option<u8>)],
) -> (String, String) {
    let mut body = String::new();
    body.push_str(&format!("AGENT: {}\n", persona.agent_id));
    body.push_str(&persona_block(persona));
    body.push_str(&context_block(context, mask));
    body.push_str("EVIDENCE:\n");
    for record in evidence {
        body.push_str(&format!("MEMORY: {}\n", sanitize(&record.text)));
    }
    body.push_str("PAGE:\n");
    for (item, rating) in page_items {
        body.push_str(&item_line(item, *rating));
        body.push('\n');
    }
    body.push_str(
        "\nAs this person, appraise every item on the page. For each item respond with one line:\n\
         INTENTION: <item_id> <WATCH|SKIP> <confidence 0-1>\n",
    );
    (AGENT_SYSTEM.into(), body)
}

/// Session counters the internal-state inference conditions on.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SessionTelemetry {
    pub steps_taken: u32,
    pub base_fatigue: f64,
    pub boredom_before: f64,
    pub page_watch_count: u32,
    pub novelty_fraction: f64,
}

pub fn infer_internal(
    persona: &Persona,
    context: &ContextVector,
    mask: &FactorMask,
    telemetry: &SessionTelemetry,
) -> (String, String) {
    let mut body = String::new();
    body.push_str(&format!("AGENT: {}\n", persona.agent_id));
    body.push_str(&context_block(context, mask));
    body.push_str(&format!("OPENNESS: {}\n", persona.traits.openness));
    body.push_str(&format!("STEPS_TAKEN: {}\n", telemetry.steps_taken));
    body.push_str(&format!("BASE_FATIGUE: {:.6}\n", telemetry.base_fatigue));
    body.push_str(&format!("BOREDOM_BEFORE: {:.6}\n", telemetry.boredom_before));
    body.push_str(&format!("PAGE_WATCH_COUNT: {}\n", telemetry.page_watch_count));
    body.push_str(&format!("NOVELTY_FRACTION: {:.6}\n", telemetry.novelty_fraction));
    body.push_str(
        "\nInfer this person's current internal state from the ongoing session.\n\
         Respond with:\nFATIGUE: <0-1>\nCURIOSITY: <0-1>\nBOREDOM: <0-1>\n",
    );
    (AGENT_SYSTEM.into(), body)
}

/// Everything action selection sees about the current state.
pub struct ActView<'a> {
    pub persona: &'a Persona,
    pub context: &'a ContextVector,
    pub mask: &'a FactorMask,
    pub page_text: &'a str,
    pub page_items: &'a [(Item, Option<u8>)],
    pub intentions: &'a [(String, bool, f64)],
    pub visited: &'a [String],
    pub expanded_item: Option<&'a str>,
    pub expanded_rated: bool,
    pub has_more_pages: bool,
    pub boredom: f64,
    pub fatigue: f64,
    pub curiosity: f64,
    pub legal_actions: &'a [String],
    pub thought_mode: bool,
}

pub fn select_action(view: &ActView<'_>) -> (String, String) {
    let mut body = String::new();
    body.push_str(&format!("AGENT: {}\n", view.persona.agent_id));
    body.push_str(&persona_block(view.persona));
    body.push_str(&context_block(view.context, view.mask));
    body.push_str(&format!("PAGE_TEXT:\n{}\n", view.page_text));
    body.push_str("PAGE:\n");
    for (item, rating) in view.page_items {
        body.push_str(&item_line(item, *rating));
        body.push('\n');
    }
    for (item_id, watch, confidence) in view.intentions {
        body.push_str(&format!(
            "INTENTION: {} {} {confidence:.6}\n",
            sanitize(item_id),
            if *watch { "WATCH" } else { "SKIP" }
        ));
    }
    body.push_str(&format!("VISITED: {}\n", view.visited.join(",")));
    body.push_str(&format!("EXPANDED_ITEM: {}\n", view.expanded_item.unwrap_or("none")));
    body.push_str(&format!("EXPANDED_RATED: {}\n", if view.expanded_rated { "yes" } else { "no" }));
    body.push_str(&format!("HAS_MORE_PAGES: {}\n", if view.has_more_pages { "yes" } else { "no" }));
    body.push_str(&format!("FATIGUE: {:.6}\n", view.fatigue));
    body.push_str(&format!("CURIOSITY: {:.6}\n", view.curiosity));
    body.push_str(&format!("BOREDOM: {:.6}\n", view.boredom));
    body.push_str("LEGAL_ACTIONS: ");
    body.push_str(&view.legal_actions.join(" "));
    body.push('\n');
    if view.thought_mode {
        body.push_str(
            "\nWeigh the legal actions against your goals, constraints, and intentions.\n\
             Respond with:\nTHOUGHT: <one or two sentences>\nACTION: <one legal action>\n",
        );
    } else {
        body.push_str("\nRespond with:\nACTION: <one legal action>\n");
    }
    (AGENT_SYSTEM.into(), body)
}

pub fn reflect(
    persona: &Persona,
    action_text: &str,
    acted_item: Option<(&Item, Option<u8>)>,
) -> (String, String) {
    let mut body = String::new();
    body.push_str(&format!("AGENT: {}\n", persona.agent_id));
    body.push_str(&format!("PREFERENCES: {}\n", sanitize(&persona.preferences)));
    body.push_str(&format!("ACTION: {action_text}\n"));
    if let Some((item, rating)) = acted_item {
        body.push_str(&item_line(item, rating));
        body.push('\n');
    }
    body.push_str(
        "\nIn one short sentence, explain why you just took this action, grounded in your tastes.\n",
    );
    (AGENT_SYSTEM.into(), body)
}

pub fn rate_item(
    persona: &Persona,
    context: &ContextVector,
    mask: &FactorMask,
    evidence: &[EpisodicRecord],
    item: &Item,
) -> (String, String) {
    let mut body = String::new();
    body.push_str(&format!("AGENT: {}\n", persona.agent_id));
    body.push_str(&persona_block(persona));
    body.push_str(&context_block(context, mask));
    body.push_str("EVIDENCE:\n");
    for record in evidence {
        body.push_str(&format!("MEMORY: {}\n", sanitize(&record.text)));
    }
    body.push_str(&item_line(item, None));
    body.push('\n');
    body.push_str(
        "\nAs this person, rate the item.\n\
         Respond with:\nRATING: <integer 1-5>\nREASON: <one sentence>\n",
    );
    (AGENT_SYSTEM.into(), body)
}

/// Believability-style classification of already-interacted items.
pub fn classify_interacted(
    persona: &Persona,
    memory_item_ids: &[String],
    items: &[Item],
    item_type: &str,
) -> (String, String) {
    let mut body = String::new();
    body.push_str(&format!("AGENT: {}\n", persona.agent_id));
    body.push_str(&format!("PREFERENCES: {}\n", sanitize(&persona.preferences)));
    body.push_str(&format!("MEMORY_ITEM_IDS: {}\n", memory_item_ids.join(",")));
    body.push_str("### Instructions\n\n");
    body.push_str(&format!("1. Review each {item_type} in the ## Recommended List ##.\n"));
    body.push_str(&format!(
        "2. For each {item_type}, classify if you have already interacted with it (\"Interacted\") \
         or if you have not (\"Not Interacted\").\n",
    ));
    body.push_str("## Recommended List ##\n");
    for item in items {
        body.push_str(&item_line(item, None));
        body.push('\n');
    }
    body.push_str(
        "\nRespond with one line per item:\nLABEL: <item_id> <Interacted|Not Interacted>\n",
    );
    (AGENT_SYSTEM.into(), body)
}

/// Post-interview satisfaction prompt. The instruction text follows the
/// standard post-interview format verbatim.
pub fn post_interview(persona: &Persona, session_log: &str, satisfaction: f64) -> (String, String) {
    let mut body = String::new();
    body.push_str(&format!("AGENT: {}\n", persona.agent_id));
    body.push_str(&format!("SATISFACTION: {satisfaction:.6}\n"));
    body.push_str(&format!("SESSION_LOG:\n{session_log}\n\n"));
    body.push_str(
        "How satisfied are you with the recommender system you recently interacted with?\n\
         ### Instructions:\n\
         1. Rating: Provide a rating from 1 to 10.\n\
         2. Explanation: Explain the reason for your rating.\n\n\
         ### Response Format:\n\
         - RATING: [integer between 1 and 10]\n\
         - REASON: [detailed explanation]\n",
    );
    (AGENT_SYSTEM.into(), body)
}

// --- thought synthesis --------------------------------------------------------

pub fn thought_item_disentanglement(
    persona: &Persona,
    context: Option<&str>,
    item: &Item,
    rating: u8,
    history_excerpt: &str,
) -> (String, String) {
    let mut body = String::new();
    body.push_str(&format!("AGENT: {}\n", persona.agent_id));
    body.push_str(&persona_block(persona));
    if let Some(context) = context {
        body.push_str(&format!("CONTEXT: {context}\n"));
    }
    body.push_str(&format!("HISTORY_EXCERPT: {}\n", sanitize(history_excerpt)));
    body.push_str(&item_line(item, Some(rating)));
    body.push('\n');
    body.push_str(&format!("RATING: {rating}\n"));
    body.push_str(
        "\nExplain why this rating aligns with your preferences, persona, and history, \
         grounding the explanation in the item's visible features.\n",
    );
    (AGENT_SYSTEM.into(), body)
}

pub fn thought_trajectory_alignment(
    persona: &Persona,
    context: Option<&str>,
    state_digest: &str,
    action_text: &str,
    alternatives: &[String],
    history_excerpt: &str,
) -> (String, String) {
    let mut body = String::new();
    body.push_str(&format!("AGENT: {}\n", persona.agent_id));
    body.push_str(&persona_block(persona));
    if let Some(context) = context {
        body.push_str(&format!("CONTEXT: {context}\n"));
    }
    body.push_str(&format!("STATE: {}\n", sanitize(state_digest)));
    body.push_str(&format!("HISTORY_EXCERPT: {}\n", sanitize(history_excerpt)));
    body.push_str(&format!("ACTION: {action_text}\n"));
    for alternative in alternatives {
        body.push_str(&format!("ALTERNATIVE: {alternative}\n"));
    }
    body.push_str(
        "\nGenerate a brief rationale for why the chosen action is preferred over the \
         alternatives and how it aligns with your persona and history. The reflection must be \
         grounded in observable aspects rather than generic justifications.\n",
    );
    (AGENT_SYSTEM.into(), body)
}

// --- template registry ---------------------------------------------------------

/// One rendered sample request per task tag, for the prompt-lint test.
pub fn sample_requests() -> Vec<CompletionRequest> {
    use crate::domain::{
        BigFive, ConstraintContext, Mood, SituationalContext, TemporalContext,
    };
    let persona = Persona {
        agent_id: "u1".into(),
        age: 30,
        occupation: "office worker".into(),
        traits: BigFive {
            openness: 2,
            conscientiousness: 2,
            extraversion: 2,
            agreeableness: 2,
            neuroticism: 2,
        },
        habits: vec!["engagement: medium".into()],
        recent_goals: vec!["relax".into()],
        preferences: "Enjoys Comedy, Drama".into(),
        context_summary: None,
    };
    let item = Item {
        item_id: "1".into(),
        title: "Toy Story".into(),
        description: "Animated classic".into(),
        categories: vec!["Animation".into(), "Comedy".into()],
        brand: None,
        price: None,
        stat_count: 10,
        stat_mean_rating: Some(4.2),
    };
    let context = ContextVector {
        temporal: TemporalContext { minute_of_day: 1140, day_of_week: 1 },
        location: "home".into(),
        situational: SituationalContext {
            latest_activity: "dinner".into(),
            mood: Mood::Relaxed,
            need_level: 0.5,
            energy_level: 0.5,
        },
        goal: "find something entertaining to watch".into(),
        constraint: ConstraintContext { budget: Some(20.0), time_available_minutes: 90 },
    };
    let mask = FactorMask::all();
    let telemetry = SessionTelemetry::default();
    let history = vec![(item.clone(), Some(4))];
    let view = ActView {
        persona: &persona,
        context: &context,
        mask: &mask,
        page_text: "PAGE 1",
        page_items: &history,
        intentions: &[("1".into(), true, 0.5)],
        visited: &[],
        expanded_item: None,
        expanded_rated: false,
        has_more_pages: true,
        boredom: 0.0,
        fatigue: 0.0,
        curiosity: 0.5,
        legal_actions: &["[NEXT_PAGE]".into(), "[EXIT]".into()],
        thought_mode: true,
    };
    let schedule_body = crate::lifesim::schedule_prompt_body(
        &persona,
        1,
        crate::lifesim::DayType::Weekday,
        &crate::lifesim::Externals {
            weather: "sunny".into(),
            season: "spring".into(),
            event: None,
        },
        None,
    );
    let aggregates = crate::lifesim::SummaryAggregates {
        band_frequencies: [0.1, 0.2, 0.5, 0.2],
        top_locations: vec![("home".into(), 10)],
        top_goals: vec![("relax".into(), 5)],
        budget_median: Some(20.0),
    };
    let summarize_body = crate::lifesim::summarize_prompt_body("u1", 30, &aggregates);

    let pairs: Vec<(TaskTag, (String, String))> = vec![
        (TaskTag::Persona, persona_generate("u1", 0, &history, None)),
        (TaskTag::Score, persona_score("Enjoys Comedy", std::slice::from_ref(&item))),
        (TaskTag::Appraise, appraise(&persona, &context, &mask, &[], &history)),
        (TaskTag::Internal, infer_internal(&persona, &context, &mask, &telemetry)),
        (TaskTag::Act, select_action(&view)),
        (TaskTag::Reflect, reflect(&persona, "[EXIT]", None)),
        (TaskTag::Rate, rate_item(&persona, &context, &mask, &[], &item)),
        (
            TaskTag::Classify,
            classify_interacted(&persona, &["1".into()], std::slice::from_ref(&item), "movie"),
        ),
        (TaskTag::Schedule, (crate::lifesim::SCHEDULE_SYSTEM.into(), schedule_body)),
        (TaskTag::Summarize, (crate::lifesim::SUMMARIZE_SYSTEM.into(), summarize_body)),
        (TaskTag::Interview, post_interview(&persona, "step 1: [EXIT]", 0.8)),
        (
            TaskTag::ThoughtId,
            thought_item_disentanglement(&persona, None, &item, 4, "rated Toy Story 4/5"),
        ),
        (
            TaskTag::ThoughtTa,
            thought_trajectory_alignment(
                &persona,
                None,
                "page 1 items [1]",
                "[CLICK_ITEM:1]",
                &["[NEXT_PAGE]".into(), "[EXIT]".into()],
                "rated Toy Story 4/5",
            ),
        ),
    ];
    pairs
        .into_iter()
        .map(|(tag, (system, body))| CompletionRequest::new(tag, system, body))
        .collect()
}
