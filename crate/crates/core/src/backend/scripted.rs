//! Deterministic scripted backend: a pure function of (task tag, structured
//! prompt fields, seed). Stands in for the LLM so the whole simulator runs
//! and verifies offline.

use crate::backend::{
    parse_tagged_f64, parse_tagged_field, parse_tagged_int, Backend, BackendError,
    CompletionRequest, CompletionResponse, TaskTag,
};
use crate::domain::tokenize;
use crate::lifesim::{DayType, TemplateLibrary};
use crate::seeds;
use rand::Rng;
use std::collections::BTreeSet;

/// How the CLASSIFY task decides "Interacted".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifyMode {
    /// Oracle rule: interacted iff the item id appears in episodic memory.
    Membership,
    /// Degraded rule: preference-overlap score with a conservatism threshold
    /// that rises with the fraction of unfamiliar-looking items on the list.
    OverlapConservative,
}

/// Rating rule: 1 + round(4 × overlap_fraction).
pub fn rating_from_overlap(overlap: f64) -> u8 {
    (1.0 + (4.0 * overlap).round()).clamp(1.0, 5.0) as u8
}

/// WATCH/SKIP cutoff on overlap fraction.
pub const WATCH_THRESHOLD: f64 = 0.34;
/// Exit cutoff on boredom.
pub const BOREDOM_EXIT_THRESHOLD: f64 = 0.8;
/// Per-step fatigue increment.
pub const FATIGUE_STEP: f64 = 0.05;
/// Per-zero-WATCH-page boredom increment.
pub const BOREDOM_STEP: f64 = 0.15;

// Degraded-classify constants.
const UNFAMILIAR_CUTOFF: f64 = 0.3;
const CLASSIFY_BASE_THRESHOLD: f64 = 0.35;
const CLASSIFY_CONSERVATISM: f64 = 0.45;
const CLASSIFY_JITTER: f64 = 0.1;

#[derive(Debug, Clone)]
struct PromptItem {
    id: String,
    title: String,
    categories: Vec<String>,
    brand: Option<String>,
}

fn parse_items(text: &str) -> Vec<PromptItem> {
    let mut items = Vec::new();
    for line in text.lines() {
        let Some(rest) = line.trim().strip_prefix("ITEM: ") else { continue };
        let parts: Vec<&str> = rest.split(" | ").collect();
        if parts.len() < 3 {
            continue;
        }
        let brand = parts
            .get(3)
            .and_then(|b| b.strip_prefix("brand="))
            .filter(|b| *b != "-")
            .map(|b| b.to_string());
        items.push(PromptItem {
            id: parts[0].to_string(),
            title: parts[1].to_string(),
            categories: parts[2]
                .split(',')
                .map(|c| c.trim().to_string())
                .filter(|c| !c.is_empty())
                .collect(),
            brand,
        });
    }
    items
}

/// Fraction of the item's labels (categories plus brand) whose tokens all
/// appear in the preference keyword set.
fn overlap_fraction(item: &PromptItem, keywords: &BTreeSet<String>) -> f64 {
    let mut labels: Vec<&str> = item.categories.iter().map(|c| c.as_str()).collect();
    if let Some(brand) = &item.brand {
        labels.push(brand.as_str());
    }
    if labels.is_empty() {
        return 0.0;
    }
    let matched = labels
        .iter()
        .filter(|label| {
            let tokens = tokenize(label);
            !tokens.is_empty() && tokens.iter().all(|t| keywords.contains(t))
        })
        .count();
    matched as f64 / labels.len() as f64
}

/// Tokens of the item's labels that appear in the keyword set, sorted.
fn matched_tokens(item: &PromptItem, keywords: &BTreeSet<String>) -> Vec<String> {
    let mut tokens: BTreeSet<String> = BTreeSet::new();
    for category in &item.categories {
        for token in tokenize(category) {
            if keywords.contains(&token) {
                tokens.insert(token);
            }
        }
    }
    if let Some(brand) = &item.brand {
        for token in tokenize(brand) {
            if keywords.contains(&token) {
                tokens.insert(token);
            }
        }
    }
    tokens.into_iter().collect()
}

fn keywords_of(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().collect()
}

fn field(text: &str, name: &str) -> String {
    parse_tagged_field(text, name).unwrap_or_default()
}

/// Deterministic rule-based backend.
pub struct ScriptedBackend {
    templates: TemplateLibrary,
    classify_mode: ClassifyMode,
}

impl Default for ScriptedBackend {
    fn default() -> Self {
        Self { templates: TemplateLibrary::default(), classify_mode: ClassifyMode::Membership }
    }
}

impl ScriptedBackend {
    pub fn new(templates: TemplateLibrary, classify_mode: ClassifyMode) -> Self {
        Self { templates, classify_mode }
    }

    pub fn with_classify_mode(classify_mode: ClassifyMode) -> Self {
        Self { classify_mode, ..Self::default() }
    }

    fn respond(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let text = &request.user_text;
        match request.task_tag {
            TaskTag::Persona => Ok(self.persona(text, request.seed.unwrap_or(0))),
            TaskTag::Score => Ok(score(text)),
            TaskTag::Appraise => Ok(appraise(text)),
            TaskTag::Internal => Ok(internal(text)),
            TaskTag::Act => Ok(act(text)),
            TaskTag::Reflect => Ok(reflect(text)),
            TaskTag::Rate => Ok(rate(text)),
            TaskTag::Classify => Ok(self.classify(text)),
            TaskTag::Schedule => Ok(self.schedule(text, request.seed.unwrap_or(0))),
            TaskTag::Summarize => Ok(summarize(text)),
            TaskTag::Interview => Ok(interview(text)),
            TaskTag::ThoughtId => Ok(thought_id(text)),
            TaskTag::ThoughtTa => Ok(thought_ta(text)),
        }
    }

    fn persona(&self, text: &str, seed: u64) -> String {
        let items = parse_items(text);
        let candidate_index =
            parse_tagged_int(text, "CANDIDATE_INDEX").unwrap_or(0).max(0) as usize;
        // Category labels ranked by frequency, ties alphabetical.
        let mut counts: std::collections::BTreeMap<String, u64> = std::collections::BTreeMap::new();
        for item in &items {
            for category in &item.categories {
                *counts.entry(category.clone()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let labels: Vec<String> = ranked.into_iter().map(|(l, _)| l).collect();
        // Candidate k slides a 3-label window down the ranking, so candidates
        // differ and consistency scoring has something to separate.
        let window = if labels.is_empty() {
            vec!["varied picks".to_string()]
        } else {
            let max_start = labels.len().saturating_sub(3);
            let start = candidate_index.min(max_start);
            labels[start..(start + 3).min(labels.len())].to_vec()
        };
        let preferences = format!("Enjoys {}", window.join(", "));

        let mut rng = seeds::rng(seed, "scripted-persona", &[candidate_index as u64]);
        let demographics = field(text, "DEMOGRAPHICS_KNOWN");
        let (age, occupation) = if demographics.is_empty() {
            let occupations = [
                "office worker",
                "student",
                "service worker",
                "freelance designer",
                "software engineer",
                "nurse",
                "sales manager",
                "teacher",
            ];
            (18 + rng.gen_range(0..48), occupations[rng.gen_range(0..occupations.len())].to_string())
        } else {
            let age = demographics
                .split_whitespace()
                .find_map(|p| p.strip_prefix("age="))
                .and_then(|a| a.parse::<u32>().ok())
                .unwrap_or(30);
            let occupation = demographics
                .split_once("occupation=")
                .map(|(_, o)| o.trim().to_string())
                .filter(|o| !o.is_empty())
                .unwrap_or_else(|| "office worker".to_string());
            (age, occupation)
        };
        let levels = ["low", "medium", "high"];
        let habit = |rng: &mut rand_chacha::ChaCha8Rng| levels[rng.gen_range(0..3)];
        let goals = match window.as_slice() {
            [] => "browse something new".to_string(),
            [a] => format!("watch more {a} titles"),
            [a, b, ..] => format!("watch more {a} titles; explore new {b} picks"),
        };
        format!(
            "AGE: {age}\nOCCUPATION: {occupation}\nOPENNESS: {}\nCONSCIENTIOUSNESS: {}\n\
             EXTRAVERSION: {}\nAGREEABLENESS: {}\nNEUROTICISM: {}\n\
             HABITS: engagement={}; conformity={}; variety={}\nGOALS: {goals}\nPREFERENCES: {preferences}",
            rng.gen_range(1..=3),
            rng.gen_range(1..=3),
            rng.gen_range(1..=3),
            rng.gen_range(1..=3),
            rng.gen_range(1..=3),
            habit(&mut rng),
            habit(&mut rng),
            habit(&mut rng),
        )
    }

    fn classify(&self, text: &str) -> String {
        let items = parse_items(text);
        let agent = field(text, "AGENT");
        let memory_ids: BTreeSet<String> = field(text, "MEMORY_ITEM_IDS")
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        let keywords = keywords_of(&field(text, "PREFERENCES"));
        let mut lines = Vec::with_capacity(items.len());
        match self.classify_mode {
            ClassifyMode::Membership => {
                for item in &items {
                    let label = if memory_ids.contains(&item.id) { "Interacted" } else { "Not Interacted" };
                    lines.push(format!("LABEL: {} {label}", item.id));
                }
            }
            ClassifyMode::OverlapConservative => {
                let overlaps: Vec<f64> =
                    items.iter().map(|i| overlap_fraction(i, &keywords)).collect();
                let unfamiliar = if items.is_empty() {
                    0.0
                } else {
                    overlaps.iter().filter(|o| **o < UNFAMILIAR_CUTOFF).count() as f64
                        / items.len() as f64
                };
                let threshold = CLASSIFY_BASE_THRESHOLD + CLASSIFY_CONSERVATISM * unfamiliar;
                for (item, overlap) in items.iter().zip(&overlaps) {
                    let hash = seeds::derive(
                        seeds::hash_str(&agent),
                        "classify-jitter",
                        &[seeds::hash_str(&item.id)],
                    );
                    let jitter = ((hash % 2001) as f64 / 1000.0 - 1.0) * CLASSIFY_JITTER;
                    let label = if overlap + jitter >= threshold { "Interacted" } else { "Not Interacted" };
                    lines.push(format!("LABEL: {} {label}", item.id));
                }
            }
        }
        lines.join("\n")
    }

    fn schedule(&self, text: &str, seed: u64) -> String {
        let occupation = field(text, "OCCUPATION");
        let day_type = if field(text, "DAY_TYPE").eq_ignore_ascii_case("weekend") {
            DayType::Weekend
        } else {
            DayType::Weekday
        };
        let class = self.templates.classify_occupation(&occupation);
        let slots = self.templates.render_slots(&class, day_type, seed);
        let lines: Vec<String> = slots
            .iter()
            .map(|s| {
                format!("SLOT {}: {} | {} | {}", s.index, s.activity, s.activity_class.label(), s.location)
            })
            .collect();
        lines.join("\n")
    }
}

fn score(text: &str) -> String {
    let keywords = keywords_of(&field(text, "PREFERENCES"));
    let items = parse_items(text);
    let fraction = if items.is_empty() {
        0.0
    } else {
        let hits = items
            .iter()
            .filter(|item| {
                item.categories.iter().any(|c| tokenize(c).iter().any(|t| keywords.contains(t)))
            })
            .count();
        hits as f64 / items.len() as f64
    };
    format!("SCORE: {:.6}", 100.0 * fraction)
}

fn appraise(text: &str) -> String {
    let keywords = keywords_of(&field(text, "PREFERENCES"));
    let items = parse_items(text);
    let mut lines = Vec::with_capacity(items.len());
    for item in &items {
        let overlap = overlap_fraction(item, &keywords);
        if overlap >= WATCH_THRESHOLD {
            lines.push(format!("INTENTION: {} WATCH {overlap:.6}", item.id));
        } else {
            lines.push(format!("INTENTION: {} SKIP {:.6}", item.id, 1.0 - overlap));
        }
    }
    lines.join("\n")
}

fn internal(text: &str) -> String {
    let steps = parse_tagged_int(text, "STEPS_TAKEN").unwrap_or(0).max(0) as f64;
    let base_fatigue = parse_tagged_f64(text, "BASE_FATIGUE").unwrap_or(0.0);
    let boredom_before = parse_tagged_f64(text, "BOREDOM_BEFORE").unwrap_or(0.0);
    let watch_count = parse_tagged_int(text, "PAGE_WATCH_COUNT").unwrap_or(0);
    let openness = parse_tagged_int(text, "OPENNESS").unwrap_or(2).clamp(1, 3) as f64;
    let novelty = parse_tagged_f64(text, "NOVELTY_FRACTION").unwrap_or(0.0);

    let fatigue = (base_fatigue + FATIGUE_STEP * steps).clamp(0.0, 1.0);
    let boredom = if watch_count > 0 {
        0.0
    } else {
        (boredom_before + BOREDOM_STEP).clamp(0.0, 1.0)
    };
    let curiosity = (0.2 + 0.2 * (openness - 1.0) / 2.0 + 0.3 * novelty).clamp(0.0, 1.0);
    format!("FATIGUE: {fatigue:.6}\nCURIOSITY: {curiosity:.6}\nBOREDOM: {boredom:.6}")
}

fn act(text: &str) -> String {
    let items = parse_items(text);
    let keywords = keywords_of(&field(text, "PREFERENCES"));
    let visited: BTreeSet<String> = field(text, "VISITED")
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    let boredom = parse_tagged_f64(text, "BOREDOM").unwrap_or(0.0);
    let has_more = field(text, "HAS_MORE_PAGES").eq_ignore_ascii_case("yes");
    let expanded = field(text, "EXPANDED_ITEM");
    let expanded_rated = field(text, "EXPANDED_RATED").eq_ignore_ascii_case("yes");

    // Rate the item just opened, before anything else.
    if expanded != "none" && !expanded.is_empty() && !expanded_rated {
        if let Some(item) = items.iter().find(|i| i.id == expanded) {
            let rating = rating_from_overlap(overlap_fraction(item, &keywords));
            return format!(
                "THOUGHT: I just looked at {}; rating how well it fits my taste.\nACTION: [RATE:{}:{rating}]",
                item.title, item.id
            );
        }
    }

    if boredom >= BOREDOM_EXIT_THRESHOLD {
        return "THOUGHT: Nothing here is holding my attention anymore; I'm done for now.\nACTION: [EXIT]"
            .to_string();
    }

    // Parse WATCH intentions in prompt order; pick the unvisited one with the
    // highest confidence (ties go to the earliest line).
    let mut best: Option<(f64, String)> = None;
    for line in text.lines() {
        let Some(rest) = line.trim().strip_prefix("INTENTION: ") else { continue };
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() != 3 || parts[1] != "WATCH" {
            continue;
        }
        let id = parts[0].to_string();
        let confidence: f64 = parts[2].parse().unwrap_or(0.0);
        if visited.contains(&id) {
            continue;
        }
        if best.as_ref().map(|(c, _)| confidence > *c).unwrap_or(true) {
            best = Some((confidence, id));
        }
    }
    if let Some((_, id)) = best {
        let title =
            items.iter().find(|i| i.id == id).map(|i| i.title.clone()).unwrap_or_else(|| id.clone());
        return format!(
            "THOUGHT: {title} looks promising given my tastes; taking a closer look.\nACTION: [CLICK_ITEM:{id}]"
        );
    }

    if has_more {
        "THOUGHT: Nothing new worth opening on this page; checking the next one.\nACTION: [NEXT_PAGE]"
            .to_string()
    } else {
        "THOUGHT: I've seen everything that could interest me here; stopping.\nACTION: [EXIT]".to_string()
    }
}

fn reflect(text: &str) -> String {
    let action = field(text, "ACTION");
    let keywords = keywords_of(&field(text, "PREFERENCES"));
    let items = parse_items(text);
    match items.first().map(|item| matched_tokens(item, &keywords)).filter(|m| !m.is_empty()) {
        Some(matched) => format!("chose {action} because {} matches my preferences", matched[0]),
        None => format!("chose {action} because nothing matched my preferences"),
    }
}

fn rate(text: &str) -> String {
    let keywords = keywords_of(&field(text, "PREFERENCES"));
    let items = parse_items(text);
    let overlap = items.first().map(|i| overlap_fraction(i, &keywords)).unwrap_or(0.0);
    let rating = rating_from_overlap(overlap);
    let reason = if overlap > 0.0 {
        format!("it overlaps my tastes on {:.0}% of its labels", overlap * 100.0)
    } else {
        "it shares nothing with my usual tastes".to_string()
    };
    format!("RATING: {rating}\nREASON: {reason}")
}

fn summarize(text: &str) -> String {
    let bands = field(text, "BANDS");
    let mut shares = [("Morning", 0.0), ("Afternoon", 0.0), ("Evening", 0.0), ("Night", 0.0)];
    for part in bands.split_whitespace() {
        if let Some((name, value)) = part.split_once('=') {
            if let Ok(v) = value.parse::<f64>() {
                for (label, share) in shares.iter_mut() {
                    if label.eq_ignore_ascii_case(name) {
                        *share = v;
                    }
                }
            }
        }
    }
    let (dominant, share) =
        shares.iter().fold(("Evening", -1.0), |acc, (l, s)| if *s > acc.1 { (l, *s) } else { acc });
    let location = field(text, "TOP_LOCATIONS");
    let location = location.split(',').next().unwrap_or("home").trim().to_string();
    let goal = field(text, "TOP_GOALS");
    let goal = goal.split(',').next().unwrap_or("browse").trim().to_string();
    let budget = field(text, "BUDGET_MEDIAN");
    let budget_clause = if budget == "-" || budget.is_empty() {
        "budget varies".to_string()
    } else {
        format!("median budget around {budget}")
    };
    format!(
        "Typically engages with recommendations in the {dominant} (about {:.0}% of sessions), \
         usually at {location}, most often to {goal}; {budget_clause}.",
        share * 100.0
    )
}

fn interview(text: &str) -> String {
    let satisfaction = parse_tagged_f64(text, "SATISFACTION").unwrap_or(0.5).clamp(0.0, 1.0);
    let rating = (1.0 + 9.0 * satisfaction).round().clamp(1.0, 10.0) as u8;
    let reason = if rating >= 7 {
        "the recommendations suited me well this session"
    } else if rating >= 4 {
        "the session was acceptable but uneven"
    } else {
        "few recommendations matched what I wanted"
    };
    format!("RATING: {rating}\nREASON: {reason}")
}

fn thought_id(text: &str) -> String {
    let keywords = keywords_of(&field(text, "PREFERENCES"));
    let items = parse_items(text);
    let rating = parse_tagged_int(text, "RATING").unwrap_or(3);
    match items.first() {
        Some(item) => {
            let matched = matched_tokens(item, &keywords);
            let anchor = matched.first().cloned().unwrap_or_else(|| "overall style".to_string());
            format!(
                "I rated {} {rating}/5 because its {anchor} fits my usual tastes, and that matches \
                 how I have rated similar items before.",
                item.title
            )
        }
        None => format!("I gave {rating}/5 in line with how such items usually fit my tastes."),
    }
}

fn thought_ta(text: &str) -> String {
    let action = field(text, "ACTION");
    let alternatives = text.lines().filter(|l| l.trim().starts_with("ALTERNATIVE: ")).count();
    format!(
        "I chose {action} over {alternatives} alternative actions because it fits my preferences \
         and follows naturally from what is visible on the page and my recent behavior."
    )
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let first_line = request.user_text.lines().next().unwrap_or("");
        let tag = first_line
            .strip_prefix("#TASK: ")
            .and_then(TaskTag::from_label)
            .ok_or_else(|| BackendError::UnknownTaskTag(first_line.to_string()))?;
        if tag != request.task_tag {
            return Err(BackendError::UnknownTaskTag(format!(
                "prompt tag {} does not match request tag {}",
                tag.label(),
                request.task_tag.label()
            )));
        }
        let text = self.respond(request)?;
        let token_estimate = ((request.system_text.len() + request.user_text.len() + text.len()) / 4) as u64;
        Ok(CompletionResponse { text, token_estimate, backend_name: self.name().to_string() })
    }

    fn name(&self) -> &str {
        "scripted"
    }

    fn deterministic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(tag: TaskTag, body: &str) -> CompletionRequest {
        CompletionRequest::new(tag, "sys", body).with_seed(7)
    }

    #[test]
    fn rate_rule_matches_hand_check() {
        // 2 of 3 category labels match: 1 + round(4·2/3) = 1 + round(2.67) = 4.
        let body = "PREFERENCES: Enjoys Comedy and Drama\n\
                    ITEM: 9 | Some Film | Comedy,Drama,Horror | brand=- | rating=-\n";
        let backend = ScriptedBackend::default();
        let response = backend.complete(&request(TaskTag::Rate, body)).unwrap();
        assert_eq!(parse_tagged_int(&response.text, "RATING").unwrap(), 4);
    }

    #[test]
    fn rate_zero_overlap_is_floor() {
        let body = "PREFERENCES: Enjoys Comedy\n\
                    ITEM: 9 | Some Film | Horror,Thriller | brand=- | rating=-\n";
        let backend = ScriptedBackend::default();
        let response = backend.complete(&request(TaskTag::Rate, body)).unwrap();
        assert_eq!(parse_tagged_int(&response.text, "RATING").unwrap(), 1);
    }

    #[test]
    fn identical_requests_identical_responses() {
        let backend = ScriptedBackend::default();
        for req in crate::prompts::sample_requests() {
            let a = backend.complete(&req).unwrap();
            let b = backend.complete(&req).unwrap();
            assert_eq!(a, b, "task {:?}", req.task_tag);
            assert!(!a.text.is_empty(), "task {:?}", req.task_tag);
        }
    }

    #[test]
    fn appraise_threshold() {
        // overlap 1/3 < 0.34 → SKIP; overlap 2/3 ≥ 0.34 → WATCH.
        let body = "PREFERENCES: Enjoys Comedy and Drama\n\
                    ITEM: 1 | A | Comedy,Horror,Action | brand=- | rating=-\n\
                    ITEM: 2 | B | Comedy,Drama,Action | brand=- | rating=-\n";
        let backend = ScriptedBackend::default();
        let response = backend.complete(&request(TaskTag::Appraise, body)).unwrap();
        let lines: Vec<&str> = response.text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("INTENTION: 1 SKIP"));
        assert!(lines[1].starts_with("INTENTION: 2 WATCH"));
    }

    #[test]
    fn internal_state_formulas() {
        // Openness 3, all-novel page: curiosity = 0.2 + 0.2 + 0.3 = 0.7.
        let body = "OPENNESS: 3\nSTEPS_TAKEN: 0\nBASE_FATIGUE: 0\nBOREDOM_BEFORE: 0\n\
                    PAGE_WATCH_COUNT: 0\nNOVELTY_FRACTION: 1.0\n";
        let backend = ScriptedBackend::default();
        let response = backend.complete(&request(TaskTag::Internal, body)).unwrap();
        assert!((parse_tagged_f64(&response.text, "CURIOSITY").unwrap() - 0.7).abs() < 1e-9);
        assert!((parse_tagged_f64(&response.text, "FATIGUE").unwrap()).abs() < 1e-9);
        assert!((parse_tagged_f64(&response.text, "BOREDOM").unwrap() - 0.15).abs() < 1e-9);
    }

    #[test]
    fn act_rules() {
        let backend = ScriptedBackend::default();
        // Boredom ≥ 0.8 → EXIT.
        let body = "PREFERENCES: Enjoys Comedy\nVISITED: \nEXPANDED_ITEM: none\nEXPANDED_RATED: no\n\
                    HAS_MORE_PAGES: yes\nBOREDOM: 0.9\nINTENTION: 1 WATCH 0.5\n\
                    ITEM: 1 | A | Comedy | brand=- | rating=-\n";
        let response = backend.complete(&request(TaskTag::Act, body)).unwrap();
        assert!(response.text.contains("ACTION: [EXIT]"));

        // One unvisited WATCH → click it.
        let body = "PREFERENCES: Enjoys Comedy\nVISITED: \nEXPANDED_ITEM: none\nEXPANDED_RATED: no\n\
                    HAS_MORE_PAGES: yes\nBOREDOM: 0.0\nINTENTION: 1 WATCH 0.5\n\
                    ITEM: 1 | A | Comedy | brand=- | rating=-\n";
        let response = backend.complete(&request(TaskTag::Act, body)).unwrap();
        assert!(response.text.contains("ACTION: [CLICK_ITEM:1]"), "{}", response.text);

        // All WATCH visited, more pages → NEXT_PAGE.
        let body = "PREFERENCES: Enjoys Comedy\nVISITED: 1\nEXPANDED_ITEM: none\nEXPANDED_RATED: no\n\
                    HAS_MORE_PAGES: yes\nBOREDOM: 0.0\nINTENTION: 1 WATCH 0.5\n\
                    ITEM: 1 | A | Comedy | brand=- | rating=-\n";
        let response = backend.complete(&request(TaskTag::Act, body)).unwrap();
        assert!(response.text.contains("ACTION: [NEXT_PAGE]"));

        // Expanded unrated item → RATE first.
        let body = "PREFERENCES: Enjoys Comedy Drama\nVISITED: 1\nEXPANDED_ITEM: 1\nEXPANDED_RATED: no\n\
                    HAS_MORE_PAGES: yes\nBOREDOM: 0.0\nINTENTION: 1 WATCH 1.0\n\
                    ITEM: 1 | A | Comedy,Drama | brand=- | rating=-\n";
        let response = backend.complete(&request(TaskTag::Act, body)).unwrap();
        assert!(response.text.contains("ACTION: [RATE:1:5]"), "{}", response.text);

        // No WATCH anywhere and no more pages → EXIT.
        let body = "PREFERENCES: Enjoys Comedy\nVISITED: \nEXPANDED_ITEM: none\nEXPANDED_RATED: no\n\
                    HAS_MORE_PAGES: no\nBOREDOM: 0.0\nINTENTION: 1 SKIP 1.0\n\
                    ITEM: 1 | A | Horror | brand=- | rating=-\n";
        let response = backend.complete(&request(TaskTag::Act, body)).unwrap();
        assert!(response.text.contains("ACTION: [EXIT]"));
    }

    #[test]
    fn interview_maps_satisfaction() {
        // round(1 + 9·0.8) = round(8.2) = 8.
        let body = "SATISFACTION: 0.8\nSESSION_LOG:\nx\n";
        let backend = ScriptedBackend::default();
        let response = backend.complete(&request(TaskTag::Interview, body)).unwrap();
        assert_eq!(parse_tagged_int(&response.text, "RATING").unwrap(), 8);
    }

    #[test]
    fn classify_membership() {
        let body = "AGENT: u1\nPREFERENCES: Enjoys Comedy\nMEMORY_ITEM_IDS: 1,3\n\
                    ITEM: 1 | A | Comedy | brand=- | rating=-\n\
                    ITEM: 2 | B | Comedy | brand=- | rating=-\n";
        let backend = ScriptedBackend::default();
        let response = backend.complete(&request(TaskTag::Classify, body)).unwrap();
        let lines: Vec<&str> = response.text.lines().collect();
        assert_eq!(lines[0], "LABEL: 1 Interacted");
        assert_eq!(lines[1], "LABEL: 2 Not Interacted");
    }

    #[test]
    fn reflect_mentions_matched_category() {
        let body = "PREFERENCES: Enjoys Comedy\nACTION: [CLICK_ITEM:1]\n\
                    ITEM: 1 | A | Comedy,Horror | brand=- | rating=-\n";
        let backend = ScriptedBackend::default();
        let response = backend.complete(&request(TaskTag::Reflect, body)).unwrap();
        assert!(response.text.contains("comedy"), "{}", response.text);
    }

    #[test]
    fn score_fraction() {
        // 1 of 4 held-out items intersects "Comedy" → 25.
        let body = "PREFERENCES: Enjoys Comedy\n\
                    ITEM: 1 | A | Comedy | brand=- | rating=-\n\
                    ITEM: 2 | B | Horror | brand=- | rating=-\n\
                    ITEM: 3 | C | Horror | brand=- | rating=-\n\
                    ITEM: 4 | D | Horror | brand=- | rating=-\n";
        let backend = ScriptedBackend::default();
        let response = backend.complete(&request(TaskTag::Score, body)).unwrap();
        let score = parse_tagged_f64(&response.text, "SCORE").unwrap();
        assert!((score - 25.0).abs() < 1e-9);
    }

    #[test]
    fn unknown_tag_rejected() {
        let backend = ScriptedBackend::default();
        let mut req = request(TaskTag::Rate, "x");
        req.user_text = "#TASK: NONSENSE\nx".into();
        assert!(matches!(backend.complete(&req), Err(BackendError::UnknownTaskTag(_))));
    }

    #[test]
    fn brand_counts_as_label() {
        // Brand in preferences lifts overlap; fictitious brand does not.
        let keywords = keywords_of("Enjoys skincare from Neutrogena");
        let original = PromptItem {
            id: "1".into(),
            title: "Cleansing Towelettes".into(),
            categories: vec!["Skincare".into()],
            brand: Some("Neutrogena".into()),
        };
        let swapped = PromptItem { brand: Some("Neutrovia".into()), ..original.clone() };
        assert!(overlap_fraction(&original, &keywords) > overlap_fraction(&swapped, &keywords));
    }
}
