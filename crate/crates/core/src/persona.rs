//! Persona inference: generate K candidate personas from early history, score
//! each against a held-out recent slice, keep the argmax.

use crate::backend::{
    parse_tagged_f64, parse_tagged_field, parse_tagged_int, Backend, BackendError,
    CompletionRequest, TaskTag,
};
use crate::domain::{BigFive, InteractionRecord, Item, Persona, Validate};
use crate::prompts;
use crate::seeds;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PersonaError {
    #[error("empty interaction history")]
    EmptyHistory,
    #[error("persona output unparseable after retry: {0}")]
    PersonaParseFailure(String),
    #[error("consistency scoring failed: {0}")]
    ScoreFailure(String),
    #[error("no candidates to select from")]
    NoCandidates,
    #[error("candidate {0} is unscored")]
    NotScored(usize),
    #[error("backend failure: {0}")]
    Backend(#[from] BackendError),
}

/// A generated persona and (once scored) its consistency in [0,1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaCandidate {
    pub persona: Persona,
    pub consistency_score: Option<f64>,
}

/// Fraction of a user's train history used for candidate generation; the
/// most recent remainder scores consistency.
pub const GENERATION_FRACTION: f64 = 0.7;
/// Most recent interactions included in the generation prompt.
pub const PROMPT_HISTORY_CAP: usize = 30;

fn parse_persona_response(
    agent_id: &str,
    text: &str,
) -> Result<Persona, String> {
    let age = parse_tagged_int(text, "AGE").map_err(|e| e.to_string())? as u32;
    let occupation = parse_tagged_field(text, "OCCUPATION").map_err(|e| e.to_string())?;
    let trait_value = |name: &str| -> Result<u8, String> {
        let v = parse_tagged_int(text, name).map_err(|e| e.to_string())?;
        Ok(v.clamp(1, 3) as u8)
    };
    let traits = BigFive {
        openness: trait_value("OPENNESS")?,
        conscientiousness: trait_value("CONSCIENTIOUSNESS")?,
        extraversion: trait_value("EXTRAVERSION")?,
        agreeableness: trait_value("AGREEABLENESS")?,
        neuroticism: trait_value("NEUROTICISM")?,
    };
    let habits: Vec<String> = parse_tagged_field(text, "HABITS")
        .map_err(|e| e.to_string())?
        .split(';')
        .map(|h| h.trim().replace('=', ": "))
        .filter(|h| !h.is_empty())
        .collect();
    let recent_goals: Vec<String> = parse_tagged_field(text, "GOALS")
        .unwrap_or_default()
        .split(';')
        .map(|g| g.trim().to_string())
        .filter(|g| !g.is_empty())
        .collect();
    let preferences = parse_tagged_field(text, "PREFERENCES").map_err(|e| e.to_string())?;
    let persona = Persona {
        agent_id: agent_id.to_string(),
        age: age.clamp(13, 100),
        occupation,
        traits,
        habits,
        recent_goals,
        preferences,
        context_summary: None,
    };
    let violations = persona.validate();
    if violations.is_empty() {
        Ok(persona)
    } else {
        Err(violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))
    }
}

/// Generate exactly K candidate personas from a history sample. The prompt
/// carries the sample's titles, categories, and ratings (most recent first,
/// capped at 30); unparseable output is retried once per candidate.
pub fn generate_candidates(
    agent_id: &str,
    history_sample: &[&InteractionRecord],
    catalog: &BTreeMap<String, Item>,
    k: usize,
    seed: u64,
    known_demographics: Option<(u32, &str)>,
    backend: &dyn Backend,
) -> Result<Vec<PersonaCandidate>, PersonaError> {
    if history_sample.is_empty() {
        return Err(PersonaError::EmptyHistory);
    }
    let mut prompt_items: Vec<(Item, Option<u8>)> = history_sample
        .iter()
        .rev()
        .take(PROMPT_HISTORY_CAP)
        .filter_map(|r| catalog.get(&r.item_id).map(|i| (i.clone(), r.rating)))
        .collect();
    prompt_items.reverse();

    let mut candidates = Vec::with_capacity(k);
    for index in 0..k {
        let (system, body) =
            prompts::persona_generate(agent_id, index, &prompt_items, known_demographics);
        let request = CompletionRequest::new(TaskTag::Persona, system, body)
            .with_seed(seeds::derive(seed, "persona-candidate", &[seeds::hash_str(agent_id), index as u64]));
        let mut last_error = String::new();
        let mut parsed = None;
        for _ in 0..2 {
            let response = backend.complete(&request)?;
            match parse_persona_response(agent_id, &response.text) {
                Ok(persona) => {
                    parsed = Some(persona);
                    break;
                }
                Err(error) => last_error = error,
            }
        }
        match parsed {
            Some(persona) => candidates.push(PersonaCandidate { persona, consistency_score: None }),
            None => return Err(PersonaError::PersonaParseFailure(last_error)),
        }
    }
    Ok(candidates)
}

/// Score a candidate against held-out interactions: SCORE field (0..100)
/// parsed and divided by 100.
pub fn score_consistency(
    candidate: &Persona,
    held_out: &[&InteractionRecord],
    catalog: &BTreeMap<String, Item>,
    backend: &dyn Backend,
) -> Result<f64, PersonaError> {
    let items: Vec<Item> =
        held_out.iter().filter_map(|r| catalog.get(&r.item_id).cloned()).collect();
    let (system, body) = prompts::persona_score(&candidate.preferences, &items);
    let request = CompletionRequest::new(TaskTag::Score, system, body)
        .with_seed(seeds::derive(0, "persona-score", &[seeds::hash_str(&candidate.agent_id)]));
    let response = backend.complete(&request)?;
    let score = parse_tagged_f64(&response.text, "SCORE")
        .map_err(|e| PersonaError::ScoreFailure(e.to_string()))?;
    Ok((score / 100.0).clamp(0.0, 1.0))
}

/// Argmax by score; ties go to the lowest index.
pub fn select_persona(candidates: &[PersonaCandidate]) -> Result<Persona, PersonaError> {
    if candidates.is_empty() {
        return Err(PersonaError::NoCandidates);
    }
    let mut best_index = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for (index, candidate) in candidates.iter().enumerate() {
        let score = candidate.consistency_score.ok_or(PersonaError::NotScored(index))?;
        if score > best_score {
            best_score = score;
            best_index = index;
        }
    }
    Ok(candidates[best_index].persona.clone())
}

/// Full pipeline for one user: split train history 70/30 by recency, generate
/// K candidates from the earlier part, score on the recent part, select.
pub fn infer_persona(
    agent_id: &str,
    train_history: &[&InteractionRecord],
    catalog: &BTreeMap<String, Item>,
    k: usize,
    seed: u64,
    known_demographics: Option<(u32, &str)>,
    backend: &dyn Backend,
) -> Result<Persona, PersonaError> {
    if train_history.is_empty() {
        return Err(PersonaError::EmptyHistory);
    }
    let mut ordered: Vec<&InteractionRecord> = train_history.to_vec();
    ordered.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.item_id.cmp(&b.item_id)));
    let cut = ((ordered.len() as f64) * GENERATION_FRACTION).ceil() as usize;
    let cut = cut.clamp(1, ordered.len());
    let (generation, held_out) = ordered.split_at(cut);
    let mut candidates = generate_candidates(
        agent_id,
        generation,
        catalog,
        k,
        seed,
        known_demographics,
        backend,
    )?;
    let scoring_slice: &[&InteractionRecord] =
        if held_out.is_empty() { generation } else { held_out };
    for candidate in candidates.iter_mut() {
        candidate.consistency_score =
            Some(score_consistency(&candidate.persona, scoring_slice, catalog, backend)?);
    }
    select_persona(&candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;
    use crate::domain::InteractionKind;
    use proptest::prelude::*;

    fn catalog_with(genres: &[(&str, &[&str])]) -> BTreeMap<String, Item> {
        genres
            .iter()
            .map(|(id, categories)| {
                (
                    id.to_string(),
                    Item {
                        item_id: id.to_string(),
                        title: format!("Title {id}"),
                        description: String::new(),
                        categories: categories.iter().map(|c| c.to_string()).collect(),
                        brand: None,
                        price: None,
                        stat_count: 0,
                        stat_mean_rating: None,
                    },
                )
            })
            .collect()
    }

    fn record(item: &str, timestamp: i64) -> InteractionRecord {
        InteractionRecord {
            user_id: "u1".into(),
            item_id: item.into(),
            rating: Some(4),
            timestamp,
            kind: InteractionKind::Rate,
        }
    }

    #[test]
    fn k_candidates_generated() {
        let catalog = catalog_with(&[("a", &["Comedy"]), ("b", &["Drama"]), ("c", &["Action"])]);
        let history = [record("a", 0), record("b", 1), record("c", 2)];
        let refs: Vec<&InteractionRecord> = history.iter().collect();
        let backend = ScriptedBackend::default();
        let candidates =
            generate_candidates("u1", &refs, &catalog, 5, 1, None, &backend).unwrap();
        assert_eq!(candidates.len(), 5);
        for candidate in &candidates {
            assert!(candidate.persona.is_valid());
            assert!(candidate.consistency_score.is_none());
        }
    }

    #[test]
    fn single_candidate_lists_top3_categories() {
        // Frequency oracle: Comedy ×3, Drama ×2, Action ×1, Horror ×1 →
        // top-3 = Comedy, Drama, Action (tie broken alphabetically).
        let catalog = catalog_with(&[
            ("a", &["Comedy"]),
            ("b", &["Comedy", "Drama"]),
            ("c", &["Comedy", "Drama"]),
            ("d", &["Action"]),
            ("e", &["Horror"]),
        ]);
        let history: Vec<InteractionRecord> =
            ["a", "b", "c", "d", "e"].iter().enumerate().map(|(t, id)| record(id, t as i64)).collect();
        let refs: Vec<&InteractionRecord> = history.iter().collect();
        let backend = ScriptedBackend::default();
        let candidates = generate_candidates("u1", &refs, &catalog, 1, 1, None, &backend).unwrap();
        let preferences = &candidates[0].persona.preferences;
        for label in ["Comedy", "Drama", "Action"] {
            assert!(preferences.contains(label), "{preferences}");
        }
        assert!(!preferences.contains("Horror"), "{preferences}");
    }

    #[test]
    fn empty_history_rejected() {
        let backend = ScriptedBackend::default();
        let catalog = BTreeMap::new();
        assert!(matches!(
            generate_candidates("u1", &[], &catalog, 1, 1, None, &backend),
            Err(PersonaError::EmptyHistory)
        ));
    }

    #[test]
    fn scripted_score_fraction() {
        // 1 of 4 held-out items intersects the single preferred category.
        let catalog = catalog_with(&[
            ("a", &["Comedy"]),
            ("b", &["Horror"]),
            ("c", &["Horror"]),
            ("d", &["Horror"]),
        ]);
        let history: Vec<InteractionRecord> =
            ["a", "b", "c", "d"].iter().enumerate().map(|(t, id)| record(id, t as i64)).collect();
        let refs: Vec<&InteractionRecord> = history.iter().collect();
        let candidate = Persona {
            agent_id: "u1".into(),
            age: 30,
            occupation: "x".into(),
            traits: BigFive {
                openness: 2,
                conscientiousness: 2,
                extraversion: 2,
                agreeableness: 2,
                neuroticism: 2,
            },
            habits: vec!["engagement: medium".into()],
            recent_goals: vec![],
            preferences: "Enjoys Comedy".into(),
            context_summary: None,
        };
        let backend = ScriptedBackend::default();
        let score = score_consistency(&candidate, &refs, &catalog, &backend).unwrap();
        assert!((score - 0.25).abs() < 1e-9);

        // All-Comedy held-out → 1.0.
        let all_comedy = catalog_with(&[("a", &["Comedy"]), ("b", &["Comedy"])]);
        let history: Vec<InteractionRecord> =
            ["a", "b"].iter().enumerate().map(|(t, id)| record(id, t as i64)).collect();
        let refs: Vec<&InteractionRecord> = history.iter().collect();
        let score = score_consistency(&candidate, &refs, &all_comedy, &backend).unwrap();
        assert!((score - 1.0).abs() < 1e-9);
    }

    fn candidate_with_score(score: f64) -> PersonaCandidate {
        PersonaCandidate {
            persona: Persona {
                agent_id: "u1".into(),
                age: 30,
                occupation: "x".into(),
                traits: BigFive {
                    openness: 2,
                    conscientiousness: 2,
                    extraversion: 2,
                    agreeableness: 2,
                    neuroticism: 2,
                },
                habits: vec![format!("marker: {score}")],
                recent_goals: vec![],
                preferences: format!("score {score}"),
                context_summary: None,
            },
            consistency_score: Some(score),
        }
    }

    #[test]
    fn select_argmax_and_ties() {
        let candidates = vec![
            candidate_with_score(0.2),
            candidate_with_score(0.9),
            candidate_with_score(0.5),
        ];
        assert_eq!(select_persona(&candidates).unwrap().preferences, "score 0.9");

        let tied = vec![candidate_with_score(0.7), candidate_with_score(0.7)];
        assert_eq!(select_persona(&tied).unwrap(), tied[0].persona);

        let single = vec![candidate_with_score(0.1)];
        assert_eq!(select_persona(&single).unwrap(), single[0].persona);

        assert!(matches!(select_persona(&[]), Err(PersonaError::NoCandidates)));
    }

    #[test]
    fn pipeline_deterministic() {
        let catalog = catalog_with(&[
            ("a", &["Comedy"]),
            ("b", &["Comedy", "Drama"]),
            ("c", &["Action"]),
            ("d", &["Drama"]),
            ("e", &["Comedy"]),
        ]);
        let history: Vec<InteractionRecord> =
            ["a", "b", "c", "d", "e"].iter().enumerate().map(|(t, id)| record(id, t as i64)).collect();
        let refs: Vec<&InteractionRecord> = history.iter().collect();
        let backend = ScriptedBackend::default();
        let a = infer_persona("u1", &refs, &catalog, 5, 42, None, &backend).unwrap();
        let b = infer_persona("u1", &refs, &catalog, 5, 42, None, &backend).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn known_demographics_pass_through() {
        let catalog = catalog_with(&[("a", &["Comedy"])]);
        let history = [record("a", 0)];
        let refs: Vec<&InteractionRecord> = history.iter().collect();
        let backend = ScriptedBackend::default();
        let persona =
            infer_persona("u1", &refs, &catalog, 2, 1, Some((45, "engineer")), &backend).unwrap();
        assert_eq!(persona.age, 45);
        assert_eq!(persona.occupation, "engineer");
    }

    proptest! {
        #[test]
        fn select_output_dominates(scores in proptest::collection::vec(0.0f64..1.0, 1..10)) {
            let candidates: Vec<PersonaCandidate> =
                scores.iter().map(|s| candidate_with_score(*s)).collect();
            let selected = select_persona(&candidates).unwrap();
            let selected_score = candidates
                .iter()
                .find(|c| c.persona == selected)
                .unwrap()
                .consistency_score
                .unwrap();
            for candidate in &candidates {
                prop_assert!(selected_score >= candidate.consistency_score.unwrap());
            }
        }

        #[test]
        fn argmax_scale_invariant(scores in proptest::collection::vec(0.001f64..1.0, 1..10),
                                  scale in 0.01f64..0.9) {
            let candidates: Vec<PersonaCandidate> =
                scores.iter().map(|s| candidate_with_score(*s)).collect();
            let scaled: Vec<PersonaCandidate> = scores
                .iter()
                .map(|s| candidate_with_score(*s * scale))
                .collect();
            let a = select_persona(&candidates).unwrap();
            let b = select_persona(&scaled).unwrap();
            // Same index selected: compare by position marker in habits.
            let index_of = |list: &[PersonaCandidate], p: &Persona| {
                list.iter().position(|c| &c.persona == p).unwrap()
            };
            prop_assert_eq!(index_of(&candidates, &a), index_of(&scaled, &b));
        }
    }
}
