//! Simulation drivers: build agent populations from a dataset, run the sim
//! and sum variants over simulated days, and run barrier-synchronized rounds
//! for the exposure experiments.
//!
//! Agents are independent within a day/round and run in parallel; the ledger
//! is merged between rounds, so results are deterministic for a fixed seed
//! regardless of thread count.

use crate::agent::{run_session, AgentBundle, AgentConfig, Variant};
use crate::backend::Backend;
use crate::domain::{ContextVector, DomainMode, Item, Persona, Trajectory};
use crate::env::{InteractionLedger, Recommender, Session, SessionEvent};
use crate::ingest::Dataset;
use crate::lifesim::{
    self, generate_schedule, sample_externals, DayType, EngagementParams, TemplateLibrary,
};
use crate::memory::MemorySnapshot;
use crate::persona::{infer_persona, PersonaError};
use crate::seeds;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("persona inference failed for {agent}: {source}")]
    Persona { agent: String, source: PersonaError },
    #[error("lifesim failure: {0}")]
    Lifesim(#[from] lifesim::LifesimError),
    #[error("agent failure: {0}")]
    Agent(#[from] crate::agent::AgentError),
}

/// Simulation-wide options.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimOptions {
    pub days: u32,
    pub sessions_per_agent: u32,
    pub summary_days: u32,
    pub page_size: usize,
    pub seed: u64,
    pub mode: DomainMode,
    /// Ablation: uniform engagement times and no context factors in prompts.
    pub no_lifesim: bool,
    /// Expected uniform engagements per day under no_lifesim.
    pub uniform_engagements_per_day: f64,
    /// Keep generated schedules in the output for audit.
    pub export_schedules: bool,
    pub agent: AgentConfig,
    pub engagement: EngagementParams,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            days: 7,
            sessions_per_agent: 3,
            summary_days: 30,
            page_size: 10,
            seed: 0,
            mode: DomainMode::Recommendation,
            no_lifesim: false,
            uniform_engagements_per_day: 3.0,
            export_schedules: false,
            agent: AgentConfig::default(),
            engagement: EngagementParams::default(),
        }
    }
}

/// Everything a simulation run produces.
#[derive(Debug, Clone, Default)]
pub struct SimOutput {
    pub trajectories: Vec<Trajectory>,
    pub ledger: InteractionLedger,
    pub skipped_agents: usize,
    /// Populated when `SimOptions::export_schedules` is set.
    pub schedules: Vec<lifesim::DailySchedule>,
}

impl SimOutput {
    pub fn memory_snapshots(population: &[AgentBundle]) -> Vec<MemorySnapshot> {
        population
            .iter()
            .map(|bundle| MemorySnapshot {
                agent_id: bundle.persona.agent_id.clone(),
                episodic: bundle.episodic.clone(),
                emotional: bundle.emotional.clone(),
            })
            .collect()
    }
}

/// Infer personas for up to `max_agents` users (ordered by id) and seed each
/// agent's episodic memory with its training history.
pub fn build_population(
    dataset: &Dataset,
    max_agents: usize,
    candidates: usize,
    seed: u64,
    demographics: &BTreeMap<String, (u32, String)>,
    backend: &dyn Backend,
) -> Result<Vec<AgentBundle>, RunnerError> {
    let users: Vec<&String> = dataset.users.iter().take(max_agents).collect();
    let mut population = Vec::with_capacity(users.len());
    for user in users {
        let history = dataset.user_history(user);
        let known = demographics.get(user.as_str()).map(|(age, occ)| (*age, occ.as_str()));
        let persona =
            infer_persona(user, &history, &dataset.catalog, candidates, seed, known, backend)
                .map_err(|source| RunnerError::Persona { agent: user.clone(), source })?;
        let mut bundle = AgentBundle::new(persona);
        let memory_items: Vec<(&Item, Option<u8>)> = history
            .iter()
            .filter_map(|r| dataset.catalog.get(&r.item_id).map(|i| (i, r.rating)))
            .collect();
        bundle.seed_memory(&memory_items);
        population.push(bundle);
    }
    Ok(population)
}

/// Build a population from pre-assigned personas (reloaded from disk).
pub fn population_from_personas(dataset: &Dataset, personas: Vec<Persona>) -> Vec<AgentBundle> {
    personas
        .into_iter()
        .map(|persona| {
            let history = dataset.user_history(&persona.agent_id);
            let mut bundle = AgentBundle::new(persona);
            let memory_items: Vec<(&Item, Option<u8>)> = history
                .iter()
                .filter_map(|r| dataset.catalog.get(&r.item_id).map(|i| (i, r.rating)))
                .collect();
            bundle.seed_memory(&memory_items);
            bundle
        })
        .collect()
}

fn apply_events(ledger: &mut InteractionLedger, events: &[SessionEvent]) {
    for event in events {
        match event {
            SessionEvent::Exposure { item_id } => ledger.record_exposure(item_id),
            SessionEvent::Liked { item_id } => ledger.record_like(item_id),
            SessionEvent::Rated { .. } | SessionEvent::Clicked { .. } => {}
        }
    }
}

struct AgentDayOutput {
    trajectories: Vec<Trajectory>,
    events: Vec<SessionEvent>,
    schedules: Vec<lifesim::DailySchedule>,
}

#[allow(clippy::too_many_arguments)]
fn run_agent_day(
    bundle: &mut AgentBundle,
    catalog: &BTreeMap<String, Item>,
    recommender: &Recommender,
    likes_snapshot: &BTreeMap<String, u64>,
    templates: &TemplateLibrary,
    options: &SimOptions,
    day: u32,
    backend: &dyn Backend,
) -> Result<AgentDayOutput, RunnerError> {
    // A night's sleep resets the accumulators.
    bundle.emotional.state.fatigue = 0.0;
    bundle.emotional.state.boredom = 0.0;

    let day_type = DayType::from_day_index(day);
    let externals = sample_externals(day, options.seed);
    let schedule =
        generate_schedule(&bundle.persona, day, day_type, &externals, options.seed, backend)?;
    let slots = if options.no_lifesim {
        lifesim::uniform_engagement_slots(
            &bundle.persona.agent_id,
            day,
            options.uniform_engagements_per_day,
            options.seed,
        )
    } else {
        lifesim::engagement_slots(
            &schedule,
            &bundle.persona,
            &bundle.emotional,
            &options.engagement,
            options.seed,
        )
    };

    let mut output = AgentDayOutput {
        trajectories: Vec::new(),
        events: Vec::new(),
        schedules: if options.export_schedules { vec![schedule.clone()] } else { Vec::new() },
    };
    for slot_index in slots {
        let context =
            lifesim::build_context(&schedule, slot_index, &bundle.persona, options.seed, templates);
        let exclusions: BTreeSet<String> = bundle.episodic.item_ids();
        let mut session = Session::start(
            catalog,
            recommender,
            likes_snapshot,
            day + 1,
            &bundle.persona.agent_id,
            options.mode,
            context,
            exclusions,
            bundle.ratings.clone(),
        );
        let session_id = format!("{}-d{day}s{slot_index}", bundle.persona.agent_id);
        let trajectory =
            run_session(bundle, &mut session, &options.agent, &session_id, backend)?;
        output.events.extend(session.events().iter().cloned());
        output.trajectories.push(trajectory);
    }
    Ok(output)
}

/// Run the sim variant: day-by-day schedules decide when sessions happen.
/// Days are the ledger rounds (barrier-synchronized).
pub fn simulate_sim(
    population: &mut [AgentBundle],
    catalog: &BTreeMap<String, Item>,
    recommender: &Recommender,
    templates: &TemplateLibrary,
    options: &SimOptions,
    backend: &dyn Backend,
) -> Result<SimOutput, RunnerError> {
    let mut output = SimOutput::default();
    for day in 0..options.days {
        let snapshot = output.ledger.likes.clone();
        let day_results: Vec<Result<AgentDayOutput, RunnerError>> = population
            .par_iter_mut()
            .map(|bundle| {
                run_agent_day(
                    bundle,
                    catalog,
                    recommender,
                    &snapshot,
                    templates,
                    options,
                    day,
                    backend,
                )
            })
            .collect();
        for result in day_results {
            let agent_output = result?;
            apply_events(&mut output.ledger, &agent_output.events);
            output.trajectories.extend(agent_output.trajectories);
            output.schedules.extend(agent_output.schedules);
        }
        output.ledger.commit_round(day + 1);
    }
    Ok(output)
}

/// Phase 1 of the sum variant: run the life simulation offline for
/// `summary_days`, summarize, and append the summary to each persona.
pub fn attach_context_summaries(
    population: &mut [AgentBundle],
    templates: &TemplateLibrary,
    options: &SimOptions,
    backend: &dyn Backend,
) -> Result<Vec<lifesim::ContextSummary>, RunnerError> {
    let summaries: Vec<Result<lifesim::ContextSummary, RunnerError>> = population
        .par_iter()
        .map(|bundle| {
            let mut contexts: Vec<ContextVector> = Vec::new();
            for day in 0..options.summary_days {
                let day_type = DayType::from_day_index(day);
                let externals = sample_externals(day, options.seed);
                let schedule = generate_schedule(
                    &bundle.persona,
                    day,
                    day_type,
                    &externals,
                    options.seed,
                    backend,
                )?;
                let slots = lifesim::engagement_slots(
                    &schedule,
                    &bundle.persona,
                    &bundle.emotional,
                    &options.engagement,
                    options.seed,
                );
                for slot_index in slots {
                    contexts.push(lifesim::build_context(
                        &schedule,
                        slot_index,
                        &bundle.persona,
                        options.seed,
                        templates,
                    ));
                }
            }
            let summary = lifesim::summarize_contexts(
                &bundle.persona.agent_id,
                &contexts,
                options.summary_days,
                backend,
            )?;
            Ok(summary)
        })
        .collect();
    let mut out = Vec::with_capacity(population.len());
    for (bundle, summary) in population.iter_mut().zip(summaries) {
        let summary = summary?;
        bundle.persona.context_summary = Some(summary.summary_text.clone());
        out.push(summary);
    }
    Ok(out)
}

/// Run the sum variant: sessions are conditioned on the 30-day summary, with
/// a time-only context sampled from the summarized band frequencies.
pub fn simulate_sum(
    population: &mut [AgentBundle],
    catalog: &BTreeMap<String, Item>,
    recommender: &Recommender,
    templates: &TemplateLibrary,
    options: &SimOptions,
    backend: &dyn Backend,
) -> Result<SimOutput, RunnerError> {
    let summaries = attach_context_summaries(population, templates, options, backend)?;
    let aggregates: Vec<lifesim::SummaryAggregates> =
        summaries.into_iter().map(|s| s.aggregates).collect();

    // The sum variant sees only temporal context per session.
    let mut sum_options = options.clone();
    sum_options.agent.context_factor_mask = options
        .agent
        .context_factor_mask
        .intersect(&crate::domain::FactorMask::time_only());

    let mut output = SimOutput::default();
    for session_index in 0..options.sessions_per_agent {
        let snapshot = output.ledger.likes.clone();
        let results: Vec<Result<AgentDayOutput, RunnerError>> = population
            .par_iter_mut()
            .zip(aggregates.par_iter())
            .map(|(bundle, aggregate)| {
                bundle.emotional.state.fatigue = 0.0;
                bundle.emotional.state.boredom = 0.0;
                let context = lifesim::sum_variant_context(
                    aggregate,
                    &bundle.persona.agent_id,
                    session_index as u64,
                    options.seed,
                );
                let exclusions: BTreeSet<String> = bundle.episodic.item_ids();
                let mut session = Session::start(
                    catalog,
                    recommender,
                    &snapshot,
                    session_index + 1,
                    &bundle.persona.agent_id,
                    options.mode,
                    context,
                    exclusions,
                    bundle.ratings.clone(),
                );
                let session_id = format!("{}-s{session_index}", bundle.persona.agent_id);
                let trajectory =
                    run_session(bundle, &mut session, &sum_options.agent, &session_id, backend)?;
                Ok(AgentDayOutput {
                    events: session.events().to_vec(),
                    trajectories: vec![trajectory],
                    schedules: Vec::new(),
                })
            })
            .collect();
        for result in results {
            let agent_output = result?;
            apply_events(&mut output.ledger, &agent_output.events);
            output.trajectories.extend(agent_output.trajectories);
        }
        output.ledger.commit_round(session_index + 1);
    }
    Ok(output)
}

pub fn simulate(
    population: &mut [AgentBundle],
    catalog: &BTreeMap<String, Item>,
    recommender: &Recommender,
    templates: &TemplateLibrary,
    options: &SimOptions,
    backend: &dyn Backend,
) -> Result<SimOutput, RunnerError> {
    match options.agent.variant {
        Variant::Sim => simulate_sim(population, catalog, recommender, templates, options, backend),
        Variant::Sum => simulate_sum(population, catalog, recommender, templates, options, backend),
    }
}

/// Round-based driver for exposure experiments: every agent runs exactly one
/// session per round; the ledger snapshot advances at round barriers.
pub fn run_rounds(
    population: &mut [AgentBundle],
    catalog: &BTreeMap<String, Item>,
    recommender: &Recommender,
    rounds: u32,
    options: &SimOptions,
    backend: &dyn Backend,
) -> Result<SimOutput, RunnerError> {
    let mut output = SimOutput::default();
    for round in 1..=rounds {
        let snapshot = output.ledger.likes.clone();
        let results: Vec<Result<AgentDayOutput, RunnerError>> = population
            .par_iter_mut()
            .map(|bundle| {
                bundle.emotional.state.fatigue = 0.0;
                bundle.emotional.state.boredom = 0.0;
                let mut rng = seeds::agent_rng(
                    options.seed,
                    "round-context",
                    &bundle.persona.agent_id,
                    &[round as u64],
                );
                use rand::Rng;
                let minute: u16 = rng.gen_range(0..1440);
                let context = ContextVector {
                    temporal: crate::domain::TemporalContext {
                        minute_of_day: minute,
                        day_of_week: ((round - 1) % 7) as u8,
                    },
                    location: "home".into(),
                    situational: crate::domain::SituationalContext {
                        latest_activity: "daily routine".into(),
                        mood: crate::domain::Mood::Neutral,
                        need_level: 0.5,
                        energy_level: 0.5,
                    },
                    goal: "browse the recommendations".into(),
                    constraint: crate::domain::ConstraintContext {
                        budget: Some(30.0),
                        time_available_minutes: 60,
                    },
                };
                let exclusions: BTreeSet<String> = bundle.episodic.item_ids();
                let mut session = Session::start(
                    catalog,
                    recommender,
                    &snapshot,
                    round,
                    &bundle.persona.agent_id,
                    options.mode,
                    context,
                    exclusions,
                    bundle.ratings.clone(),
                );
                let session_id = format!("{}-r{round}", bundle.persona.agent_id);
                let trajectory =
                    run_session(bundle, &mut session, &options.agent, &session_id, backend)?;
                Ok(AgentDayOutput {
                    events: session.events().to_vec(),
                    trajectories: vec![trajectory],
                    schedules: Vec::new(),
                })
            })
            .collect();
        for result in results {
            let agent_output = result?;
            apply_events(&mut output.ledger, &agent_output.events);
            output.trajectories.extend(agent_output.trajectories);
        }
        output.ledger.commit_round(round);
    }
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;
    use crate::domain::InteractionKind;
    use crate::env::Strategy;
    use crate::ingest::Dataset;

    fn synthetic_dataset(users: usize, items: usize) -> Dataset {
        let genres = ["Comedy", "Drama", "Action", "Horror", "Romance", "Sci-Fi"];
        let catalog: BTreeMap<String, Item> = (0..items)
            .map(|i| {
                let id = format!("i{i:03}");
                (
                    id.clone(),
                    Item {
                        item_id: id.clone(),
                        title: format!("Film {i:03}"),
                        description: format!("A {} film", genres[i % genres.len()]),
                        categories: vec![
                            genres[i % genres.len()].into(),
                            genres[(i + 1) % genres.len()].into(),
                        ],
                        brand: None,
                        price: None,
                        stat_count: 0,
                        stat_mean_rating: None,
                    },
                )
            })
            .collect();
        let mut interactions = Vec::new();
        for u in 0..users {
            for k in 0..8 {
                let item = (u * 3 + k * 5) % items;
                interactions.push(crate::domain::InteractionRecord {
                    user_id: format!("u{u:02}"),
                    item_id: format!("i{item:03}"),
                    rating: Some(1 + ((u + k) % 5) as u8),
                    timestamp: (u * 100 + k) as i64,
                    kind: InteractionKind::Rate,
                });
            }
        }
        let (dataset, _) = Dataset::assemble(interactions, Some(catalog));
        dataset
    }

    #[test]
    fn population_builds_and_seeds_memory() {
        let dataset = synthetic_dataset(4, 30);
        let backend = ScriptedBackend::default();
        let population =
            build_population(&dataset, 4, 2, 7, &BTreeMap::new(), &backend).unwrap();
        assert_eq!(population.len(), 4);
        for bundle in &population {
            assert!(!bundle.episodic.records.is_empty());
            assert!(!bundle.ratings.is_empty());
            assert!(!bundle.persona.preferences.is_empty());
        }
    }

    #[test]
    fn sim_variant_runs_and_is_deterministic() {
        let dataset = synthetic_dataset(3, 40);
        let backend = ScriptedBackend::default();
        let options = SimOptions {
            days: 2,
            seed: 5,
            agent: AgentConfig { max_steps_per_session: 6, ..AgentConfig::default() },
            ..SimOptions::default()
        };
        let recommender = Recommender::new(Strategy::Popularity, options.page_size, options.seed);
        let templates = TemplateLibrary::default();

        let mut population_a =
            build_population(&dataset, 3, 2, 5, &BTreeMap::new(), &backend).unwrap();
        let output_a = simulate_sim(
            &mut population_a,
            &dataset.catalog,
            &recommender,
            &templates,
            &options,
            &backend,
        )
        .unwrap();

        let mut population_b =
            build_population(&dataset, 3, 2, 5, &BTreeMap::new(), &backend).unwrap();
        let output_b = simulate_sim(
            &mut population_b,
            &dataset.catalog,
            &recommender,
            &templates,
            &options,
            &backend,
        )
        .unwrap();

        assert_eq!(output_a.trajectories, output_b.trajectories);
        assert_eq!(output_a.ledger, output_b.ledger);
        for trajectory in &output_a.trajectories {
            assert!(crate::domain::Validate::validate(trajectory).is_empty());
        }
    }

    #[test]
    fn sum_variant_attaches_summaries() {
        let dataset = synthetic_dataset(2, 40);
        let backend = ScriptedBackend::default();
        let options = SimOptions {
            sessions_per_agent: 2,
            summary_days: 5,
            seed: 9,
            agent: AgentConfig {
                variant: Variant::Sum,
                max_steps_per_session: 5,
                ..AgentConfig::default()
            },
            ..SimOptions::default()
        };
        let recommender = Recommender::new(Strategy::Popularity, options.page_size, options.seed);
        let templates = TemplateLibrary::default();
        let mut population =
            build_population(&dataset, 2, 2, 9, &BTreeMap::new(), &backend).unwrap();
        let output = simulate(
            &mut population,
            &dataset.catalog,
            &recommender,
            &templates,
            &options,
            &backend,
        )
        .unwrap();
        for bundle in &population {
            let summary = bundle.persona.context_summary.as_ref().unwrap();
            assert!(!summary.is_empty());
        }
        assert_eq!(output.trajectories.len(), 2 * 2);
    }

    #[test]
    fn rounds_driver_commits_per_round() {
        let dataset = synthetic_dataset(3, 40);
        let backend = ScriptedBackend::default();
        let options = SimOptions {
            seed: 3,
            agent: AgentConfig { max_steps_per_session: 5, ..AgentConfig::default() },
            ..SimOptions::default()
        };
        let recommender = Recommender::new(Strategy::Popularity, options.page_size, options.seed);
        let mut population =
            build_population(&dataset, 3, 2, 3, &BTreeMap::new(), &backend).unwrap();
        let output = run_rounds(
            &mut population,
            &dataset.catalog,
            &recommender,
            4,
            &options,
            &backend,
        )
        .unwrap();
        assert_eq!(output.ledger.snapshots.len(), 4);
        assert_eq!(output.trajectories.len(), 3 * 4);
    }
}
