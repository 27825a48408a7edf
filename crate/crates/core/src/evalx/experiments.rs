//! Experiment drivers: preference alignment, offline A/B correlation, the
//! exposure-boost (and brand-swap) experiment, context ablations, and judge
//! prompt emission for external LLM evaluation.

use crate::agent::{classify_interacted, AgentBundle, Classification};
use crate::backend::Backend;
use crate::domain::{context_text, FactorMask, Item, Persona, Trajectory};
use crate::env::{Recommender, Strategy};
use crate::evalx::{
    classification_metrics, spearman, spearman_bootstrap_ci, temporal_ctr, Averaging,
    MetricsError, MetricsReport,
};
use crate::lifesim::TemplateLibrary;
use crate::runner::{run_rounds, simulate, RunnerError, SimOptions, SimOutput};
use crate::seeds;
use rand::seq::SliceRandom;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error("agent failure: {0}")]
    Agent(#[from] crate::agent::AgentError),
    #[error("unknown item: {0}")]
    UnknownItem(String),
    #[error("io failure on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// The reference real-world temporal pattern over (Morning, Afternoon,
/// Evening, Night), used as the correlation target.
pub const REAL_TEMPORAL_PATTERN: [f64; 4] = [0.11, 0.21, 0.35, 0.28];

// --- preference alignment ------------------------------------------------------

/// Assign `items_per_agent` items per agent at ratio 1:m interacted to
/// non-interacted, classify, and aggregate binary metrics with "Interacted"
/// as the positive class.
pub fn preference_alignment_experiment(
    population: &[AgentBundle],
    catalog: &BTreeMap<String, Item>,
    m: usize,
    items_per_agent: usize,
    item_type: &str,
    seed: u64,
    backend: &dyn Backend,
) -> Result<MetricsReport, ExperimentError> {
    let interacted_count = items_per_agent / (1 + m);
    let distractor_count = items_per_agent - interacted_count;
    let mut truths: Vec<String> = Vec::new();
    let mut predictions: Vec<String> = Vec::new();
    let mut skipped = 0usize;

    for bundle in population {
        let owned: BTreeSet<String> = bundle.episodic.item_ids();
        let mut interacted: Vec<&String> =
            owned.iter().filter(|id| catalog.contains_key(*id)).collect();
        let mut distractors: Vec<&String> =
            catalog.keys().filter(|id| !owned.contains(*id)).collect();
        if interacted.len() < interacted_count || distractors.len() < distractor_count {
            skipped += 1;
            continue;
        }
        let mut rng =
            seeds::agent_rng(seed, "alignment-sample", &bundle.persona.agent_id, &[m as u64]);
        interacted.shuffle(&mut rng);
        distractors.shuffle(&mut rng);
        let mut assigned: Vec<(String, bool)> = interacted[..interacted_count]
            .iter()
            .map(|id| ((*id).clone(), true))
            .chain(distractors[..distractor_count].iter().map(|id| ((*id).clone(), false)))
            .collect();
        assigned.shuffle(&mut rng);

        let items: Vec<Item> = assigned.iter().map(|(id, _)| catalog[id].clone()).collect();
        let labels =
            classify_interacted(&items, &bundle.persona, &bundle.episodic, item_type, backend)?;
        for ((_, truth), label) in assigned.iter().zip(labels) {
            truths.push(if *truth { "Interacted" } else { "Not Interacted" }.to_string());
            predictions.push(
                match label {
                    Classification::Interacted => "Interacted",
                    Classification::NotInteracted => "Not Interacted",
                }
                .to_string(),
            );
        }
    }

    let scores = classification_metrics(
        &truths,
        &predictions,
        &Averaging::Binary { positive: "Interacted".into() },
    )?;
    let mut report = MetricsReport::new("preference_alignment");
    report.param("m", m);
    report.param("items_per_agent", items_per_agent);
    report.param("agents", population.len());
    report.param("skipped_agents", skipped);
    report.set("accuracy", scores.accuracy);
    report.set("precision", scores.precision);
    report.set("recall", scores.recall);
    report.set("f1", scores.f1);
    Ok(report)
}

// --- offline A/B correlation ----------------------------------------------------

/// Mean pages visited per session, the engagement proxy for A/B comparison.
pub fn mean_pages_visited(trajectories: &[Trajectory]) -> f64 {
    if trajectories.is_empty() {
        return 0.0;
    }
    trajectories.iter().map(|t| t.pages_visited() as f64).sum::<f64>() / trajectories.len() as f64
}

/// Correlate simulated vs real per-strategy metrics: Spearman rho plus a
/// seeded 1,000-resample bootstrap 95% interval.
pub fn ab_correlate(
    simulated: &BTreeMap<String, f64>,
    real: &BTreeMap<String, f64>,
    seed: u64,
) -> Result<MetricsReport, ExperimentError> {
    let sim_keys: BTreeSet<&String> = simulated.keys().collect();
    let real_keys: BTreeSet<&String> = real.keys().collect();
    if sim_keys != real_keys {
        let differences: Vec<String> =
            sim_keys.symmetric_difference(&real_keys).map(|k| (*k).clone()).collect();
        return Err(MetricsError::KeyMismatch(differences).into());
    }
    let keys: Vec<&String> = simulated.keys().collect();
    let xs: Vec<f64> = keys.iter().map(|k| simulated[*k]).collect();
    let ys: Vec<f64> = keys.iter().map(|k| real[*k]).collect();
    let rho = spearman(&xs, &ys)?;
    let (low, high) = spearman_bootstrap_ci(&xs, &ys, 1000, seed)?;
    let mut report = MetricsReport::new("ab_correlation");
    report.param("strategies", keys);
    report.param("resamples", 1000);
    report.set("spearman_rho", rho);
    report.set("ci_low", low);
    report.set("ci_high", high);
    Ok(report)
}

// --- exposure boost / brand swap -------------------------------------------------

/// Which manipulation the paired experiment applies.
#[derive(Debug, Clone)]
pub enum Manipulation {
    /// Pin the target at rank 1 for the first `rounds` rounds.
    ExposureBoost { rounds: u32 },
    /// Replace the target's brand with a fictitious name, all else fixed.
    BrandSwap { fictitious: String },
}

/// Per-round cumulative like curves for the manipulated and original runs.
#[derive(Debug, Clone, Serialize)]
pub struct PairedCurves {
    pub target: String,
    pub rounds: u32,
    /// Mean cumulative likes per round across seeds.
    pub manipulated: Vec<f64>,
    pub original: Vec<f64>,
    pub gap: Vec<f64>,
    /// Per-seed gap sequences.
    pub per_seed_gap: BTreeMap<String, Vec<f64>>,
}

fn swap_brand(
    catalog: &BTreeMap<String, Item>,
    target: &str,
    fictitious: &str,
) -> BTreeMap<String, Item> {
    let mut swapped = catalog.clone();
    if let Some(item) = swapped.get_mut(target) {
        if let Some(brand) = item.brand.clone() {
            item.title = item.title.replace(&brand, fictitious);
            item.description = item.description.replace(&brand, fictitious);
            item.brand = Some(fictitious.to_string());
        }
    }
    swapped
}

/// Paired runs with identical seeds: one run applies the manipulation, the
/// other is untouched. Returns cumulative like curves for the target item.
#[allow(clippy::too_many_arguments)]
pub fn matthew_experiment(
    population_template: &[AgentBundle],
    catalog: &BTreeMap<String, Item>,
    strategy: Strategy,
    target: &str,
    manipulation: Manipulation,
    rounds: u32,
    seeds: &[u64],
    options: &SimOptions,
    backend: &dyn Backend,
) -> Result<PairedCurves, ExperimentError> {
    if !catalog.contains_key(target) {
        return Err(ExperimentError::UnknownItem(target.to_string()));
    }
    let mut manipulated_sum = vec![0.0; rounds as usize];
    let mut original_sum = vec![0.0; rounds as usize];
    let mut per_seed_gap = BTreeMap::new();

    for &seed in seeds {
        let mut seed_options = options.clone();
        seed_options.seed = seed;
        let run = |manipulate: bool| -> Result<Vec<u64>, ExperimentError> {
            let mut population = population_template.to_vec();
            let (catalog_run, recommender) = match (&manipulation, manipulate) {
                (Manipulation::ExposureBoost { rounds: boost_rounds }, true) => {
                    let recommender = Recommender::new(strategy.clone(), options.page_size, seed)
                        .apply_exposure_boost(catalog, target, *boost_rounds)
                        .map_err(|_| ExperimentError::UnknownItem(target.to_string()))?;
                    (catalog.clone(), recommender)
                }
                (Manipulation::BrandSwap { fictitious }, true) => (
                    swap_brand(catalog, target, fictitious),
                    Recommender::new(strategy.clone(), options.page_size, seed),
                ),
                (_, false) => (
                    catalog.clone(),
                    Recommender::new(strategy.clone(), options.page_size, seed),
                ),
            };
            let output = run_rounds(
                &mut population,
                &catalog_run,
                &recommender,
                rounds,
                &seed_options,
                backend,
            )?;
            Ok(output.ledger.like_curve(target))
        };
        let manipulated_curve = run(true)?;
        let original_curve = run(false)?;
        let gaps: Vec<f64> = manipulated_curve
            .iter()
            .zip(&original_curve)
            .map(|(m, o)| *m as f64 - *o as f64)
            .collect();
        for index in 0..rounds as usize {
            manipulated_sum[index] += manipulated_curve[index] as f64;
            original_sum[index] += original_curve[index] as f64;
        }
        per_seed_gap.insert(format!("seed_{seed}"), gaps);
    }

    let n = seeds.len().max(1) as f64;
    let manipulated: Vec<f64> = manipulated_sum.iter().map(|v| v / n).collect();
    let original: Vec<f64> = original_sum.iter().map(|v| v / n).collect();
    let gap: Vec<f64> = manipulated.iter().zip(&original).map(|(m, o)| m - o).collect();
    Ok(PairedCurves { target: target.to_string(), rounds, manipulated, original, gap, per_seed_gap })
}

// --- ablations -----------------------------------------------------------------

/// Configuration toggles for the ablation suite.
#[derive(Debug, Clone, PartialEq)]
pub enum AblationToggle {
    /// No life simulation: empty context mask and uniform engagement times.
    NoLifesim,
    /// No thought synthesis: thoughts off during action selection.
    NoThoughts,
    /// Restrict context to a factor subset (the "Time only" style rows).
    Factors(FactorMask),
}

impl AblationToggle {
    pub fn label(&self) -> String {
        match self {
            AblationToggle::NoLifesim => "no_lifesim".into(),
            AblationToggle::NoThoughts => "no_thoughts".into(),
            AblationToggle::Factors(_) => "factor_subset".into(),
        }
    }

    pub fn apply(&self, options: &SimOptions) -> SimOptions {
        let mut ablated = options.clone();
        match self {
            AblationToggle::NoLifesim => {
                ablated.no_lifesim = true;
                ablated.agent.context_factor_mask = FactorMask::none();
            }
            AblationToggle::NoThoughts => {
                ablated.agent.thought_mode = false;
            }
            AblationToggle::Factors(mask) => {
                ablated.agent.context_factor_mask = *mask;
            }
        }
        ablated
    }
}

fn temporal_metrics(output: &SimOutput, prefix: &str, report: &mut MetricsReport) {
    let bands = temporal_ctr(&output.trajectories);
    for (band, share) in ["morning", "afternoon", "evening", "night"].iter().zip(bands.shares) {
        report.set(format!("{prefix}/share_{band}"), share);
    }
    report.set(format!("{prefix}/clicks"), bands.total_clicks as f64);
    let rho = spearman(&bands.shares, &REAL_TEMPORAL_PATTERN).unwrap_or(0.0);
    report.set(format!("{prefix}/temporal_correlation"), rho);
    let ratings: Vec<u8> = output
        .trajectories
        .iter()
        .flat_map(|t| t.steps.iter())
        .filter_map(|s| match &s.action {
            crate::domain::Action::Rate { value, .. } => Some(*value),
            _ => None,
        })
        .collect();
    if !ratings.is_empty() {
        let mean = ratings.iter().map(|r| *r as f64).sum::<f64>() / ratings.len() as f64;
        report.set(format!("{prefix}/rating_mean"), mean);
    }
    report.set(format!("{prefix}/sessions"), output.trajectories.len() as f64);
}

/// Rerun the temporal suite with a toggle applied; report full vs ablated
/// side by side.
pub fn ablation_run(
    population_template: &[AgentBundle],
    catalog: &BTreeMap<String, Item>,
    strategy: Strategy,
    templates: &TemplateLibrary,
    toggle: AblationToggle,
    options: &SimOptions,
    backend: &dyn Backend,
) -> Result<MetricsReport, ExperimentError> {
    let mut report = MetricsReport::new("ablation");
    report.param("toggle", toggle.label());

    let recommender = Recommender::new(strategy.clone(), options.page_size, options.seed);
    let mut full_population = population_template.to_vec();
    let full_output =
        simulate(&mut full_population, catalog, &recommender, templates, options, backend)?;
    temporal_metrics(&full_output, "full", &mut report);

    let ablated_options = toggle.apply(options);
    let mut ablated_population = population_template.to_vec();
    let ablated_output = simulate(
        &mut ablated_population,
        catalog,
        &recommender,
        templates,
        &ablated_options,
        backend,
    )?;
    temporal_metrics(&ablated_output, "ablated", &mut report);
    Ok(report)
}

// --- judge prompt emission --------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JudgeKind {
    HumanLikeness,
    Consistency,
    ContextConsistency,
}

impl JudgeKind {
    pub fn label(&self) -> &'static str {
        match self {
            JudgeKind::HumanLikeness => "human_likeness",
            JudgeKind::Consistency => "consistency",
            JudgeKind::ContextConsistency => "context_consistency",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct JudgePrompt {
    kind: String,
    index: usize,
    prompt: String,
}

fn interaction_log(trajectory: &Trajectory) -> String {
    let mut lines = vec![format!(
        "session {} (context: {})",
        trajectory.session_id,
        context_text(&trajectory.context, &FactorMask::all())
    )];
    for (index, step) in trajectory.steps.iter().enumerate() {
        let thought = if step.thought.is_empty() {
            String::new()
        } else {
            format!(" thought: {}", step.thought)
        };
        lines.push(format!(
            "step {}: saw {}; took {}{}",
            index + 1,
            step.state_digest,
            crate::env::render_action(&step.action),
            thought
        ));
    }
    lines.join("\n")
}

/// The evaluator prompt judging whether a trace reads human or AI-generated.
pub fn human_likeness_prompt(trajectory: &Trajectory) -> String {
    format!(
        "Please evaluate the following interactions of an agent with a recommender system, and \
         determine whether it is generated by a Large Language Model (LLM) AI or a real human:\n\
         {}\n\nPlease rate on a scale of 1 to 5, with 1 being most like an AI and 5 being most \
         like a human.",
        interaction_log(trajectory)
    )
}

/// Persona + observation + rationale triplet judged for coherence.
pub fn consistency_prompt(persona: &Persona, observation: &str, rationale: &str) -> String {
    format!(
        "You judge whether an agent's rationale and action are coherent with its persona and \
         context.\nPERSONA: {} years old, {}; preferences: {}\nOBSERVATION: {}\nRATIONALE: {}\n\n\
         Label this (rationale, action) pair as \"coherent\", \"partially coherent\", or \
         \"contradictory\" with respect to the persona and context.",
        persona.age, persona.occupation, persona.preferences, observation, rationale
    )
}

/// Simulated context judged against a ground-truth description, one label per
/// context dimension.
pub fn context_consistency_prompt(
    persona: &Persona,
    simulated_context: &str,
    ground_truth: &str,
) -> String {
    format!(
        "You judge whether a simulated context is consistent with a ground-truth survey answer.\n\
         PERSONA: {} years old, {}; preferences: {}\nSIMULATED CONTEXT: {}\nGROUND TRUTH: {}\n\n\
         For each dimension (temporal, spatial, situational, goal, constraint), label the \
         simulated context as \"aligned\", \"partially aligned\", or \"contradictory\" to the \
         survey answers.",
        persona.age, persona.occupation, persona.preferences, simulated_context, ground_truth
    )
}

/// Inputs for one judge prompt.
pub enum JudgeSample<'a> {
    Trajectory(&'a Trajectory),
    Rationale { persona: &'a Persona, observation: &'a str, rationale: &'a str },
    Context { persona: &'a Persona, simulated: &'a str, ground_truth: &'a str },
}

/// Write one prompt per sample to a line-JSON file; no scoring happens here.
pub fn emit_judge_prompts(
    samples: &[JudgeSample<'_>],
    kind: JudgeKind,
    path: &Path,
) -> Result<usize, ExperimentError> {
    let io_err =
        |source: std::io::Error| ExperimentError::Io { path: path.display().to_string(), source };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut writer = std::io::BufWriter::new(file);
    let mut count = 0usize;
    for (index, sample) in samples.iter().enumerate() {
        let prompt = match (kind, sample) {
            (JudgeKind::HumanLikeness, JudgeSample::Trajectory(trajectory)) => {
                human_likeness_prompt(trajectory)
            }
            (JudgeKind::Consistency, JudgeSample::Rationale { persona, observation, rationale }) => {
                consistency_prompt(persona, observation, rationale)
            }
            (
                JudgeKind::ContextConsistency,
                JudgeSample::Context { persona, simulated, ground_truth },
            ) => context_consistency_prompt(persona, simulated, ground_truth),
            _ => continue,
        };
        let line = JudgePrompt { kind: kind.label().to_string(), index, prompt };
        writeln!(writer, "{}", serde_json::to_string(&line).expect("prompt serializes"))
            .map_err(io_err)?;
        count += 1;
    }
    writer.flush().map_err(io_err)?;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ClassifyMode, ScriptedBackend};
    use crate::domain::{Action, BigFive, InteractionKind, InteractionRecord, TrajectoryStep};
    use crate::ingest::Dataset;
    use crate::runner::build_population;

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
                        categories: vec![genres[i % genres.len()].into()],
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
            for k in 0..6 {
                interactions.push(InteractionRecord {
                    user_id: format!("u{u:02}"),
                    item_id: format!("i{:03}", (u * 7 + k * 3) % items),
                    rating: Some(1 + ((u + k) % 5) as u8),
                    timestamp: (u * 100 + k) as i64,
                    kind: InteractionKind::Rate,
                });
            }
        }
        let (dataset, _) = Dataset::assemble(interactions, Some(catalog));
        dataset
    }

    fn fixture_context() -> crate::domain::ContextVector {
        crate::domain::ContextVector {
            temporal: crate::domain::TemporalContext { minute_of_day: 0, day_of_week: 0 },
            location: "home".into(),
            situational: crate::domain::SituationalContext {
                latest_activity: "x".into(),
                mood: crate::domain::Mood::Neutral,
                need_level: 0.5,
                energy_level: 0.5,
            },
            goal: "g".into(),
            constraint: crate::domain::ConstraintContext {
                budget: None,
                time_available_minutes: 0,
            },
        }
    }

    #[test]
    fn alignment_with_membership_oracle() {
        let dataset = synthetic_dataset(6, 60);
        let backend = ScriptedBackend::default();
        let population = build_population(&dataset, 6, 1, 2, &BTreeMap::new(), &backend).unwrap();
        for m in [3usize, 9] {
            let report = preference_alignment_experiment(
                &population,
                &dataset.catalog,
                m,
                20,
                "movie",
                2,
                &backend,
            )
            .unwrap();
            assert_eq!(report.metrics["accuracy"], 1.0, "m={m}");
            assert_eq!(report.metrics["recall"], 1.0, "m={m}");
        }
        // m=1 needs 10 interacted items but users have 6 → all skipped.
        let report = preference_alignment_experiment(
            &population,
            &dataset.catalog,
            1,
            20,
            "movie",
            2,
            &backend,
        );
        assert!(report.is_err() || report.unwrap().parameters["skipped_agents"] == serde_json::json!(6));
    }

    #[test]
    fn ab_correlation_perfect_and_mismatch() {
        let simulated: BTreeMap<String, f64> = [("a", 1.0), ("b", 2.0), ("c", 3.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let real: BTreeMap<String, f64> = [("a", 10.0), ("b", 20.0), ("c", 30.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let report = ab_correlate(&simulated, &real, 1).unwrap();
        assert_eq!(report.metrics["spearman_rho"], 1.0);
        assert!(report.all_finite());

        let mut missing = real.clone();
        missing.remove("c");
        missing.insert("d".into(), 1.0);
        let err = ab_correlate(&simulated, &missing, 1).unwrap_err();
        assert!(matches!(err, ExperimentError::Metrics(MetricsError::KeyMismatch(_))));
    }

    #[test]
    fn pages_visited_proxy() {
        let trajectory = Trajectory {
            agent_id: "a".into(),
            session_id: "s".into(),
            context: fixture_context(),
            steps: (1..=3)
                .map(|page| TrajectoryStep {
                    page_number: page,
                    state_digest: format!("page {page}"),
                    thought: String::new(),
                    action: Action::NextPage,
                })
                .collect(),
            terminal_action: Action::Exit,
            forced_exit: false,
            complete: true,
        };
        assert_eq!(trajectory.pages_visited(), 3);
        assert_eq!(mean_pages_visited(std::slice::from_ref(&trajectory)), 3.0);
    }

    #[test]
    fn matthew_zero_boost_is_identity() {
        let dataset = synthetic_dataset(4, 40);
        let backend = ScriptedBackend::default();
        let population = build_population(&dataset, 4, 1, 3, &BTreeMap::new(), &backend).unwrap();
        let options = SimOptions {
            agent: crate::agent::AgentConfig {
                max_steps_per_session: 5,
                ..crate::agent::AgentConfig::default()
            },
            ..SimOptions::default()
        };
        let curves = matthew_experiment(
            &population,
            &dataset.catalog,
            Strategy::Popularity,
            "i000",
            Manipulation::ExposureBoost { rounds: 0 },
            3,
            &[1, 2],
            &options,
            &backend,
        )
        .unwrap();
        assert_eq!(curves.manipulated, curves.original);
        assert!(curves.gap.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn matthew_unknown_target_rejected() {
        let dataset = synthetic_dataset(2, 10);
        let backend = ScriptedBackend::default();
        let population = build_population(&dataset, 2, 1, 3, &BTreeMap::new(), &backend).unwrap();
        let err = matthew_experiment(
            &population,
            &dataset.catalog,
            Strategy::Popularity,
            "ghost",
            Manipulation::ExposureBoost { rounds: 2 },
            2,
            &[1],
            &SimOptions::default(),
            &backend,
        )
        .unwrap_err();
        assert!(matches!(err, ExperimentError::UnknownItem(_)));
    }

    #[test]
    fn brand_swap_reduces_likes_directionally() {
        // Brand-loyal population: the swapped condition must not out-collect
        // the original.
        let mut catalog = BTreeMap::new();
        for i in 0..20 {
            let id = format!("i{i:02}");
            catalog.insert(
                id.clone(),
                Item {
                    item_id: id.clone(),
                    title: if i == 0 {
                        "Neutrogena Cleansing Towelettes".to_string()
                    } else {
                        format!("Product {i}")
                    },
                    description: "skincare".into(),
                    categories: vec!["Skincare".into()],
                    brand: if i == 0 { Some("Neutrogena".into()) } else { None },
                    price: Some(9.99),
                    stat_count: if i == 0 { 15 } else { 20 - i as u64 },
                    stat_mean_rating: Some(4.0),
                },
            );
        }
        let backend = ScriptedBackend::default();
        let mut population = Vec::new();
        for u in 0..6 {
            let persona = Persona {
                agent_id: format!("u{u}"),
                age: 30,
                occupation: "office worker".into(),
                traits: BigFive {
                    openness: 2,
                    conscientiousness: 2,
                    extraversion: 2,
                    agreeableness: 2,
                    neuroticism: 1,
                },
                habits: vec!["engagement: high".into()],
                recent_goals: vec![],
                preferences: "Enjoys Skincare from Neutrogena".into(),
                context_summary: None,
            };
            population.push(AgentBundle::new(persona));
        }
        let options = SimOptions {
            agent: crate::agent::AgentConfig {
                max_steps_per_session: 6,
                ..crate::agent::AgentConfig::default()
            },
            ..SimOptions::default()
        };
        let curves = matthew_experiment(
            &population,
            &catalog,
            Strategy::Popularity,
            "i00",
            Manipulation::BrandSwap { fictitious: "Neutrovia".into() },
            3,
            &[1, 2],
            &options,
            &backend,
        )
        .unwrap();
        let last = curves.rounds as usize - 1;
        assert!(
            curves.manipulated[last] <= curves.original[last],
            "swap {:?} vs original {:?}",
            curves.manipulated,
            curves.original
        );
    }

    #[test]
    fn judge_prompts_written() {
        let persona = Persona {
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
        let trajectory = Trajectory {
            agent_id: "u1".into(),
            session_id: "s".into(),
            context: fixture_context(),
            steps: vec![TrajectoryStep {
                page_number: 1,
                state_digest: "page 1 items [a]".into(),
                thought: "t".into(),
                action: Action::Exit,
            }],
            terminal_action: Action::Exit,
            forced_exit: false,
            complete: true,
        };
        let dir = tempfile::tempdir().unwrap();

        let samples =
            vec![JudgeSample::Trajectory(&trajectory), JudgeSample::Trajectory(&trajectory)];
        let path = dir.path().join("judge_human.jsonl");
        let count = emit_judge_prompts(&samples, JudgeKind::HumanLikeness, &path).unwrap();
        assert_eq!(count, 2);
        let content = std::fs::read_to_string(&path).unwrap();
        assert_eq!(content.lines().count(), 2);
        assert!(content.contains(
            "rate on a scale of 1 to 5, with 1 being most like an AI and 5 being most like a human"
        ));

        let samples = vec![JudgeSample::Rationale {
            persona: &persona,
            observation: "page 1 items [a]",
            rationale: "clicked a because comedy",
        }];
        let path = dir.path().join("judge_consistency.jsonl");
        assert_eq!(emit_judge_prompts(&samples, JudgeKind::Consistency, &path).unwrap(), 1);
        let content = std::fs::read_to_string(&path).unwrap();
        assert!(content.contains("PERSONA"));
        assert!(content.contains("OBSERVATION"));
        assert!(content.contains("RATIONALE"));

        let samples = vec![JudgeSample::Context {
            persona: &persona,
            simulated: "Tue 19:00; at home",
            ground_truth: "evening at home",
        }];
        let path = dir.path().join("judge_context.jsonl");
        assert_eq!(
            emit_judge_prompts(&samples, JudgeKind::ContextConsistency, &path).unwrap(),
            1
        );
    }

    #[test]
    fn degraded_classify_smoke() {
        let dataset = synthetic_dataset(4, 60);
        let backend = ScriptedBackend::with_classify_mode(ClassifyMode::OverlapConservative);
        let population = build_population(&dataset, 4, 1, 2, &BTreeMap::new(), &backend).unwrap();
        let report = preference_alignment_experiment(
            &population,
            &dataset.catalog,
            3,
            20,
            "movie",
            2,
            &backend,
        )
        .unwrap();
        assert!(report.all_finite());
    }
}
