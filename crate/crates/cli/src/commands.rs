//! Subcommand implementations. Every run writes its artifacts plus a
//! resolved-config snapshot and checksum manifest into the output directory.

use crate::artifacts::{csv_text, RunDir};
use crate::config::RunConfig;
use anyhow::{bail, Context, Result};
use contextsim_core::agent::{rate_item, AgentBundle};
use contextsim_core::backend::Backend;
use contextsim_core::domain::{Action, FactorMask, Persona, Trajectory};
use contextsim_core::env::{train_mf, MfModel, Recommender, Strategy};
use contextsim_core::evalx::experiments::{
    ab_correlate, ablation_run, emit_judge_prompts, matthew_experiment, mean_pages_visited,
    preference_alignment_experiment, AblationToggle, JudgeKind, JudgeSample, Manipulation,
    REAL_TEMPORAL_PATTERN,
};
use contextsim_core::evalx::{
    classification_metrics, rating_distribution, rmse_mae, spearman, temporal_ctr, Averaging,
    MetricsReport, SessionOutcome,
};
use contextsim_core::ingest::{
    self, filter_min_interactions, load_interactions, temporal_split, Dataset, IngestStats, Split,
};
use contextsim_core::runner::{build_population, population_from_personas, simulate, SimOutput};
use contextsim_core::thoughts::{
    build_id_records, build_ta_records, export_jsonl, ta_steps_from_ratings,
    ta_steps_from_trajectory, ID_CAP_PER_USER,
};
use contextsim_core::{io as core_io, seeds};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

fn load_split(config: &RunConfig) -> Result<(Dataset, Split, IngestStats)> {
    let interactions_path = config
        .dataset
        .interactions
        .as_ref()
        .context("dataset.interactions is required for this command")?;
    let report = load_interactions(interactions_path, &config.dataset.delimiter)?;
    let catalog = match &config.dataset.catalog {
        Some(path) => Some(ingest::load_catalog(path, &config.dataset.delimiter)?),
        None => None,
    };
    let filtered = filter_min_interactions(&report.records, config.dataset.min_interactions);
    let (dataset, dropped) = Dataset::assemble(filtered, catalog);
    let split = temporal_split(&dataset.interactions, config.dataset.split)?;
    let stats = IngestStats {
        rows_parsed: report.records.len(),
        rows_malformed: report.malformed,
        dropped_missing_item: dropped,
        records_after_filter: dataset.interactions.len(),
        users: dataset.users.len(),
        items: dataset.catalog.len(),
        split_sizes: (split.train.len(), split.validation.len(), split.test.len()),
        train_timestamp_range: ingest::timestamp_range(&split.train),
        validation_timestamp_range: ingest::timestamp_range(&split.validation),
        test_timestamp_range: ingest::timestamp_range(&split.test),
    };
    Ok((dataset, split, stats))
}

/// Dataset restricted to the train partition: agents must not see the future.
fn train_view(dataset: &Dataset, split: &Split) -> Dataset {
    let (train_dataset, _) =
        Dataset::assemble(split.train.clone(), Some(dataset.catalog.clone()));
    train_dataset
}

fn make_strategy(config: &RunConfig, name: &str, train: &[contextsim_core::domain::InteractionRecord]) -> Result<Strategy> {
    match name {
        "random" => Ok(Strategy::Random),
        "popularity" => Ok(Strategy::Popularity),
        "mf" => {
            let model = train_mf(train, &config.mf, config.seed())
                .map_err(|e| anyhow::anyhow!("mf training: {e}"))?;
            Ok(Strategy::Mf(model))
        }
        "external" => {
            let path = config
                .simulation
                .external_rankings
                .as_ref()
                .context("strategy=external requires simulation.external_rankings")?;
            #[derive(Deserialize)]
            struct RankingLine {
                user_id: String,
                ranking: Vec<String>,
            }
            let lines: Vec<RankingLine> = core_io::read_jsonl(path)?;
            Ok(Strategy::External(
                lines.into_iter().map(|l| (l.user_id, l.ranking)).collect(),
            ))
        }
        other => bail!("unknown strategy: {other}"),
    }
}

fn personas_path(config: &RunConfig) -> PathBuf {
    config.output_dir.join("personas.jsonl")
}

/// Reload personas when present (so simulation runs skip re-inference),
/// otherwise infer and persist them.
fn load_or_build_population(
    config: &RunConfig,
    train_dataset: &Dataset,
    backend: &dyn Backend,
) -> Result<(Vec<AgentBundle>, bool)> {
    let path = personas_path(config);
    if path.exists() {
        let personas: Vec<Persona> = core_io::read_jsonl(&path)?;
        log::info!("reloaded {} personas from {}", personas.len(), path.display());
        return Ok((population_from_personas(train_dataset, personas), false));
    }
    let demographics = match &config.dataset.demographics {
        Some(path) => ingest::load_demographics(path, &config.dataset.delimiter)?,
        None => BTreeMap::new(),
    };
    let population = build_population(
        train_dataset,
        config.simulation.agents,
        config.personas.candidates,
        config.seed(),
        &demographics,
        backend,
    )?;
    Ok((population, true))
}

fn write_personas(run: &mut RunDir, population: &[AgentBundle]) -> Result<()> {
    let personas: Vec<&Persona> = population.iter().map(|b| &b.persona).collect();
    run.write_jsonl("personas.jsonl", &personas)
}

// --- subcommands -----------------------------------------------------------------

pub fn cmd_ingest(config: &RunConfig) -> Result<()> {
    let (_, split, stats) = load_split(config)?;
    let mut run = RunDir::create(&config.output_dir, config.seed(), &config.resolved_toml())?;
    run.write_jsonl("train.jsonl", &split.train)?;
    run.write_jsonl("validation.jsonl", &split.validation)?;
    run.write_jsonl("test.jsonl", &split.test)?;
    run.write_json("ingest_stats.json", &stats)?;
    println!(
        "ingest: {} records after filter → split {}/{}/{} ({} malformed rows)",
        stats.records_after_filter,
        stats.split_sizes.0,
        stats.split_sizes.1,
        stats.split_sizes.2,
        stats.rows_malformed
    );
    run.finish()
}

pub fn cmd_init_personas(config: &RunConfig) -> Result<()> {
    let (dataset, split, _) = load_split(config)?;
    let train_dataset = train_view(&dataset, &split);
    let backend = config.make_backend()?;
    let mut run = RunDir::create(&config.output_dir, config.seed(), &config.resolved_toml())?;
    let (population, _) = load_or_build_population(config, &train_dataset, backend.as_ref())?;
    write_personas(&mut run, &population)?;
    println!("init-personas: {} personas written", population.len());
    run.finish()
}

pub fn cmd_simulate(config: &RunConfig) -> Result<()> {
    let (dataset, split, _) = load_split(config)?;
    let train_dataset = train_view(&dataset, &split);
    let backend = config.make_backend()?;
    let templates = config.templates()?;
    let strategy = make_strategy(config, &config.simulation.strategy, &split.train)?;
    let options = config.sim_options();
    let recommender = Recommender::new(strategy, options.page_size, options.seed);

    let mut run = RunDir::create(&config.output_dir, config.seed(), &config.resolved_toml())?;
    let (mut population, fresh) =
        load_or_build_population(config, &train_dataset, backend.as_ref())?;
    if fresh {
        write_personas(&mut run, &population)?;
    }
    let output = simulate(
        &mut population,
        &train_dataset.catalog,
        &recommender,
        &templates,
        &options,
        backend.as_ref(),
    )?;
    core_io::write_trajectory_log(&run.path("trajectories.jsonl"), &output.trajectories)?;
    run.record("trajectories.jsonl")?;
    run.write_jsonl("memories.jsonl", &SimOutput::memory_snapshots(&population))?;
    run.write_json("ledger.json", &output.ledger)?;
    if !output.schedules.is_empty() {
        run.write_jsonl("schedules.jsonl", &output.schedules)?;
    }

    let mut summary = MetricsReport::new("simulate");
    summary.param("variant", &config.simulation.variant);
    summary.param("strategy", &config.simulation.strategy);
    summary.set("sessions", output.trajectories.len() as f64);
    summary.set("mean_pages_visited", mean_pages_visited(&output.trajectories));
    summary.set(
        "complete_fraction",
        output.trajectories.iter().filter(|t| t.complete).count() as f64
            / output.trajectories.len().max(1) as f64,
    );
    run.write_json("report_simulate.json", &summary)?;
    println!(
        "simulate: {} sessions from {} agents",
        output.trajectories.len(),
        population.len()
    );
    run.finish()
}

pub fn cmd_export_thoughts(config: &RunConfig) -> Result<()> {
    let (dataset, split, _) = load_split(config)?;
    let train_dataset = train_view(&dataset, &split);
    let backend = config.make_backend()?;
    let mut run = RunDir::create(&config.output_dir, config.seed(), &config.resolved_toml())?;
    let (population, fresh) =
        load_or_build_population(config, &train_dataset, backend.as_ref())?;
    if fresh {
        write_personas(&mut run, &population)?;
    }

    let trajectory_path = run.path("trajectories.jsonl");
    let trajectories: Vec<Trajectory> = if trajectory_path.exists() {
        core_io::read_trajectory_log(&trajectory_path)?
    } else {
        Vec::new()
    };
    let reconstructed = trajectories.is_empty();

    let mut id_records = Vec::new();
    let mut ta_records = Vec::new();
    for bundle in &population {
        let history = train_dataset.user_history(&bundle.persona.agent_id);
        id_records.extend(build_id_records(
            &bundle.persona,
            &history,
            &train_dataset.catalog,
            None,
            ID_CAP_PER_USER,
            config.seed(),
            backend.as_ref(),
        )?);
        let excerpt: Vec<String> = history
            .iter()
            .rev()
            .take(10)
            .filter_map(|r| {
                train_dataset
                    .catalog
                    .get(&r.item_id)
                    .map(|i| format!("rated {} {}/5", i.title, r.rating.unwrap_or(3)))
            })
            .collect();
        let excerpt = excerpt.join("; ");
        let steps = if reconstructed {
            ta_steps_from_ratings(&history, &train_dataset.catalog, config.simulation.page_size)
        } else {
            trajectories
                .iter()
                .filter(|t| t.agent_id == bundle.persona.agent_id)
                .flat_map(|t| ta_steps_from_trajectory(t, config.domain_mode()))
                .collect()
        };
        ta_records.extend(build_ta_records(
            &bundle.persona,
            &steps,
            &excerpt,
            backend.as_ref(),
        )?);
    }
    let id_count = export_jsonl(&id_records, &run.path("thoughts_id.jsonl"), false)?;
    let ta_count = export_jsonl(&ta_records, &run.path("thoughts_ta.jsonl"), reconstructed)?;
    for name in
        ["thoughts_id.jsonl", "thoughts_id.manifest.json", "thoughts_ta.jsonl", "thoughts_ta.manifest.json"]
    {
        run.record(name)?;
    }
    println!("export-thoughts: {id_count} ID records, {ta_count} TA records");
    run.finish()
}

// --- eval subcommands ---------------------------------------------------------------

pub struct EvalInputs {
    pub real_metrics: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub kind: Option<String>,
    pub brand_swap: bool,
}

pub fn cmd_eval(config: &RunConfig, experiment: &str, inputs: &EvalInputs) -> Result<()> {
    match experiment {
        "alignment" => eval_alignment(config),
        "rating" => eval_rating(config, inputs),
        "temporal" => eval_temporal(config),
        "distribution" => eval_distribution(config),
        "ab" => eval_ab(config, inputs),
        "matthew" => eval_matthew(config, inputs),
        "ablation" => eval_ablation(config),
        "actions" => eval_actions(config, inputs),
        "judge-prompts" => eval_judge_prompts(config, inputs),
        "context" => eval_context(config),
        other => bail!("unknown experiment: {other} (expected alignment | rating | temporal | \
                        distribution | ab | matthew | ablation | actions | judge-prompts | context)"),
    }
}

/// Context effects on liked genres: log frequency ratio of each genre within
/// a context label (home/outside, weekday/weekend) vs the overall liked set.
fn eval_context(config: &RunConfig) -> Result<()> {
    use contextsim_core::evalx::{log_freq_ratio, LikedEvent};
    let (dataset, _, _) = load_split(config)?;
    let mut run = RunDir::create(&config.output_dir, config.seed(), &config.resolved_toml())?;
    let path = run.path("trajectories.jsonl");
    if !path.exists() {
        bail!("trajectories.jsonl not found in {}; run `simulate` first", config.output_dir.display());
    }
    let trajectories = core_io::read_trajectory_log(&path)?;

    let mut events: Vec<(LikedEvent, LikedEvent)> = Vec::new();
    for trajectory in &trajectories {
        let location_label =
            if trajectory.context.location == "home" { "home" } else { "outside" };
        let day_label = if trajectory.context.temporal.day_of_week >= 5 { "weekend" } else { "weekday" };
        for step in &trajectory.steps {
            if let Action::Rate { item_id, value } = &step.action {
                if *value >= contextsim_core::env::LIKE_THRESHOLD {
                    if let Some(item) = dataset.catalog.get(item_id) {
                        events.push((
                            LikedEvent {
                                categories: item.categories.clone(),
                                context_label: location_label.to_string(),
                            },
                            LikedEvent {
                                categories: item.categories.clone(),
                                context_label: day_label.to_string(),
                            },
                        ));
                    }
                }
            }
        }
    }
    if events.is_empty() {
        bail!("no liked interactions in trajectories");
    }
    let by_location: Vec<LikedEvent> = events.iter().map(|(l, _)| l.clone()).collect();
    let by_day: Vec<LikedEvent> = events.iter().map(|(_, d)| d.clone()).collect();

    // Most frequent genres among liked interactions.
    let mut genre_counts: BTreeMap<String, usize> = BTreeMap::new();
    for event in &by_location {
        for genre in &event.categories {
            *genre_counts.entry(genre.clone()).or_default() += 1;
        }
    }
    let mut genres: Vec<(String, usize)> = genre_counts.into_iter().collect();
    genres.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    genres.truncate(8);

    let mut report = MetricsReport::new("context_effects");
    report.param("liked_events", by_location.len());
    let mut rows = Vec::new();
    for (genre, _) in &genres {
        let mut row = vec![genre.clone()];
        for (pool, label) in [
            (&by_location, "home"),
            (&by_location, "outside"),
            (&by_day, "weekday"),
            (&by_day, "weekend"),
        ] {
            let value = log_freq_ratio(pool, genre, label).unwrap_or(0.0);
            report.set(format!("{genre}/{label}"), value);
            row.push(format!("{value:.4}"));
        }
        rows.push(row);
    }
    run.write_json("report_context.json", &report)?;
    run.write_text(
        "table_context.csv",
        &csv_text(&["genre", "home", "outside", "weekday", "weekend"], &rows),
    )?;
    println!("eval context: {} genres over {} liked events", genres.len(), by_location.len());
    run.finish()
}

fn eval_alignment(config: &RunConfig) -> Result<()> {
    let (dataset, split, _) = load_split(config)?;
    let train_dataset = train_view(&dataset, &split);
    let backend = config.make_backend()?;
    let mut run = RunDir::create(&config.output_dir, config.seed(), &config.resolved_toml())?;
    let (population, fresh) =
        load_or_build_population(config, &train_dataset, backend.as_ref())?;
    if fresh {
        write_personas(&mut run, &population)?;
    }
    let mut merged = MetricsReport::new("preference_alignment");
    merged.param("ratios", &config.experiments.alignment_ratios);
    let mut rows = Vec::new();
    for &m in &config.experiments.alignment_ratios {
        let report = preference_alignment_experiment(
            &population,
            &train_dataset.catalog,
            m,
            config.experiments.items_per_agent,
            &config.simulation.item_type,
            config.seed(),
            backend.as_ref(),
        )?;
        for metric in ["accuracy", "precision", "recall", "f1"] {
            merged.set(format!("m{m}/{metric}"), report.metrics[metric]);
        }
        rows.push(vec![
            format!("1:{m}"),
            format!("{:.4}", report.metrics["accuracy"]),
            format!("{:.4}", report.metrics["precision"]),
            format!("{:.4}", report.metrics["recall"]),
            format!("{:.4}", report.metrics["f1"]),
        ]);
    }
    run.write_json("report_alignment.json", &merged)?;
    run.write_text(
        "table_alignment.csv",
        &csv_text(&["ratio", "accuracy", "precision", "recall", "f1"], &rows),
    )?;
    println!("eval alignment: ratios {:?} done", config.experiments.alignment_ratios);
    run.finish()
}

fn eval_rating(config: &RunConfig, inputs: &EvalInputs) -> Result<()> {
    let mut run = RunDir::create(&config.output_dir, config.seed(), &config.resolved_toml())?;
    let mut report = MetricsReport::new("rating_prediction");
    let mut rows = Vec::new();

    if let Some(path) = &inputs.predictions {
        // Precomputed predictions: line-JSON {prediction, truth}.
        #[derive(Deserialize)]
        struct PredictionLine {
            prediction: f64,
            truth: f64,
        }
        let lines: Vec<PredictionLine> = core_io::read_jsonl(path)?;
        let predictions: Vec<f64> = lines.iter().map(|l| l.prediction).collect();
        let truths: Vec<f64> = lines.iter().map(|l| l.truth).collect();
        let (rmse, mae) = rmse_mae(&predictions, &truths)?;
        report.set("provided/rmse", rmse);
        report.set("provided/mae", mae);
        rows.push(vec!["provided".into(), format!("{rmse:.4}"), format!("{mae:.4}")]);
    } else {
        let (dataset, split, _) = load_split(config)?;
        let train_dataset = train_view(&dataset, &split);
        let backend = config.make_backend()?;
        let (population, fresh) =
            load_or_build_population(config, &train_dataset, backend.as_ref())?;
        if fresh {
            write_personas(&mut run, &population)?;
        }
        let model: MfModel = train_mf(&split.train, &config.mf, config.seed())
            .map_err(|e| anyhow::anyhow!("mf training: {e}"))?;
        let by_agent: BTreeMap<&str, &AgentBundle> =
            population.iter().map(|b| (b.persona.agent_id.as_str(), b)).collect();

        let mask = config.factor_mask();
        let mut mf_predictions = Vec::new();
        let mut agent_predictions = Vec::new();
        let mut truths = Vec::new();
        for record in &split.test {
            let Some(rating) = record.rating else { continue };
            let Some(bundle) = by_agent.get(record.user_id.as_str()) else { continue };
            let Some(item) = dataset.catalog.get(&record.item_id) else { continue };
            let context = contextsim_core::lifesim::sum_variant_context(
                &contextsim_core::lifesim::SummaryAggregates {
                    band_frequencies: [0.25, 0.25, 0.25, 0.25],
                    top_locations: vec![("home".into(), 1)],
                    top_goals: vec![("find something to watch".into(), 1)],
                    budget_median: None,
                },
                &record.user_id,
                seeds::hash_str(&record.item_id),
                config.seed(),
            );
            let predicted = rate_item(
                item,
                &bundle.persona,
                &context,
                &mask,
                &bundle.episodic,
                backend.as_ref(),
            )?;
            agent_predictions.push(predicted as f64);
            mf_predictions.push(model.predict(&record.user_id, &record.item_id));
            truths.push(rating as f64);
        }
        if truths.is_empty() {
            bail!("no rateable test interactions for the selected agents");
        }
        let (mf_rmse, mf_mae) = rmse_mae(&mf_predictions, &truths)?;
        let (agent_rmse, agent_mae) = rmse_mae(&agent_predictions, &truths)?;
        report.param("test_pairs", truths.len());
        report.set("mf/rmse", mf_rmse);
        report.set("mf/mae", mf_mae);
        report.set("agent/rmse", agent_rmse);
        report.set("agent/mae", agent_mae);
        rows.push(vec!["MF".into(), format!("{mf_rmse:.4}"), format!("{mf_mae:.4}")]);
        rows.push(vec!["Agent".into(), format!("{agent_rmse:.4}"), format!("{agent_mae:.4}")]);
    }
    run.write_json("report_rating.json", &report)?;
    run.write_text("table_rating.csv", &csv_text(&["method", "rmse", "mae"], &rows))?;
    println!("eval rating: done");
    run.finish()
}

fn eval_temporal(config: &RunConfig) -> Result<()> {
    let mut run = RunDir::create(&config.output_dir, config.seed(), &config.resolved_toml())?;
    let path = run.path("trajectories.jsonl");
    if !path.exists() {
        bail!("trajectories.jsonl not found in {}; run `simulate` first", config.output_dir.display());
    }
    let trajectories = core_io::read_trajectory_log(&path)?;
    let bands = temporal_ctr(&trajectories);
    let mut report = MetricsReport::new("temporal_ctr");
    report.param("sessions", trajectories.len());
    let labels = ["morning", "afternoon", "evening", "night"];
    for (label, share) in labels.iter().zip(bands.shares) {
        report.set(format!("share_{label}"), share);
    }
    report.set("clicks", bands.total_clicks as f64);
    report.set(
        "correlation_vs_real",
        spearman(&bands.shares, &REAL_TEMPORAL_PATTERN).unwrap_or(0.0),
    );
    let rows: Vec<Vec<String>> = labels
        .iter()
        .zip(bands.shares)
        .zip(REAL_TEMPORAL_PATTERN)
        .map(|((label, share), real)| {
            vec![label.to_string(), format!("{share:.4}"), format!("{real:.4}")]
        })
        .collect();
    run.write_json("report_temporal.json", &report)?;
    run.write_text("table_temporal.csv", &csv_text(&["band", "simulated", "real"], &rows))?;
    println!(
        "eval temporal: shares M {:.3} A {:.3} E {:.3} N {:.3} over {} clicks",
        bands.shares[0], bands.shares[1], bands.shares[2], bands.shares[3], bands.total_clicks
    );
    run.finish()
}

fn eval_distribution(config: &RunConfig) -> Result<()> {
    let (_, split, _) = load_split(config)?;
    let mut run = RunDir::create(&config.output_dir, config.seed(), &config.resolved_toml())?;
    let path = run.path("trajectories.jsonl");
    if !path.exists() {
        bail!("trajectories.jsonl not found in {}; run `simulate` first", config.output_dir.display());
    }
    let trajectories = core_io::read_trajectory_log(&path)?;
    let simulated: Vec<u8> = trajectories
        .iter()
        .flat_map(|t| t.steps.iter())
        .filter_map(|s| match &s.action {
            Action::Rate { value, .. } => Some(*value),
            _ => None,
        })
        .collect();
    let reference: Vec<u8> = split
        .test
        .iter()
        .chain(split.validation.iter())
        .filter_map(|r| r.rating)
        .collect();
    if simulated.is_empty() {
        bail!("no simulated ratings in trajectories");
    }
    let simulated_hist = rating_distribution(&simulated)?;
    let reference_hist = rating_distribution(&reference)?;
    let tv = contextsim_core::evalx::tv_distance(&simulated_hist, &reference_hist);
    let mut report = MetricsReport::new("rating_distribution");
    report.set("tv_distance", tv);
    for star in 0..5 {
        report.set(format!("simulated_{}", star + 1), simulated_hist[star]);
        report.set(format!("reference_{}", star + 1), reference_hist[star]);
    }
    let rows: Vec<Vec<String>> = (0..5)
        .map(|star| {
            vec![
                (star + 1).to_string(),
                format!("{:.4}", simulated_hist[star]),
                format!("{:.4}", reference_hist[star]),
            ]
        })
        .collect();
    run.write_json("report_distribution.json", &report)?;
    run.write_text("table_distribution.csv", &csv_text(&["rating", "simulated", "reference"], &rows))?;
    println!("eval distribution: TV distance {tv:.4}");
    run.finish()
}

fn eval_ab(config: &RunConfig, inputs: &EvalInputs) -> Result<()> {
    let real_path =
        inputs.real_metrics.as_ref().context("eval ab requires --real <file.json>")?;
    let real: BTreeMap<String, f64> = serde_json::from_str(
        &std::fs::read_to_string(real_path)
            .with_context(|| format!("reading {}", real_path.display()))?,
    )?;
    let (dataset, split, _) = load_split(config)?;
    let train_dataset = train_view(&dataset, &split);
    let backend = config.make_backend()?;
    let templates = config.templates()?;
    let mut run = RunDir::create(&config.output_dir, config.seed(), &config.resolved_toml())?;
    let (population, fresh) =
        load_or_build_population(config, &train_dataset, backend.as_ref())?;
    if fresh {
        write_personas(&mut run, &population)?;
    }
    let options = config.sim_options();
    let mut simulated = BTreeMap::new();
    for strategy_name in &config.experiments.ab_strategies {
        let strategy = make_strategy(config, strategy_name, &split.train)?;
        let recommender = Recommender::new(strategy, options.page_size, options.seed);
        let mut strategy_population = population.clone();
        let output = simulate(
            &mut strategy_population,
            &train_dataset.catalog,
            &recommender,
            &templates,
            &options,
            backend.as_ref(),
        )?;
        simulated.insert(strategy_name.clone(), mean_pages_visited(&output.trajectories));
    }
    let mut report = ab_correlate(&simulated, &real, config.seed())?;
    for (strategy, value) in &simulated {
        report.set(format!("sim_pages/{strategy}"), *value);
    }
    run.write_json("report_ab.json", &report)?;
    println!("eval ab: rho {:.3}", report.metrics["spearman_rho"]);
    run.finish()
}

fn eval_matthew(config: &RunConfig, inputs: &EvalInputs) -> Result<()> {
    let (dataset, split, _) = load_split(config)?;
    let train_dataset = train_view(&dataset, &split);
    let backend = config.make_backend()?;
    let mut run = RunDir::create(&config.output_dir, config.seed(), &config.resolved_toml())?;
    let (population, fresh) =
        load_or_build_population(config, &train_dataset, backend.as_ref())?;
    if fresh {
        write_personas(&mut run, &population)?;
    }
    let target = config
        .experiments
        .matthew_target
        .clone()
        .or_else(|| train_dataset.catalog.keys().next().cloned())
        .context("empty catalog")?;
    let manipulation = if inputs.brand_swap {
        Manipulation::BrandSwap { fictitious: config.experiments.brand_fictitious.clone() }
    } else {
        Manipulation::ExposureBoost { rounds: config.experiments.matthew_boost_rounds }
    };
    let seeds: Vec<u64> =
        (0..config.experiments.matthew_seeds).map(|i| seeds::derive(config.seed(), "matthew", &[i])).collect();
    let strategy = make_strategy(config, &config.simulation.strategy, &split.train)?;
    let curves = matthew_experiment(
        &population,
        &train_dataset.catalog,
        strategy,
        &target,
        manipulation,
        config.experiments.matthew_rounds,
        &seeds,
        &config.sim_options(),
        backend.as_ref(),
    )?;
    let rows: Vec<Vec<String>> = (0..curves.rounds as usize)
        .map(|round| {
            vec![
                (round + 1).to_string(),
                format!("{:.4}", curves.manipulated[round]),
                format!("{:.4}", curves.original[round]),
                format!("{:.4}", curves.gap[round]),
            ]
        })
        .collect();
    run.write_json("report_matthew.json", &curves)?;
    run.write_text(
        "curves_matthew.csv",
        &csv_text(&["round", "manipulated", "original", "gap"], &rows),
    )?;
    println!(
        "eval matthew: target {} final gap {:.2}",
        curves.target,
        curves.gap.last().copied().unwrap_or(0.0)
    );
    run.finish()
}

fn eval_ablation(config: &RunConfig) -> Result<()> {
    let (dataset, split, _) = load_split(config)?;
    let train_dataset = train_view(&dataset, &split);
    let backend = config.make_backend()?;
    let templates = config.templates()?;
    let mut run = RunDir::create(&config.output_dir, config.seed(), &config.resolved_toml())?;
    let (population, fresh) =
        load_or_build_population(config, &train_dataset, backend.as_ref())?;
    if fresh {
        write_personas(&mut run, &population)?;
    }
    let options = config.sim_options();
    let mut merged = MetricsReport::new("ablation");
    let mut rows = Vec::new();
    for toggle_name in &config.experiments.ablation_toggles {
        let toggle = match toggle_name.as_str() {
            "no_lifesim" => AblationToggle::NoLifesim,
            "no_thoughts" => AblationToggle::NoThoughts,
            "time_only" => AblationToggle::Factors(FactorMask::time_only()),
            "no_context" => AblationToggle::Factors(FactorMask::none()),
            other => bail!("unknown ablation toggle: {other}"),
        };
        let strategy = make_strategy(config, &config.simulation.strategy, &split.train)?;
        let report = ablation_run(
            &population,
            &train_dataset.catalog,
            strategy,
            &templates,
            toggle,
            &options,
            backend.as_ref(),
        )?;
        for (metric, value) in &report.metrics {
            merged.set(format!("{toggle_name}/{metric}"), *value);
        }
        rows.push(vec![
            toggle_name.clone(),
            format!("{:.4}", report.metrics.get("full/temporal_correlation").copied().unwrap_or(0.0)),
            format!("{:.4}", report.metrics.get("ablated/temporal_correlation").copied().unwrap_or(0.0)),
        ]);
    }
    run.write_json("report_ablation.json", &merged)?;
    run.write_text(
        "table_ablation.csv",
        &csv_text(&["toggle", "full_temporal_corr", "ablated_temporal_corr"], &rows),
    )?;
    println!("eval ablation: {} toggles", config.experiments.ablation_toggles.len());
    run.finish()
}

#[derive(Debug, Serialize, Deserialize)]
struct ActionRecordLine {
    session_id: String,
    action: Action,
}

fn click_subtype(action: &Action) -> Option<String> {
    match action {
        Action::ClickItem { .. } => Some("item_click".into()),
        Action::WebClick { semantic_id } => {
            if contextsim_core::domain::is_purchase_tagged(semantic_id) {
                return Some("purchase".into());
            }
            // Strip a trailing numeric suffix: product_link_3 → product_link.
            let trimmed = semantic_id.trim_end_matches(|c: char| c.is_ascii_digit());
            Some(trimmed.trim_end_matches('_').to_string())
        }
        _ => None,
    }
}

fn eval_actions(config: &RunConfig, inputs: &EvalInputs) -> Result<()> {
    let truth_path = inputs.truth.as_ref().context("eval actions requires --truth <file>")?;
    let pred_path =
        inputs.predictions.as_ref().context("eval actions requires --predictions <file>")?;
    let truths: Vec<ActionRecordLine> = core_io::read_jsonl(truth_path)?;
    let predictions: Vec<ActionRecordLine> = core_io::read_jsonl(pred_path)?;
    if truths.len() != predictions.len() {
        bail!("truth has {} records, predictions {}", truths.len(), predictions.len());
    }
    let mut run = RunDir::create(&config.output_dir, config.seed(), &config.resolved_toml())?;

    // Action generation accuracy: exact structural match.
    let exact = truths
        .iter()
        .zip(&predictions)
        .filter(|(t, p)| contextsim_core::evalx::action_match(&p.action, &t.action))
        .count() as f64
        / truths.len() as f64;

    // Action type macro F1.
    let truth_types: Vec<String> =
        truths.iter().map(|r| r.action.type_label().to_string()).collect();
    let pred_types: Vec<String> =
        predictions.iter().map(|r| r.action.type_label().to_string()).collect();
    let type_scores = classification_metrics(&truth_types, &pred_types, &Averaging::Macro)?;

    // Click subtype weighted F1 over steps whose truth is a click.
    let mut click_truths = Vec::new();
    let mut click_preds = Vec::new();
    for (t, p) in truths.iter().zip(&predictions) {
        if let Some(subtype) = click_subtype(&t.action) {
            click_truths.push(subtype);
            click_preds.push(click_subtype(&p.action).unwrap_or_else(|| "not_click".into()));
        }
    }
    let click_scores = if click_truths.is_empty() {
        None
    } else {
        Some(classification_metrics(&click_truths, &click_preds, &Averaging::Weighted)?)
    };

    // Session outcome weighted F1 from each session's last action.
    let outcome_of = |records: &[ActionRecordLine]| -> BTreeMap<String, String> {
        let mut last: BTreeMap<String, &Action> = BTreeMap::new();
        for record in records {
            last.insert(record.session_id.clone(), &record.action);
        }
        last.into_iter()
            .map(|(session, action)| {
                let outcome = match action {
                    Action::WebClick { semantic_id }
                        if contextsim_core::domain::is_purchase_tagged(semantic_id) =>
                    {
                        SessionOutcome::Purchase
                    }
                    _ => SessionOutcome::Terminate,
                };
                (session, format!("{outcome:?}"))
            })
            .collect()
    };
    let truth_outcomes = outcome_of(&truths);
    let pred_outcomes = outcome_of(&predictions);
    let sessions: BTreeSet<&String> = truth_outcomes.keys().collect();
    let outcome_truth: Vec<String> =
        sessions.iter().map(|s| truth_outcomes[*s].clone()).collect();
    let outcome_pred: Vec<String> = sessions
        .iter()
        .map(|s| pred_outcomes.get(*s).cloned().unwrap_or_else(|| "Terminate".into()))
        .collect();
    let outcome_scores =
        classification_metrics(&outcome_truth, &outcome_pred, &Averaging::Weighted)?;

    let mut report = MetricsReport::new("action_alignment");
    report.param("steps", truths.len());
    report.set("action_gen_accuracy", exact);
    report.set("action_type_macro_f1", type_scores.f1);
    if let Some(scores) = click_scores {
        report.set("click_type_weighted_f1", scores.f1);
    }
    report.set("session_outcome_weighted_f1", outcome_scores.f1);
    report.set("session_outcome_accuracy", outcome_scores.accuracy);
    let rows = vec![vec![
        format!("{:.4}", exact),
        format!("{:.4}", type_scores.f1),
        format!("{:.4}", report.metrics.get("click_type_weighted_f1").copied().unwrap_or(0.0)),
        format!("{:.4}", outcome_scores.f1),
    ]];
    run.write_json("report_actions.json", &report)?;
    run.write_text(
        "table_actions.csv",
        &csv_text(
            &["action_gen_accuracy", "action_type_macro_f1", "click_type_weighted_f1", "session_outcome_weighted_f1"],
            &rows,
        ),
    )?;
    println!("eval actions: exact-match accuracy {exact:.4}");
    run.finish()
}

fn eval_judge_prompts(config: &RunConfig, inputs: &EvalInputs) -> Result<()> {
    let kind = match inputs.kind.as_deref() {
        Some("human_likeness") | None => JudgeKind::HumanLikeness,
        Some("consistency") => JudgeKind::Consistency,
        Some("context_consistency") => JudgeKind::ContextConsistency,
        Some(other) => bail!("unknown judge kind: {other}"),
    };
    let mut run = RunDir::create(&config.output_dir, config.seed(), &config.resolved_toml())?;
    let trajectory_path = run.path("trajectories.jsonl");
    if !trajectory_path.exists() {
        bail!("trajectories.jsonl not found in {}; run `simulate` first", config.output_dir.display());
    }
    let trajectories = core_io::read_trajectory_log(&trajectory_path)?;
    let personas: Vec<Persona> = if personas_path(config).exists() {
        core_io::read_jsonl(&personas_path(config))?
    } else {
        Vec::new()
    };
    let persona_by_id: BTreeMap<&str, &Persona> =
        personas.iter().map(|p| (p.agent_id.as_str(), p)).collect();

    // Ground-truth context descriptions for the context_consistency kind:
    // line-JSON {agent_id, ground_truth}; absent entries get a placeholder.
    #[derive(Deserialize)]
    struct GroundTruthLine {
        agent_id: String,
        ground_truth: String,
    }
    let ground_truth: BTreeMap<String, String> = match &inputs.truth {
        Some(path) => core_io::read_jsonl::<GroundTruthLine>(path)?
            .into_iter()
            .map(|l| (l.agent_id, l.ground_truth))
            .collect(),
        None => BTreeMap::new(),
    };

    let file_name = format!("judge_{}.jsonl", kind.label());
    let count = match kind {
        JudgeKind::HumanLikeness => {
            let samples: Vec<JudgeSample<'_>> =
                trajectories.iter().map(JudgeSample::Trajectory).collect();
            emit_judge_prompts(&samples, kind, &run.path(&file_name))?
        }
        JudgeKind::Consistency => {
            let mut samples = Vec::new();
            for trajectory in &trajectories {
                let Some(persona) = persona_by_id.get(trajectory.agent_id.as_str()) else {
                    continue;
                };
                for step in &trajectory.steps {
                    if !step.thought.is_empty() {
                        samples.push(JudgeSample::Rationale {
                            persona,
                            observation: &step.state_digest,
                            rationale: &step.thought,
                        });
                    }
                }
            }
            emit_judge_prompts(&samples, kind, &run.path(&file_name))?
        }
        JudgeKind::ContextConsistency => {
            let contexts: Vec<(Option<&Persona>, String, String)> = trajectories
                .iter()
                .map(|t| {
                    let simulated = contextsim_core::domain::context_text(
                        &t.context,
                        &FactorMask::all(),
                    );
                    let truth = ground_truth
                        .get(&t.agent_id)
                        .cloned()
                        .unwrap_or_else(|| "(no survey answer provided)".into());
                    (persona_by_id.get(t.agent_id.as_str()).copied(), simulated, truth)
                })
                .collect();
            let samples: Vec<JudgeSample<'_>> = contexts
                .iter()
                .filter_map(|(persona, simulated, truth)| {
                    persona.map(|p| JudgeSample::Context {
                        persona: p,
                        simulated,
                        ground_truth: truth,
                    })
                })
                .collect();
            emit_judge_prompts(&samples, kind, &run.path(&file_name))?
        }
    };
    run.record(&file_name)?;
    println!("eval judge-prompts: {count} prompts → {file_name}");
    run.finish()
}

pub fn cmd_report(config: &RunConfig) -> Result<()> {
    let mut run = RunDir::create(&config.output_dir, config.seed(), &config.resolved_toml())?;
    let mut merged: BTreeMap<String, serde_json::Value> = BTreeMap::new();
    let entries = std::fs::read_dir(&config.output_dir)
        .with_context(|| format!("reading {}", config.output_dir.display()))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().to_string())
        .filter(|n| n.starts_with("report_") && n.ends_with(".json") && n != "report_merged.json")
        .collect();
    names.sort();
    for name in &names {
        let text = std::fs::read_to_string(config.output_dir.join(name))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        merged.insert(name.trim_end_matches(".json").trim_start_matches("report_").to_string(), value);
    }
    run.write_json("report_merged.json", &merged)?;
    println!("report: merged {} reports", names.len());
    run.finish()
}
