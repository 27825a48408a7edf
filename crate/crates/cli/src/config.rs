//! Run configuration: a TOML file with CLI-flag overrides
//! (precedence: flags > file > defaults). The resolved config is snapshotted
//! into every run's output directory.

use anyhow::{bail, Context, Result};
use contextsim_core::agent::{AgentConfig, Variant};
use contextsim_core::backend::{
    Backend, ClassifyMode, HttpBackend, HttpConfig, ScriptedBackend,
};
use contextsim_core::domain::{DomainMode, FactorMask};
use contextsim_core::env::MfParams;
use contextsim_core::lifesim::{EngagementParams, TemplateLibrary};
use contextsim_core::runner::SimOptions;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    /// 0 = available parallelism.
    pub workers: usize,
    pub dataset: DatasetConfig,
    pub backend: BackendConfig,
    pub simulation: SimulationConfig,
    pub mf: MfParams,
    pub personas: PersonaConfig,
    pub engagement: EngagementParams,
    pub experiments: ExperimentsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            output_dir: PathBuf::from("run"),
            workers: 0,
            dataset: DatasetConfig::default(),
            backend: BackendConfig::default(),
            simulation: SimulationConfig::default(),
            mf: MfParams::default(),
            personas: PersonaConfig::default(),
            engagement: EngagementParams::default(),
            experiments: ExperimentsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub interactions: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub demographics: Option<PathBuf>,
    pub delimiter: String,
    pub min_interactions: usize,
    pub split: (f64, f64, f64),
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            interactions: None,
            catalog: None,
            demographics: None,
            delimiter: "::".into(),
            min_interactions: 20,
            split: (0.8, 0.1, 0.1),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    /// "scripted" or "http".
    pub kind: String,
    /// "membership" or "overlap" (scripted CLASSIFY rule).
    pub classify_mode: String,
    pub http: HttpConfig,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self { kind: "scripted".into(), classify_mode: "membership".into(), http: HttpConfig::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub agents: usize,
    /// "sim" or "sum".
    pub variant: String,
    pub days: u32,
    pub sessions_per_agent: u32,
    pub summary_days: u32,
    pub max_steps_per_session: u32,
    pub page_size: usize,
    /// random | popularity | mf | external.
    pub strategy: String,
    pub external_rankings: Option<PathBuf>,
    pub thought_mode: bool,
    pub context_factors: Vec<String>,
    pub no_lifesim: bool,
    pub uniform_engagements_per_day: f64,
    /// "recommendation" or "webshop".
    pub mode: String,
    pub item_type: String,
    /// Override the embedded schedule template library.
    pub templates: Option<PathBuf>,
    /// Write generated schedules to schedules.jsonl for audit.
    pub export_schedules: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            agents: 50,
            variant: "sim".into(),
            days: 7,
            sessions_per_agent: 3,
            summary_days: 30,
            max_steps_per_session: 20,
            page_size: 10,
            strategy: "popularity".into(),
            external_rankings: None,
            thought_mode: true,
            context_factors: vec![
                "c_t".into(),
                "c_l".into(),
                "c_s".into(),
                "c_g".into(),
                "c_b".into(),
            ],
            no_lifesim: false,
            uniform_engagements_per_day: 3.0,
            mode: "recommendation".into(),
            item_type: "movie".into(),
            templates: None,
            export_schedules: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersonaConfig {
    pub candidates: usize,
}

impl Default for PersonaConfig {
    fn default() -> Self {
        Self { candidates: 5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentsConfig {
    pub alignment_ratios: Vec<usize>,
    pub items_per_agent: usize,
    pub matthew_target: Option<String>,
    pub matthew_boost_rounds: u32,
    pub matthew_rounds: u32,
    pub matthew_seeds: u64,
    pub brand_fictitious: String,
    pub ab_strategies: Vec<String>,
    pub ablation_toggles: Vec<String>,
}

impl Default for ExperimentsConfig {
    fn default() -> Self {
        Self {
            alignment_ratios: vec![1, 3, 9],
            items_per_agent: 20,
            matthew_target: None,
            matthew_boost_rounds: 2,
            matthew_rounds: 10,
            matthew_seeds: 20,
            brand_fictitious: "Neutrovia".into(),
            ab_strategies: vec!["random".into(), "popularity".into(), "mf".into()],
            ablation_toggles: vec!["no_lifesim".into(), "no_thoughts".into()],
        }
    }
}

/// Flag-level overrides (precedence over the file).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub backend: Option<String>,
    pub strategy: Option<String>,
    pub agents: Option<usize>,
    pub variant: Option<String>,
    pub delimiter: Option<String>,
    pub interactions: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = overrides.seed {
            config.seed = Some(seed);
        }
        if let Some(output_dir) = &overrides.output_dir {
            config.output_dir = output_dir.clone();
        }
        if let Some(workers) = overrides.workers {
            config.workers = workers;
        }
        if let Some(backend) = &overrides.backend {
            config.backend.kind = backend.clone();
        }
        if let Some(strategy) = &overrides.strategy {
            config.simulation.strategy = strategy.clone();
        }
        if let Some(agents) = overrides.agents {
            config.simulation.agents = agents;
        }
        if let Some(variant) = &overrides.variant {
            config.simulation.variant = variant.clone();
        }
        if let Some(delimiter) = &overrides.delimiter {
            config.dataset.delimiter = delimiter.clone();
        }
        if let Some(interactions) = &overrides.interactions {
            config.dataset.interactions = Some(interactions.clone());
        }
        if let Some(catalog) = &overrides.catalog {
            config.dataset.catalog = Some(catalog.clone());
        }
        config.validate()?;
        Ok(config)
    }

    /// Seed is mandatory; referenced paths must exist at load.
    pub fn validate(&self) -> Result<()> {
        if self.seed.is_none() {
            bail!("seed is mandatory: set `seed` in the config file or pass --seed");
        }
        for (name, path) in [
            ("dataset.interactions", &self.dataset.interactions),
            ("dataset.catalog", &self.dataset.catalog),
            ("dataset.demographics", &self.dataset.demographics),
            ("simulation.external_rankings", &self.simulation.external_rankings),
            ("simulation.templates", &self.simulation.templates),
        ] {
            if let Some(path) = path {
                if !path.exists() {
                    bail!("{name} path does not exist: {}", path.display());
                }
            }
        }
        match self.backend.kind.as_str() {
            "scripted" | "http" => {}
            other => bail!("unknown backend kind: {other}"),
        }
        match self.simulation.variant.as_str() {
            "sim" | "sum" => {}
            other => bail!("unknown variant: {other}"),
        }
        if self.simulation.max_steps_per_session < 1 {
            bail!("simulation.max_steps_per_session must be ≥ 1");
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated")
    }

    pub fn factor_mask(&self) -> FactorMask {
        FactorMask::from_labels(&self.simulation.context_factors)
    }

    pub fn domain_mode(&self) -> DomainMode {
        if self.simulation.mode == "webshop" {
            DomainMode::Webshop
        } else {
            DomainMode::Recommendation
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            variant: if self.simulation.variant == "sum" { Variant::Sum } else { Variant::Sim },
            max_steps_per_session: self.simulation.max_steps_per_session,
            context_factor_mask: self.factor_mask(),
            thought_mode: self.simulation.thought_mode,
        }
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            days: self.simulation.days,
            sessions_per_agent: self.simulation.sessions_per_agent,
            summary_days: self.simulation.summary_days,
            page_size: self.simulation.page_size,
            seed: self.seed(),
            mode: self.domain_mode(),
            no_lifesim: self.simulation.no_lifesim,
            uniform_engagements_per_day: self.simulation.uniform_engagements_per_day,
            export_schedules: self.simulation.export_schedules,
            agent: self.agent_config(),
            engagement: self.engagement.clone(),
        }
    }

    pub fn templates(&self) -> Result<TemplateLibrary> {
        match &self.simulation.templates {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading templates {}", path.display()))?;
                TemplateLibrary::from_json(&text)
                    .with_context(|| format!("parsing templates {}", path.display()))
            }
            None => Ok(TemplateLibrary::default()),
        }
    }

    pub fn make_backend(&self) -> Result<Box<dyn Backend>> {
        match self.backend.kind.as_str() {
            "scripted" => {
                let classify_mode = match self.backend.classify_mode.as_str() {
                    "overlap" => ClassifyMode::OverlapConservative,
                    _ => ClassifyMode::Membership,
                };
                Ok(Box::new(ScriptedBackend::new(self.templates()?, classify_mode)))
            }
            "http" => {
                let backend = HttpBackend::from_env(self.backend.http.clone())
                    .map_err(|e| anyhow::anyhow!("http backend: {e}"))?;
                Ok(Box::new(backend))
            }
            other => bail!("unknown backend kind: {other}"),
        }
    }

    pub fn resolved_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
