//! Experiment configuration: one JSON document per batch.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fmd_core::dynamics::DEFAULT_MAX_ITERS;
use fmd_core::{
    derive_privacy_loss, standard_inits, AltruismModel, AltruismSpec, AltruistAssignment, CommGraph,
    GameParams, InitSpec, Rate, SearchOptions, StrategyLadder,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Derive {
    Derive,
}

/// Privacy loss `L`: a number or `"derive"` (messages minus largest inbox plus one).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PrivacyLoss {
    Fixed(f64),
    Derived(Derive),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    #[serde(default = "derived_loss")]
    pub privacy_loss: PrivacyLoss,
    #[serde(default = "unit")]
    pub bandwidth_cost: f64,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            privacy_loss: derived_loss(),
            bandwidth_cost: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AltruismConfig {
    pub model: AltruismModel,
    #[serde(default = "no_altruists")]
    pub assignment: AltruistAssignment,
}

impl Default for AltruismConfig {
    fn default() -> Self {
        Self {
            model: AltruismModel::Selfish,
            assignment: no_altruists(),
        }
    }
}

impl AltruismConfig {
    /// Largest constant handed out by the assignment rule.
    pub fn a(&self) -> f64 {
        if self.model == AltruismModel::Selfish {
            return 0.0;
        }
        match self.assignment {
            AltruistAssignment::All { a }
            | AltruistAssignment::RandomK { a, .. }
            | AltruistAssignment::TopKByMetric { a, .. } => a,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Nash,
    Social,
    UniformSweep,
}

impl ObjectiveKind {
    pub fn label(self) -> &'static str {
        match self {
            ObjectiveKind::Nash => "nash",
            ObjectiveKind::Social => "social",
            ObjectiveKind::UniformSweep => "uniform_sweep",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitPreset {
    Standard,
}

/// Either the `"standard"` batch or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitList {
    Preset(InitPreset),
    List(Vec<InitSpec>),
}

impl Default for InitList {
    fn default() -> Self {
        InitList::Preset(InitPreset::Standard)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// File path, or `message` / `mail` to use the download cache.
    pub dataset: String,
    #[serde(default = "yes")]
    pub halve: bool,
    #[serde(default)]
    pub game: GameConfig,
    #[serde(default)]
    pub altruism: AltruismConfig,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub relative_epsilon: bool,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "standard_ladder")]
    pub ladder: Vec<Rate>,
    #[serde(default)]
    pub inits: InitList,
    #[serde(default = "default_objectives")]
    pub objectives: Vec<ObjectiveKind>,
    /// Extra `random_<seed>` inits appended to the batch.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "one")]
    pub trace_thinning: usize,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

fn derived_loss() -> PrivacyLoss {
    PrivacyLoss::Derived(Derive::Derive)
}

fn no_altruists() -> AltruistAssignment {
    AltruistAssignment::All { a: 0.0 }
}

fn default_epsilon() -> f64 {
    fmd_core::dynamics::DEFAULT_EPSILON
}

fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

fn standard_ladder() -> Vec<Rate> {
    StrategyLadder::standard().levels().to_vec()
}

fn default_objectives() -> Vec<ObjectiveKind> {
    vec![ObjectiveKind::Nash]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    /// Defaults for everything but the dataset.
    pub fn for_dataset(dataset: impl Into<String>) -> Self {
        serde_json::from_value(serde_json::json!({ "dataset": dataset.into() }))
            .expect("defaults deserialize")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            bail!("epsilon must be > 0, got {}", self.epsilon);
        }
        if let PrivacyLoss::Fixed(l) = self.game.privacy_loss {
            if !(l > 0.0 && l.is_finite()) {
                bail!("privacy_loss must be > 0, got {l}");
            }
        }
        if !(self.game.bandwidth_cost > 0.0 && self.game.bandwidth_cost.is_finite()) {
            bail!("bandwidth_cost must be > 0, got {}", self.game.bandwidth_cost);
        }
        if self.objectives.is_empty() {
            bail!("no objectives given");
        }
        let searches = self.objectives.iter().any(|o| *o != ObjectiveKind::UniformSweep);
        if searches && self.init_specs().is_empty() {
            bail!("nash and social objectives need at least one init");
        }
        let a = self.altruism.a();
        if !(a >= 0.0 && a.is_finite()) {
            bail!("altruism constant must be finite and >= 0, got {a}");
        }
        self.ladder()?;
        Ok(())
    }

    pub fn ladder(&self) -> Result<StrategyLadder> {
        Ok(StrategyLadder::new(self.ladder.clone())?)
    }

    /// Configured inits plus one random init per extra seed, without duplicates.
    pub fn init_specs(&self) -> Vec<InitSpec> {
        let mut out = match &self.inits {
            InitList::Preset(InitPreset::Standard) => standard_inits(),
            InitList::List(list) => list.clone(),
        };
        for &seed in &self.seeds {
            let spec = InitSpec::Random { seed };
            if !out.contains(&spec) {
                out.push(spec);
            }
        }
        out
    }

    pub fn objectives(&self) -> Vec<ObjectiveKind> {
        let mut out = Vec::new();
        for &o in &self.objectives {
            if !out.contains(&o) {
                out.push(o);
            }
        }
        out
    }

    pub fn privacy_loss(&self, g: &CommGraph) -> f64 {
        match self.game.privacy_loss {
            PrivacyLoss::Fixed(l) => l,
            PrivacyLoss::Derived(_) => derive_privacy_loss(g),
        }
    }

    pub fn game_params(&self, g: &CommGraph) -> Result<GameParams> {
        let altruism = AltruismSpec::resolve(self.altruism.model, &self.altruism.assignment, g)?;
        Ok(GameParams::new(
            self.privacy_loss(g),
            self.game.bandwidth_cost,
            self.ladder()?,
            altruism,
        )?)
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            epsilon: self.epsilon,
            max_iters: self.max_iters,
            trace_thinning: self.trace_thinning,
            relative_epsilon: self.relative_epsilon,
            ..SearchOptions::default()
        }
    }
}
