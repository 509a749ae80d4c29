//! Experiment configuration: a JSON document parsed into a validated,
//! fully resolved [`ExperimentConfig`].
//!
//! Resolution fills every default and normalizes vetting periods, so the
//! serialized form of a parsed config names every parameter that affects the
//! results and parses back to an equal value.

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use skill_luck::aggregator::AggregatorConfig;
use skill_luck::gbm::{DayCount, VettingPeriod};
use skill_luck::growth::{GibratConfig, SimonConfig, DEFAULT_TAIL_FRACTION};
use skill_luck::population::{FactorSpec, LognormalMoments, PopulationSpec, Preset};
use skill_luck::vetting::{AllocationMetric, PopulationReuse, RankingStatistic, SweepOptions, DECILES};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    /// Dotted key path of the offending value, `config` for the whole document.
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl ToString) -> Self {
        Self {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Attaches a core validation error under `prefix`, extending the path
    /// with the offending field when the error names one.
    fn from_core(prefix: &str, err: skill_luck::Error) -> Self {
        match err {
            skill_luck::Error::Domain { what, detail } if is_key(what) => Self::new(format!("{prefix}.{what}"), detail),
            other => Self::new(prefix, other),
        }
    }
}

fn is_key(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; repetition `r` runs with `seed + r` (wrapping).
    pub seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub experiment: Experiment,
}

fn default_repetitions() -> u32 {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("skill-luck-out")
}

impl ExperimentConfig {
    pub fn repetition_seeds(&self) -> Vec<u64> {
        (0..self.repetitions)
            .map(|r| self.seed.wrapping_add(r as u64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    VettingSweep(VettingSweepConfig),
    SharpeStudy(SharpeStudyConfig),
    GrowthSimon(SimonExperiment),
    GrowthGibrat(GibratExperiment),
    Aggregator(AggregatorConfig),
    CharacteristicTime(CharacteristicTimeConfig),
    Shockley(ShockleyConfig),
}

impl Experiment {
    pub const KINDS: [&'static str; 7] = [
        "vetting-sweep",
        "sharpe-study",
        "growth-simon",
        "growth-gibrat",
        "aggregator",
        "characteristic-time",
        "shockley",
    ];

    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::VettingSweep(_) => "vetting-sweep",
            Experiment::SharpeStudy(_) => "sharpe-study",
            Experiment::GrowthSimon(_) => "growth-simon",
            Experiment::GrowthGibrat(_) => "growth-gibrat",
            Experiment::Aggregator(_) => "aggregator",
            Experiment::CharacteristicTime(_) => "characteristic-time",
            Experiment::Shockley(_) => "shockley",
        }
    }
}

/// A named preset, explicit moments, or a preset with some fields overridden.
/// Always serialized with every field filled in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PopulationFields", into = "PopulationFields")]
pub struct PopulationConfig {
    pub preset: Option<Preset>,
    pub spec: PopulationSpec,
}

impl PopulationConfig {
    pub fn preset(preset: Preset) -> Self {
        Self {
            preset: Some(preset),
            spec: preset.spec(Preset::DEFAULT_AGENTS),
        }
    }

    /// The preset name, or `custom`.
    pub fn label(&self) -> &'static str {
        self.preset.map_or("custom", Preset::name)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PopulationFields {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preset: Option<Preset>,
    #[serde(default)]
    skill: Option<LognormalMoments>,
    #[serde(default)]
    luck: Option<LognormalMoments>,
    #[serde(default)]
    n_agents: Option<usize>,
}

impl TryFrom<PopulationFields> for PopulationConfig {
    type Error = String;

    fn try_from(f: PopulationFields) -> Result<Self, String> {
        let n_agents = f.n_agents.unwrap_or(Preset::DEFAULT_AGENTS);
        let base = f.preset.map(|p| p.spec(n_agents));
        let pick = |own: Option<LognormalMoments>, from_preset: Option<LognormalMoments>, key: &str| {
            own.or(from_preset)
                .ok_or_else(|| format!("`{key}` is required when no preset is named"))
        };
        let skill = pick(f.skill, base.map(|b| b.skill), "skill")?;
        let luck = pick(f.luck, base.map(|b| b.luck), "luck")?;
        Ok(Self {
            preset: f.preset,
            spec: PopulationSpec { skill, luck, n_agents },
        })
    }
}

impl From<PopulationConfig> for PopulationFields {
    fn from(p: PopulationConfig) -> Self {
        Self {
            preset: p.preset,
            skill: Some(p.spec.skill),
            luck: Some(p.spec.luck),
            n_agents: Some(p.spec.n_agents),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VettingSweepConfig {
    pub population: PopulationConfig,
    /// Period codes (`1D`..`4Y`) or `<years>Y`.
    #[serde(default = "standard_periods")]
    pub periods: Vec<String>,
    #[serde(default = "raw_outcome")]
    pub statistic: RankingStatistic,
    #[serde(default)]
    pub allocation: AllocationMetric,
    #[serde(default)]
    pub population_reuse: PopulationReuse,
    #[serde(default)]
    pub day_count: DayCount,
}

fn standard_periods() -> Vec<String> {
    VettingPeriod::standard_grid(&DayCount::default())
        .iter()
        .map(ToString::to_string)
        .collect()
}

fn raw_outcome() -> RankingStatistic {
    RankingStatistic::RawOutcome
}

impl VettingSweepConfig {
    pub fn vetting_periods(&self) -> Result<Vec<VettingPeriod>, ConfigError> {
        parse_periods("experiment.periods", &self.periods, &self.day_count)
    }

    pub fn options(&self) -> SweepOptions {
        SweepOptions {
            allocation: self.allocation,
            population: self.population_reuse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharpeStudyConfig {
    pub population: PopulationConfig,
    #[serde(default = "one_year")]
    pub period: String,
    #[serde(default = "default_n_obs_list")]
    pub n_obs_list: Vec<usize>,
    #[serde(default)]
    pub day_count: DayCount,
}

fn one_year() -> String {
    "1Y".into()
}

fn default_n_obs_list() -> Vec<usize> {
    vec![2, 4, 8, 16, 32, 64, 128, 256]
}

impl SharpeStudyConfig {
    pub fn vetting_period(&self) -> Result<VettingPeriod, ConfigError> {
        VettingPeriod::parse_with(&self.period, &self.day_count).map_err(|e| ConfigError::new("experiment.period", e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimonExperiment {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_simon_steps")]
    pub n_steps: usize,
    /// Fraction of the largest sizes used by the tail estimate.
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
}

fn default_alpha() -> f64 {
    0.1
}

fn default_simon_steps() -> usize {
    1_000_000
}

fn default_tail_fraction() -> f64 {
    DEFAULT_TAIL_FRACTION
}

impl SimonExperiment {
    pub fn model(&self) -> SimonConfig {
        SimonConfig {
            alpha: self.alpha,
            n_steps: self.n_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibratExperiment {
    #[serde(default = "default_gibrat_agents")]
    pub n_agents: usize,
    #[serde(default = "default_gibrat_steps")]
    pub n_steps: usize,
    #[serde(default = "default_growth_shock")]
    pub growth_shock: LognormalMoments,
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
}

fn default_gibrat_agents() -> usize {
    10_000
}

fn default_gibrat_steps() -> usize {
    100
}

fn default_growth_shock() -> LognormalMoments {
    LognormalMoments::new(1.0, 0.1)
}

impl GibratExperiment {
    pub fn model(&self) -> GibratConfig {
        GibratConfig {
            n_agents: self.n_agents,
            n_steps: self.n_steps,
            growth_shock: self.growth_shock,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicTimeConfig {
    pub mu: f64,
    pub sigma: f64,
}

/// Deterministic amplification of `n_factors` equal multipliers, plus
/// optional lognormal samples of the product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockleyConfig {
    #[serde(default = "default_factors")]
    pub n_factors: usize,
    #[serde(default = "default_multiplier")]
    pub factor_multiplier: f64,
    #[serde(default = "default_per_factor")]
    pub per_factor: LognormalMoments,
    /// Sampled products per repetition; zero skips sampling.
    #[serde(default)]
    pub n_samples: usize,
}

fn default_factors() -> usize {
    10
}

fn default_multiplier() -> f64 {
    1.5
}

fn default_per_factor() -> LognormalMoments {
    LognormalMoments::new(1.0, 0.5)
}

impl ShockleyConfig {
    pub fn factor_spec(&self) -> FactorSpec {
        FactorSpec {
            n_factors: self.n_factors,
            per_factor: self.per_factor,
        }
    }
}

/// Command-line values that take precedence over the document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    /// Experiment kind implied by a subcommand. Filled in when the document
    /// has none, rejected when it names another.
    pub kind: Option<&'static str>,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_with(text, &Overrides::default())
}

pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::new("config", e))?;
    config_from_value(value, overrides)
}

pub fn config_from_value(mut value: Value, overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let root = value
        .as_object_mut()
        .ok_or_else(|| ConfigError::new("config", "expected a JSON object"))?;
    if let Some(seed) = overrides.seed {
        root.insert("seed".into(), seed.into());
    }
    if let Some(out) = &overrides.output {
        root.insert("output".into(), out.to_string_lossy().into_owned().into());
    }
    if let Some(kind) = overrides.kind {
        let experiment = root
            .entry("experiment")
            .or_insert_with(|| Value::Object(Default::default()))
            .as_object_mut()
            .ok_or_else(|| ConfigError::new("experiment", "expected a JSON object"))?;
        match experiment.get("kind") {
            None => {
                experiment.insert("kind".into(), kind.into());
            }
            Some(Value::String(k)) if k == kind => {}
            Some(other) => {
                return Err(ConfigError::new(
                    "experiment.kind",
                    format!("config names {other} but the subcommand is {kind:?}"),
                ))
            }
        }
    }
    let config: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "config".to_string() } else { path };
        ConfigError::new(path, e.into_inner())
    })?;
    resolve(config)
}

fn resolve(mut config: ExperimentConfig) -> Result<ExperimentConfig, ConfigError> {
    if config.repetitions == 0 {
        return Err(ConfigError::new("repetitions", "at least one repetition is required"));
    }
    let core = |prefix: &str| {
        let prefix = prefix.to_string();
        move |e| ConfigError::from_core(&prefix, e)
    };
    match &mut config.experiment {
        Experiment::VettingSweep(c) => {
            check_population(&c.population)?;
            c.day_count.validate().map_err(core("experiment.day_count"))?;
            c.statistic.validate().map_err(core("experiment.statistic"))?;
            c.allocation.validate().map_err(core("experiment.allocation"))?;
            let periods = c.vetting_periods()?;
            if periods.is_empty() {
                return Err(ConfigError::new(
                    "experiment.periods",
                    "at least one vetting period is required",
                ));
            }
            let mut seen = HashSet::new();
            if let Some(dup) = periods.iter().find(|p| !seen.insert(p.years.to_bits())) {
                return Err(ConfigError::new("experiment.periods", format!("{dup} is listed twice")));
            }
            c.periods = periods.iter().map(ToString::to_string).collect();
        }
        Experiment::SharpeStudy(c) => {
            check_population(&c.population)?;
            c.day_count.validate().map_err(core("experiment.day_count"))?;
            c.period = c.vetting_period()?.to_string();
            if c.n_obs_list.is_empty() {
                return Err(ConfigError::new(
                    "experiment.n_obs_list",
                    "at least one observation count is required",
                ));
            }
            for &n_obs in &c.n_obs_list {
                RankingStatistic::RealizedSharpe { n_obs }
                    .validate()
                    .map_err(core("experiment.n_obs_list"))?;
            }
            let mut seen = HashSet::new();
            if let Some(dup) = c.n_obs_list.iter().find(|n| !seen.insert(**n)) {
                return Err(ConfigError::new(
                    "experiment.n_obs_list",
                    format!("{dup} is listed twice"),
                ));
            }
        }
        Experiment::GrowthSimon(c) => {
            c.model().validate().map_err(core("experiment"))?;
            check_tail_fraction(c.tail_fraction)?;
        }
        Experiment::GrowthGibrat(c) => {
            c.model().validate().map_err(core("experiment.growth_shock"))?;
            check_tail_fraction(c.tail_fraction)?;
        }
        Experiment::Aggregator(c) => c.validate().map_err(core("experiment"))?,
        Experiment::CharacteristicTime(c) => {
            skill_luck::gbm::characteristic_time(c.mu, c.sigma).map_err(core("experiment"))?;
        }
        Experiment::Shockley(c) => {
            if c.n_factors == 0 {
                return Err(ConfigError::new(
                    "experiment.n_factors",
                    "at least one factor is required",
                ));
            }
            if !(c.factor_multiplier > 0.0 && c.factor_multiplier.is_finite()) {
                return Err(ConfigError::new(
                    "experiment.factor_multiplier",
                    format!("{} is not a positive number", c.factor_multiplier),
                ));
            }
            c.factor_spec().validate().map_err(core("experiment.per_factor"))?;
        }
    }
    Ok(config)
}

fn check_population(p: &PopulationConfig) -> Result<(), ConfigError> {
    p.spec
        .validate()
        .map_err(|e| ConfigError::from_core("experiment.population", e))?;
    if p.spec.n_agents < DECILES {
        return Err(ConfigError::new(
            "experiment.population.n_agents",
            format!("{} agents cannot fill {DECILES} deciles", p.spec.n_agents),
        ));
    }
    Ok(())
}

fn check_tail_fraction(f: f64) -> Result<(), ConfigError> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(ConfigError::new(
            "experiment.tail_fraction",
            format!("{f} is outside (0, 1)"),
        ))
    }
}

fn parse_periods(path: &str, codes: &[String], days: &DayCount) -> Result<Vec<VettingPeriod>, ConfigError> {
    codes
        .iter()
        .enumerate()
        .map(|(i, s)| VettingPeriod::parse_with(s, days).map_err(|e| ConfigError::new(format!("{path}[{i}]"), e)))
        .collect()
}
