//! Decile vetting studies.
//!
//! A population is sampled, every agent's success is simulated over a vetting
//! period, agents are ranked on an observable statistic (raw outcome, or the
//! realized Sharpe ratio of intermediate observations) and split into deciles.
//! The reported per-decile skill and luck use the true, unobservable `(μ, σ)`:
//! skill is the arithmetic mean of `μ`, luck the root mean square of `σ`, and
//! the Sharpe ratio their quotient.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbm::{estimate_realized_stats, simulate_path, terminal_log_outcome, VettingPeriod};
use crate::population::{sample_population_in_slot, Agent, PopulationSpec};
use crate::stats::{Domain, RngStream};

pub const DECILES: usize = 10;

/// The observable used to rank agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "StatisticFields")]
pub enum RankingStatistic {
    /// Terminal log-outcome, one observation.
    RawOutcome,
    /// Realized Sharpe ratio from `n_obs ≥ 2` intermediate observations.
    RealizedSharpe { n_obs: usize },
}

impl RankingStatistic {
    pub fn n_obs(&self) -> usize {
        match self {
            RankingStatistic::RawOutcome => 1,
            RankingStatistic::RealizedSharpe { n_obs } => *n_obs,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RankingStatistic::RawOutcome => "raw_outcome",
            RankingStatistic::RealizedSharpe { .. } => "realized_sharpe",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RankingStatistic::RealizedSharpe { n_obs } if *n_obs < 2 => {
                Err(Error::InsufficientObservations { needed: 2, got: *n_obs })
            }
            RankingStatistic::RealizedSharpe { n_obs } if *n_obs > u32::MAX as usize => Err(Error::domain(
                "n_obs",
                format!("{n_obs} observations per path is too many"),
            )),
            _ => Ok(()),
        }
    }
}

// Internally tagged unit variants accept stray keys, so both tagged enums
// below deserialize through a strict flat form instead.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StatisticFields {
    kind: String,
    #[serde(default)]
    n_obs: Option<usize>,
}

impl TryFrom<StatisticFields> for RankingStatistic {
    type Error = String;

    fn try_from(f: StatisticFields) -> std::result::Result<Self, String> {
        match (f.kind.as_str(), f.n_obs) {
            ("raw_outcome", None) => Ok(RankingStatistic::RawOutcome),
            ("raw_outcome", Some(_)) => Err("raw_outcome takes no `n_obs`".into()),
            ("realized_sharpe", Some(n_obs)) => Ok(RankingStatistic::RealizedSharpe { n_obs }),
            ("realized_sharpe", None) => Err("realized_sharpe needs `n_obs`".into()),
            (other, _) => Err(format!(
                "unknown variant `{other}`, expected `raw_outcome` or `realized_sharpe`"
            )),
        }
    }
}

/// Assigns each value a 1-based group: the largest values go to group 1.
///
/// Ties keep original index order. With `n = q·g + r` values the first `r`
/// groups hold `q + 1` members and the rest `q`.
pub fn rank_and_decile(values: &[f64], n_groups: usize) -> Result<Vec<usize>> {
    if n_groups == 0 {
        return Err(Error::domain("n_groups", "at least one group is required"));
    }
    if values.len() < n_groups {
        return Err(Error::InsufficientData(format!(
            "{} values cannot fill {n_groups} groups",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| v.is_nan()) {
        return Err(Error::domain("ranking values", format!("{v} cannot be ranked")));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable: equal values stay in index order
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let (base, extra) = (values.len() / n_groups, values.len() % n_groups);
    let mut groups = vec![0; values.len()];
    let mut cursor = 0;
    for group in 0..n_groups {
        let size = base + usize::from(group < extra);
        for &idx in &order[cursor..cursor + size] {
            groups[idx] = group + 1;
        }
        cursor += size;
    }
    Ok(groups)
}

/// Skill, luck and Sharpe ratio of a set of agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub mean_skill: f64,
    pub rms_luck: f64,
    pub sharpe: f64,
}

impl GroupStats {
    fn of<'a>(agents: impl Iterator<Item = &'a Agent>) -> (Self, usize) {
        let (mut n, mut skill, mut luck_sq) = (0usize, 0.0, 0.0);
        for a in agents {
            n += 1;
            skill += a.mu;
            luck_sq += a.sigma * a.sigma;
        }
        let mean_skill = skill / n as f64;
        let rms_luck = (luck_sq / n as f64).sqrt();
        (
            Self {
                mean_skill,
                rms_luck,
                sharpe: sharpe_of(mean_skill, rms_luck),
            },
            n,
        )
    }
}

fn sharpe_of(skill: f64, luck: f64) -> f64 {
    if luck > 0.0 {
        skill / luck
    } else {
        f64::INFINITY.copysign(skill)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecileRecord {
    /// 1 is the most successful group.
    pub decile: usize,
    pub mean_skill: f64,
    pub rms_luck: f64,
    pub sharpe: f64,
    pub n_agents: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecileTable {
    pub per_decile: Vec<DecileRecord>,
    pub population_benchmark: GroupStats,
}

/// Per-group statistics for a group assignment as produced by [`rank_and_decile`].
pub fn decile_stats(agents: &[Agent], assignment: &[usize]) -> Result<DecileTable> {
    if agents.len() != assignment.len() {
        return Err(Error::LengthMismatch {
            left: agents.len(),
            right: assignment.len(),
        });
    }
    if agents.is_empty() {
        return Err(Error::InsufficientData("no agents".into()));
    }
    let n_groups = *assignment.iter().max().expect("non-empty");
    if assignment.contains(&0) {
        return Err(Error::domain("assignment", "groups are numbered from 1"));
    }
    let mut members: Vec<Vec<&Agent>> = vec![Vec::new(); n_groups];
    for (agent, &g) in agents.iter().zip(assignment) {
        members[g - 1].push(agent);
    }
    let per_decile = members
        .iter()
        .enumerate()
        .map(|(i, group)| {
            if group.is_empty() {
                return Err(Error::InsufficientData(format!("group {} is empty", i + 1)));
            }
            let (stats, n_agents) = GroupStats::of(group.iter().copied());
            Ok(DecileRecord {
                decile: i + 1,
                mean_skill: stats.mean_skill,
                rms_luck: stats.rms_luck,
                sharpe: stats.sharpe,
                n_agents,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (population_benchmark, _) = GroupStats::of(agents.iter());
    Ok(DecileTable {
        per_decile,
        population_benchmark,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecileReport {
    pub vetting: VettingPeriod,
    pub statistic: RankingStatistic,
    pub per_decile: Vec<DecileRecord>,
    pub population_benchmark: GroupStats,
}

impl DecileReport {
    pub fn sharpe_by_decile(&self) -> Vec<f64> {
        self.per_decile.iter().map(|d| d.sharpe).collect()
    }

    pub fn mean_skill_by_decile(&self) -> Vec<f64> {
        self.per_decile.iter().map(|d| d.mean_skill).collect()
    }

    pub fn rms_luck_by_decile(&self) -> Vec<f64> {
        self.per_decile.iter().map(|d| d.rms_luck).collect()
    }
}

fn check_population(spec: &PopulationSpec) -> Result<()> {
    spec.validate()?;
    if spec.n_agents < DECILES {
        return Err(Error::InsufficientData(format!(
            "{} agents cannot fill {DECILES} deciles",
            spec.n_agents
        )));
    }
    Ok(())
}

/// The observable each agent is ranked on. Only the simulated outcome enters
/// the score; true parameters are used for reporting alone.
fn ranking_scores(
    agents: &[Agent],
    period: &VettingPeriod,
    statistic: RankingStatistic,
    seed: u64,
    slot: u32,
) -> Result<Vec<f64>> {
    agents
        .par_iter()
        .enumerate()
        .map(|(i, agent)| match statistic {
            RankingStatistic::RawOutcome => {
                let stream = RngStream::for_entity(seed, Domain::Outcome, slot, i as u64);
                let z = stream.normals().next().expect("infinite stream");
                terminal_log_outcome(agent, period.years, z)
            }
            RankingStatistic::RealizedSharpe { n_obs } => {
                let stream = RngStream::for_entity(seed, Domain::Path, slot, i as u64);
                let path = simulate_path(agent, period.years, n_obs, &stream)?;
                Ok(estimate_realized_stats(&path)?.sharpe_hat)
            }
        })
        .collect()
}

/// Vets `agents` once; also returns the decile assignment.
fn vet_agents(
    agents: &[Agent],
    period: VettingPeriod,
    statistic: RankingStatistic,
    seed: u64,
    slot: u32,
) -> Result<(DecileReport, Vec<usize>)> {
    let scores = ranking_scores(agents, &period, statistic, seed, slot)?;
    let assignment = rank_and_decile(&scores, DECILES)?;
    let table = decile_stats(agents, &assignment)?;
    let report = DecileReport {
        vetting: period,
        statistic,
        per_decile: table.per_decile,
        population_benchmark: table.population_benchmark,
    };
    Ok((report, assignment))
}

/// Samples a population, vets it once, and reports true skill and luck per decile.
pub fn run_vetting_study(
    spec: &PopulationSpec,
    period: VettingPeriod,
    statistic: RankingStatistic,
    seed: u64,
) -> Result<DecileReport> {
    check_population(spec)?;
    statistic.validate()?;
    let agents = sample_population_in_slot(spec, seed, 0)?;
    Ok(vet_agents(&agents, period, statistic, seed, 0)?.0)
}

/// How the winning decile of a vetting period is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", try_from = "AllocationFields")]
pub enum AllocationMetric {
    /// Per-decile Sharpe ratio of the true parameters.
    #[default]
    TrueSharpe,
    /// Per-decile Sharpe ratio of realized statistics over a simulated
    /// holding period following the vetting period.
    OutOfSample { years: f64, n_obs: usize },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AllocationFields {
    kind: String,
    #[serde(default)]
    years: Option<f64>,
    #[serde(default)]
    n_obs: Option<usize>,
}

impl TryFrom<AllocationFields> for AllocationMetric {
    type Error = String;

    fn try_from(f: AllocationFields) -> std::result::Result<Self, String> {
        match (f.kind.as_str(), f.years, f.n_obs) {
            ("true-sharpe", None, None) => Ok(AllocationMetric::TrueSharpe),
            ("true-sharpe", _, _) => Err("true-sharpe takes no `years` or `n_obs`".into()),
            ("out-of-sample", Some(years), Some(n_obs)) => Ok(AllocationMetric::OutOfSample { years, n_obs }),
            ("out-of-sample", _, _) => Err("out-of-sample needs `years` and `n_obs`".into()),
            (other, _, _) => Err(format!(
                "unknown variant `{other}`, expected `true-sharpe` or `out-of-sample`"
            )),
        }
    }
}

impl AllocationMetric {
    /// One year of daily observations.
    pub const ONE_YEAR_DAILY: AllocationMetric = AllocationMetric::OutOfSample { years: 1.0, n_obs: 252 };

    pub fn validate(&self) -> Result<()> {
        if let AllocationMetric::OutOfSample { years, n_obs } = self {
            if !(*years > 0.0 && years.is_finite()) {
                return Err(Error::domain("out-of-sample years", format!("{years} is not positive")));
            }
            if *n_obs < 2 {
                return Err(Error::InsufficientObservations { needed: 2, got: *n_obs });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PopulationReuse {
    /// The same agents are vetted for every period.
    #[default]
    Shared,
    /// A fresh population is sampled for each period.
    Resample,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepOptions {
    pub allocation: AllocationMetric,
    pub population: PopulationReuse,
}

/// The winning decile at one vetting period.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalAllocation {
    pub period: VettingPeriod,
    pub decile: usize,
    /// The metric each decile was scored on.
    pub sharpe_by_decile: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: PopulationSpec,
    pub reports: Vec<DecileReport>,
    pub optimal: Vec<OptimalAllocation>,
}

impl SweepResult {
    pub fn optimal_deciles(&self) -> Vec<usize> {
        self.optimal.iter().map(|o| o.decile).collect()
    }
}

/// 1-based index of the highest score; ties go to the lower decile.
pub fn optimal_decile(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best + 1
}

/// Index of the period where select-on-success takes over: decile 1 wins from
/// there on, and some earlier period was won by a middle decile (3 to 8).
pub fn select_on_success_onset(optimal: &[usize]) -> Option<usize> {
    let onset = optimal.iter().rposition(|&d| d != 1).map_or(0, |i| i + 1);
    if onset >= optimal.len() {
        return None;
    }
    optimal[..onset].iter().any(|d| (3..=8).contains(d)).then_some(onset)
}

/// Realized per-agent `(mu_hat, sigma_hat)` over the holding period.
fn holding_period_stats(agents: &[Agent], years: f64, n_obs: usize, seed: u64, slot: u32) -> Result<Vec<Agent>> {
    agents
        .par_iter()
        .enumerate()
        .map(|(i, agent)| {
            let stream = RngStream::for_entity(seed, Domain::OutOfSample, slot, i as u64);
            let stats = estimate_realized_stats(&simulate_path(agent, years, n_obs, &stream)?)?;
            Ok(Agent {
                mu: stats.mu_hat,
                sigma: stats.sigma_hat,
            })
        })
        .collect()
}

/// Vets one population over several periods and picks the winning decile of each.
///
/// Period `i` draws its outcomes from substream slot `i`, so the first period of
/// a sweep reproduces [`run_vetting_study`] for the same seed.
pub fn vetting_sweep(
    spec: &PopulationSpec,
    periods: &[VettingPeriod],
    statistic: RankingStatistic,
    seed: u64,
    options: SweepOptions,
) -> Result<SweepResult> {
    check_population(spec)?;
    statistic.validate()?;
    options.allocation.validate()?;
    if periods.is_empty() {
        return Err(Error::domain("periods", "at least one vetting period is required"));
    }
    let shared = match options.population {
        PopulationReuse::Shared => Some(sample_population_in_slot(spec, seed, 0)?),
        PopulationReuse::Resample => None,
    };
    let shared_holding = match (&shared, options.allocation) {
        (Some(agents), AllocationMetric::OutOfSample { years, n_obs }) => {
            Some(holding_period_stats(agents, years, n_obs, seed, 0)?)
        }
        _ => None,
    };

    let mut reports = Vec::with_capacity(periods.len());
    let mut optimal = Vec::with_capacity(periods.len());
    for (i, period) in periods.iter().enumerate() {
        let slot = i as u32;
        let resampled;
        let agents = match &shared {
            Some(agents) => agents,
            None => {
                resampled = sample_population_in_slot(spec, seed, slot)?;
                &resampled
            }
        };
        let (report, assignment) = vet_agents(agents, *period, statistic, seed, slot)?;
        let scores = match options.allocation {
            AllocationMetric::TrueSharpe => report.sharpe_by_decile(),
            AllocationMetric::OutOfSample { years, n_obs } => {
                let table = match &shared_holding {
                    Some(realized) => decile_stats(realized, &assignment)?,
                    None => decile_stats(&holding_period_stats(agents, years, n_obs, seed, slot)?, &assignment)?,
                };
                table.per_decile.iter().map(|d| d.sharpe).collect()
            }
        };
        optimal.push(OptimalAllocation {
            period: *period,
            decile: optimal_decile(&scores),
            sharpe_by_decile: scores,
        });
        reports.push(report);
    }
    Ok(SweepResult {
        spec: *spec,
        reports,
        optimal,
    })
}

/// Realized-Sharpe ranking for each observation count, one shared population.
/// Entry `i` uses path substream slot `i`.
pub fn sharpe_observation_study(
    spec: &PopulationSpec,
    period: VettingPeriod,
    n_obs_list: &[usize],
    seed: u64,
) -> Result<Vec<DecileReport>> {
    check_population(spec)?;
    if n_obs_list.is_empty() {
        return Err(Error::domain(
            "n_obs_list",
            "at least one observation count is required",
        ));
    }
    let statistics: Vec<RankingStatistic> = n_obs_list
        .iter()
        .map(|&n_obs| {
            let s = RankingStatistic::RealizedSharpe { n_obs };
            s.validate().map(|_| s)
        })
        .collect::<Result<_>>()?;
    let agents = sample_population_in_slot(spec, seed, 0)?;
    statistics
        .into_iter()
        .enumerate()
        .map(|(i, s)| vet_agents(&agents, period, s, seed, i as u32).map(|(report, _)| report))
        .collect()
}
