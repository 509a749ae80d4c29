//! Geometric Brownian motion as a model of success.
//!
//! An agent's log-outcome after `T` years is
//! `(μ − σ²/2)·T + z·σ·√T` with `z ~ N(0, 1)`: the first term is the
//! cumulative skill component and the second the luck component. Outcomes are
//! normalised so that `ln S_0 = 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::Agent;
use crate::stats::{mean_and_variance, RngStream};

/// Year fractions used for the named vetting periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DayCount {
    pub days_per_year: f64,
    pub weeks_per_year: f64,
    pub months_per_year: f64,
}

impl Default for DayCount {
    fn default() -> Self {
        Self {
            days_per_year: 252.0,
            weeks_per_year: 52.0,
            months_per_year: 12.0,
        }
    }
}

impl DayCount {
    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("days_per_year", self.days_per_year),
            ("weeks_per_year", self.weeks_per_year),
            ("months_per_year", self.months_per_year),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(what, format!("{v} is not a positive finite number")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PeriodLabel {
    Day,
    Week,
    Month,
    Quarter,
    HalfYear,
    Year,
    TwoYears,
    FourYears,
    Custom,
}

impl PeriodLabel {
    pub const NAMED: [PeriodLabel; 8] = [
        PeriodLabel::Day,
        PeriodLabel::Week,
        PeriodLabel::Month,
        PeriodLabel::Quarter,
        PeriodLabel::HalfYear,
        PeriodLabel::Year,
        PeriodLabel::TwoYears,
        PeriodLabel::FourYears,
    ];

    pub fn code(self) -> Option<&'static str> {
        Some(match self {
            PeriodLabel::Day => "1D",
            PeriodLabel::Week => "1W",
            PeriodLabel::Month => "1M",
            PeriodLabel::Quarter => "1Q",
            PeriodLabel::HalfYear => "1H",
            PeriodLabel::Year => "1Y",
            PeriodLabel::TwoYears => "2Y",
            PeriodLabel::FourYears => "4Y",
            PeriodLabel::Custom => return None,
        })
    }

    fn years(self, days: &DayCount) -> Option<f64> {
        Some(match self {
            PeriodLabel::Day => 1.0 / days.days_per_year,
            PeriodLabel::Week => 1.0 / days.weeks_per_year,
            PeriodLabel::Month => 1.0 / days.months_per_year,
            PeriodLabel::Quarter => 0.25,
            PeriodLabel::HalfYear => 0.5,
            PeriodLabel::Year => 1.0,
            PeriodLabel::TwoYears => 2.0,
            PeriodLabel::FourYears => 4.0,
            PeriodLabel::Custom => return None,
        })
    }
}

/// The window over which agents are observed before being ranked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VettingPeriod {
    pub label: PeriodLabel,
    pub years: f64,
}

impl VettingPeriod {
    pub fn named(label: PeriodLabel, days: &DayCount) -> Result<Self> {
        let years = label
            .years(days)
            .ok_or_else(|| Error::domain("vetting period", "custom periods need an explicit length"))?;
        Ok(Self { label, years })
    }

    pub fn custom(years: f64) -> Result<Self> {
        if !(years > 0.0 && years.is_finite()) {
            return Err(Error::domain(
                "vetting period",
                format!("{years} years is not positive"),
            ));
        }
        Ok(Self {
            label: PeriodLabel::Custom,
            years,
        })
    }

    /// The eight named periods from one day to four years.
    pub fn standard_grid(days: &DayCount) -> Vec<Self> {
        PeriodLabel::NAMED
            .iter()
            .map(|&l| Self::named(l, days).expect("named label"))
            .collect()
    }

    /// Parses `1D`..`4Y`, or `<years>Y` for a custom length (e.g. `8Y`, `0.75Y`).
    pub fn parse_with(s: &str, days: &DayCount) -> Result<Self> {
        if let Some(label) = PeriodLabel::NAMED.iter().find(|l| l.code() == Some(s)) {
            return Self::named(*label, days);
        }
        let years = s
            .strip_suffix('Y')
            .and_then(|n| n.parse::<f64>().ok())
            .ok_or_else(|| Error::domain("vetting period", format!("cannot parse {s:?}")))?;
        Self::custom(years)
    }
}

impl fmt::Display for VettingPeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.label.code() {
            Some(code) => f.write_str(code),
            None => write!(f, "{}Y", self.years),
        }
    }
}

impl FromStr for VettingPeriod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_with(s, &DayCount::default())
    }
}

fn check_years(years: f64) -> Result<()> {
    if years > 0.0 && years.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("years", format!("{years} is not a positive horizon")))
    }
}

/// Log-outcome after `years` for a caller-supplied standard-normal draw `z`.
pub fn terminal_log_outcome(agent: &Agent, years: f64, z: f64) -> Result<f64> {
    check_years(years)?;
    Ok(log_drift(agent) * years + agent.sigma * (years.sqrt() * z))
}

/// Drift of the log-outcome, `μ − σ²/2`.
#[inline]
fn log_drift(agent: &Agent) -> f64 {
    agent.mu - agent.sigma * agent.sigma / 2.0
}

/// Log-outcome observations of one agent on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub agent: Agent,
    pub years: f64,
    pub dt: f64,
    /// `n_obs + 1` levels starting at 0.
    pub log_levels: Vec<f64>,
    /// The `n_obs` generated log-increments.
    pub increments: Vec<f64>,
}

impl Path {
    /// Builds a path from observed log-increments.
    pub fn from_increments(agent: Agent, years: f64, increments: Vec<f64>) -> Result<Self> {
        check_years(years)?;
        if increments.is_empty() {
            return Err(Error::InsufficientObservations { needed: 1, got: 0 });
        }
        let dt = years / increments.len() as f64;
        let mut log_levels = Vec::with_capacity(increments.len() + 1);
        log_levels.push(0.0);
        let mut level = 0.0;
        for inc in &increments {
            level += inc;
            log_levels.push(level);
        }
        Ok(Self {
            agent,
            years,
            dt,
            log_levels,
            increments,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.increments.len()
    }

    pub fn terminal(&self) -> f64 {
        *self.log_levels.last().expect("paths have at least one level")
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_obs()).map(move |k| k as f64 * self.dt)
    }
}

/// Simulates `n_obs` equally spaced observations over `years`.
///
/// Levels are `(μ − σ²/2)·t_k + σ·W(t_k)` with `W` built from the stream's
/// normal draws, so a zero-volatility agent traces the drift line exactly.
pub fn simulate_path(agent: &Agent, years: f64, n_obs: usize, stream: &RngStream) -> Result<Path> {
    check_years(years)?;
    if n_obs == 0 {
        return Err(Error::InsufficientObservations { needed: 1, got: 0 });
    }
    let dt = years / n_obs as f64;
    let sqrt_dt = dt.sqrt();
    let drift = log_drift(agent);

    let mut log_levels = Vec::with_capacity(n_obs + 1);
    let mut increments = Vec::with_capacity(n_obs);
    log_levels.push(0.0);
    let mut cumulative_z = 0.0;
    for (k, z) in (1..=n_obs).zip(stream.normals()) {
        increments.push(drift * dt + agent.sigma * (sqrt_dt * z));
        cumulative_z += z;
        log_levels.push(drift * (k as f64 * dt) + agent.sigma * (sqrt_dt * cumulative_z));
    }
    Ok(Path {
        agent: *agent,
        years,
        dt,
        log_levels,
        increments,
    })
}

/// `T* = (σ/μ)²`, the horizon at which `μ·T*` equals `σ·√T*`.
pub fn characteristic_time(mu: f64, sigma: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::domain(
            "mu",
            format!("{mu}: characteristic time needs a positive drift"),
        ));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(
            "sigma",
            format!("{sigma}: characteristic time needs a positive volatility"),
        ));
    }
    let ratio = sigma / mu;
    Ok(ratio * ratio)
}

/// Drift, volatility and Sharpe ratio estimated from one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizedStats {
    pub mu_hat: f64,
    pub sigma_hat: f64,
    /// `mu_hat / sigma_hat`; `±∞` when the path is degenerate.
    pub sharpe_hat: f64,
    pub n_obs: usize,
    /// All increments identical, so `sigma_hat` is zero.
    pub degenerate: bool,
}

/// Realized statistics from log-increments.
///
/// `sigma_hat` is the unbiased sample standard deviation of the increments over
/// `√dt`; `mu_hat` adds `sigma_hat²/2` back to the mean log-drift so that it
/// estimates μ rather than `μ − σ²/2`. The risk-free rate is zero.
pub fn estimate_realized_stats(path: &Path) -> Result<RealizedStats> {
    let n_obs = path.n_obs();
    if n_obs < 2 {
        return Err(Error::InsufficientObservations { needed: 2, got: n_obs });
    }
    let (mean, var, _) = mean_and_variance(path.increments.iter().copied());
    let sigma_hat = (var / path.dt).sqrt();
    let mu_hat = mean / path.dt + sigma_hat * sigma_hat / 2.0;
    let degenerate = sigma_hat == 0.0;
    let sharpe_hat = if degenerate {
        f64::INFINITY.copysign(mu_hat)
    } else {
        mu_hat / sigma_hat
    };
    Ok(RealizedStats {
        mu_hat,
        sigma_hat,
        sharpe_hat,
        n_obs,
        degenerate,
    })
}
