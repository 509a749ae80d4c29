//! Proportional growth: the Simon new-entrant process and Gibrat's law of
//! multiplicative growth, plus tail and concentration diagnostics.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::LognormalMoments;
use crate::stats::{gini, top_share, Domain, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimonConfig {
    /// Probability that a step creates a new item.
    pub alpha: f64,
    pub n_steps: usize,
}

impl SimonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::domain("alpha", format!("{} is outside (0, 1]", self.alpha)));
        }
        if self.n_steps == 0 {
            return Err(Error::domain("n_steps", "at least one step is required"));
        }
        Ok(())
    }

    /// Density exponent of the limiting Yule–Simon size distribution,
    /// `1 + 1/(1 − alpha)`.
    pub fn yule_simon_exponent(&self) -> f64 {
        1.0 + 1.0 / (1.0 - self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibratConfig {
    pub n_agents: usize,
    pub n_steps: usize,
    /// Per-step multiplicative growth factor.
    pub growth_shock: LognormalMoments,
}

impl GibratConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::domain("n_agents", "at least one agent is required"));
        }
        if self.n_agents > u32::MAX as usize {
            return Err(Error::domain("n_agents", "exceeds the substream index range"));
        }
        if self.n_steps == 0 {
            return Err(Error::domain("n_steps", "at least one step is required"));
        }
        self.growth_shock.log_params().map(|_| ())
    }
}

/// Strictly positive sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeVector(Vec<f64>);

impl SizeVector {
    pub fn new(sizes: Vec<f64>) -> Result<Self> {
        if let Some(s) = sizes.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::domain("sizes", format!("{s} is not a positive size")));
        }
        Ok(Self(sizes))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Simon's process. Starts from one item of size 1; each step either creates a
/// new size-1 item (probability `alpha`) or adds one unit to an existing item
/// picked with probability proportional to its size. Sizes are in creation order.
pub fn simulate_simon(config: &SimonConfig, seed: u64) -> Result<SizeVector> {
    config.validate()?;
    let mut rng = RngStream::for_entity(seed, Domain::Simon, 0, 0).rng();
    let mut sizes: Vec<u64> = vec![1];
    // owner of every unit handed out so far; a uniform unit is a size-biased item
    let mut owners: Vec<u32> = Vec::with_capacity(config.n_steps + 1);
    owners.push(0);
    for _ in 0..config.n_steps {
        let item = if rng.random::<f64>() < config.alpha {
            sizes.push(0);
            sizes.len() - 1
        } else {
            owners[rng.random_range(0..owners.len())] as usize
        };
        sizes[item] += 1;
        owners.push(item as u32);
    }
    SizeVector::new(sizes.into_iter().map(|s| s as f64).collect())
}

/// Gibrat's law: every agent starts at 1 and is multiplied by an i.i.d.
/// lognormal shock each step.
pub fn simulate_gibrat(config: &GibratConfig, seed: u64) -> Result<SizeVector> {
    config.validate()?;
    let shock = config.growth_shock.sampler()?;
    let sizes = (0..config.n_agents)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::for_entity(seed, Domain::Gibrat, 0, i as u64).rng();
            (0..config.n_steps).fold(1.0, |size, _| size * shock.sample(&mut rng))
        })
        .collect();
    SizeVector::new(sizes)
}

pub const DEFAULT_TAIL_FRACTION: f64 = 0.05;
const MIN_TAIL_POINTS: usize = 50;

/// Hill estimate of the Pareto tail index `a` (survival function `~ x^−a`)
/// from the largest `floor(k_fraction · n)` sizes, with the next order
/// statistic as threshold. The density exponent is `1 + a`.
pub fn hill_tail_exponent(sizes: &SizeVector, k_fraction: f64) -> Result<f64> {
    if !(k_fraction > 0.0 && k_fraction < 1.0) {
        return Err(Error::domain("k_fraction", format!("{k_fraction} is outside (0, 1)")));
    }
    let mut sorted = sizes.as_slice().to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = (k_fraction * sorted.len() as f64).floor() as usize;
    if k < MIN_TAIL_POINTS || k >= sorted.len() {
        return Err(Error::InsufficientData(format!(
            "{k} tail points, need at least {MIN_TAIL_POINTS}"
        )));
    }
    let threshold = sorted[k];
    let log_excess: f64 = sorted[..k].iter().map(|x| (x / threshold).ln()).sum();
    if log_excess <= 0.0 {
        return Err(Error::Degenerate("no spread above the tail threshold".into()));
    }
    Ok(k as f64 / log_excess)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailStability {
    /// `(k_fraction, estimate)` at `k`, `k/2` and `k/4` where enough points exist.
    pub estimates: Vec<(f64, f64)>,
    /// Spread of the estimates relative to their median.
    pub relative_spread: f64,
    pub stable: bool,
}

const STABILITY_TOLERANCE: f64 = 0.25;

/// Re-estimates the tail index at successively higher thresholds. Power-law
/// tails give roughly constant estimates; light tails drift upward.
pub fn hill_stability(sizes: &SizeVector, k_fraction: f64) -> Result<TailStability> {
    let estimates: Vec<(f64, f64)> = [1.0, 0.5, 0.25]
        .iter()
        .map(|f| k_fraction * f)
        .map_while(|k| hill_tail_exponent(sizes, k).ok().map(|a| (k, a)))
        .collect();
    if estimates.len() < 2 {
        return Err(Error::InsufficientData(
            "need tail estimates at two thresholds for a stability check".into(),
        ));
    }
    let mut values: Vec<f64> = estimates.iter().map(|e| e.1).collect();
    values.sort_by(f64::total_cmp);
    let median = values[values.len() / 2];
    let relative_spread = (values[values.len() - 1] - values[0]) / median;
    Ok(TailStability {
        estimates,
        relative_spread,
        stable: relative_spread <= STABILITY_TOLERANCE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub gini: f64,
    /// Share held by the largest 1% (at least one item).
    pub top1_share: f64,
    /// Share held by the largest 10% (at least one item).
    pub top10_share: f64,
}

pub fn concentration_metrics(sizes: &SizeVector) -> Result<Concentration> {
    Ok(Concentration {
        gini: gini(sizes.as_slice())?,
        top1_share: top_share(sizes.as_slice(), 0.01)?,
        top10_share: top_share(sizes.as_slice(), 0.10)?,
    })
}
