//! Compartmentalized content ranking.
//!
//! Items with a hidden quality are ranked by up-votes. Each user session looks
//! at one item, chosen by rank with attention `∝ rank^(−gamma)`, and up-votes it
//! with probability `logistic(beta · (ln quality − median ln quality))`. Because
//! attention follows rank and rank follows votes, early leads compound.
//!
//! The compartmentalized variant splits the same session budget across `K`
//! independent compartments (users assigned round-robin). At every vetting
//! boundary, and once at the end, the per-compartment results are aggregated
//! into one score per item and every compartment's ranking is reset to the
//! aggregate order. The pooled baseline is the same process with `K = 1`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::LognormalMoments;
use crate::stats::{average_ranks, gini, spearman_rho, top_share, Domain, RngStream};

/// How per-compartment results are combined into an aggregate score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationRule {
    /// Mean over compartments of the item's score rank (higher is better).
    #[default]
    MeanRank,
    /// Mean over compartments of the raw up-vote count.
    MeanScore,
}

/// Missing fields take their [`Default`] values when deserialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregatorConfig {
    pub n_items: usize,
    /// Number of compartments `K`.
    pub n_compartments: usize,
    /// Total user sessions, shared by all compartments.
    pub n_sessions: usize,
    /// Latent item quality.
    pub quality: LognormalMoments,
    /// Attention decay with rank, `gamma ≥ 0`; zero is uniform attention.
    pub exposure_exponent: f64,
    /// Vote sharpness `beta > 0`.
    pub vote_sharpness: f64,
    /// Sessions between aggregations; 0 aggregates once at the end.
    pub vetting_sessions: usize,
    pub aggregation: AggregationRule,
}

impl Default for AggregatorConfig {
    fn default() -> Self {
        Self {
            n_items: 100,
            n_compartments: 16,
            n_sessions: 20_000,
            quality: LognormalMoments::new(1.0, 1.0),
            exposure_exponent: 1.0,
            vote_sharpness: 2.0,
            vetting_sessions: 0,
            aggregation: AggregationRule::MeanRank,
        }
    }
}

impl AggregatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_items < 2 {
            return Err(Error::domain("n_items", "at least two items are required"));
        }
        if self.n_items > u32::MAX as usize {
            return Err(Error::domain("n_items", "exceeds the substream index range"));
        }
        if self.n_compartments == 0 {
            return Err(Error::domain("n_compartments", "at least one compartment is required"));
        }
        if self.n_sessions == 0 {
            return Err(Error::domain("n_sessions", "at least one session is required"));
        }
        if self.n_compartments > self.n_sessions {
            return Err(Error::domain(
                "n_compartments",
                format!(
                    "{} compartments would leave some of them without any of the {} sessions",
                    self.n_compartments, self.n_sessions
                ),
            ));
        }
        self.quality.log_params()?;
        if !(self.exposure_exponent >= 0.0 && self.exposure_exponent.is_finite()) {
            return Err(Error::domain(
                "exposure_exponent",
                format!("{} is not a non-negative number", self.exposure_exponent),
            ));
        }
        if !(self.vote_sharpness > 0.0 && self.vote_sharpness.is_finite()) {
            return Err(Error::domain(
                "vote_sharpness",
                format!("{} is not a positive number", self.vote_sharpness),
            ));
        }
        if self.vetting_sessions > self.n_sessions {
            return Err(Error::domain(
                "vetting_sessions",
                format!("{} exceeds the {} sessions", self.vetting_sessions, self.n_sessions),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    /// Item ids, best aggregate score first.
    pub final_ranking: Vec<usize>,
    pub aggregate_scores: Vec<f64>,
    pub quality: Vec<f64>,
    /// Sessions that viewed each item.
    pub attention: Vec<u64>,
    pub spearman_quality_rank: f64,
    pub gini_attention: f64,
    pub top1_share: f64,
    /// Effective configuration (`n_compartments` is 1 for pooled runs).
    pub config: AggregatorConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Meritocracy {
    pub spearman: f64,
    pub gini_attention: f64,
    pub top1_share: f64,
}

/// Rank correlation between quality and final score, plus attention concentration.
pub fn meritocracy_metrics(quality: &[f64], final_scores: &[f64], attention_counts: &[u64]) -> Result<Meritocracy> {
    if quality.len() != final_scores.len() {
        return Err(Error::LengthMismatch {
            left: quality.len(),
            right: final_scores.len(),
        });
    }
    if quality.len() != attention_counts.len() {
        return Err(Error::LengthMismatch {
            left: quality.len(),
            right: attention_counts.len(),
        });
    }
    if quality.len() < 2 {
        return Err(Error::InsufficientObservations {
            needed: 2,
            got: quality.len(),
        });
    }
    let attention: Vec<f64> = attention_counts.iter().map(|&a| a as f64).collect();
    Ok(Meritocracy {
        spearman: spearman_rho(quality, final_scores)?,
        gini_attention: gini(&attention)?,
        top1_share: top_share(&attention, 0.01)?,
    })
}

/// Up-vote probability per item. The only place latent quality is read
/// during a run.
struct VoteModel {
    up_probability: Vec<f64>,
}

impl VoteModel {
    fn new(quality: &[f64], median_log_quality: f64, sharpness: f64) -> Self {
        let up_probability = quality
            .iter()
            .map(|q| 1.0 / (1.0 + (-sharpness * (q.ln() - median_log_quality)).exp()))
            .collect();
        Self { up_probability }
    }

    fn up_vote(&self, item: usize, draw: f64) -> bool {
        draw < self.up_probability[item]
    }
}

/// Cumulative attention weights by rank position.
struct Attention {
    cumulative: Vec<f64>,
}

impl Attention {
    fn new(n_items: usize, gamma: f64) -> Self {
        let mut total = 0.0;
        let cumulative = (1..=n_items)
            .map(|rank| {
                total += (rank as f64).powf(-gamma);
                total
            })
            .collect();
        Self { cumulative }
    }

    /// 0-based rank position for a uniform draw in `[0, 1)`.
    fn position(&self, draw: f64) -> usize {
        let target = draw * self.cumulative[self.cumulative.len() - 1];
        self.cumulative
            .partition_point(|&c| c <= target)
            .min(self.cumulative.len() - 1)
    }
}

/// One compartment's ranking. Holds no quality information.
struct Compartment {
    rng: ChaCha8Rng,
    /// Item ids by rank, best first.
    order: Vec<usize>,
    position: Vec<usize>,
    /// Up-votes since the last aggregation; drives the ranking.
    epoch_votes: Vec<u64>,
    /// All up-votes; feeds aggregation.
    total_votes: Vec<u64>,
}

impl Compartment {
    fn new(n_items: usize, stream: RngStream) -> Self {
        let mut rng = stream.rng();
        let mut order: Vec<usize> = (0..n_items).collect();
        order.shuffle(&mut rng);
        let mut position = vec![0; n_items];
        for (p, &item) in order.iter().enumerate() {
            position[item] = p;
        }
        Self {
            rng,
            order,
            position,
            epoch_votes: vec![0; n_items],
            total_votes: vec![0; n_items],
        }
    }

    fn session(&mut self, attention: &Attention, votes: &VoteModel, views: &mut [u64]) {
        let rank_draw: f64 = self.rng.random();
        let vote_draw: f64 = self.rng.random();
        let item = self.order[attention.position(rank_draw)];
        views[item] += 1;
        if votes.up_vote(item, vote_draw) {
            self.epoch_votes[item] += 1;
            self.total_votes[item] += 1;
            self.promote(item);
        }
    }

    /// Moves `item` up past every item with fewer epoch votes; ties keep order.
    fn promote(&mut self, item: usize) {
        let mut p = self.position[item];
        while p > 0 {
            let above = self.order[p - 1];
            if self.epoch_votes[above] >= self.epoch_votes[item] {
                break;
            }
            self.order[p] = above;
            self.position[above] = p;
            p -= 1;
        }
        self.order[p] = item;
        self.position[item] = p;
    }

    fn reset_to(&mut self, ordering: &[usize]) {
        self.order.copy_from_slice(ordering);
        for (p, &item) in ordering.iter().enumerate() {
            self.position[item] = p;
        }
        self.epoch_votes.iter_mut().for_each(|v| *v = 0);
    }
}

fn sample_quality(config: &AggregatorConfig, seed: u64) -> Result<Vec<f64>> {
    let quality = config.quality.sampler()?;
    Ok((0..config.n_items)
        .map(|i| {
            let mut rng = RngStream::for_entity(seed, Domain::ItemQuality, 0, i as u64).rng();
            quality.sample(&mut rng)
        })
        .collect())
}

/// Aggregate scores and the resulting order (ties keep `previous` order).
fn aggregate(compartments: &[Compartment], rule: AggregationRule, previous: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let n_items = previous.len();
    let mut scores = vec![0.0; n_items];
    for c in compartments {
        let per_item: Vec<f64> = match rule {
            AggregationRule::MeanRank => {
                let votes: Vec<f64> = c.total_votes.iter().map(|&v| v as f64).collect();
                average_ranks(&votes)
            }
            AggregationRule::MeanScore => c.total_votes.iter().map(|&v| v as f64).collect(),
        };
        for (s, v) in scores.iter_mut().zip(per_item) {
            *s += v;
        }
    }
    let k = compartments.len() as f64;
    scores.iter_mut().for_each(|s| *s /= k);

    let mut ordering = previous.to_vec();
    ordering.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    (scores, ordering)
}

fn run(config: &AggregatorConfig, seed: u64) -> Result<RunOutcome> {
    config.validate()?;
    let quality = sample_quality(config, seed)?;
    let median_log_quality = config.quality.log_params()?.location;
    let votes = VoteModel::new(&quality, median_log_quality, config.vote_sharpness);
    let attention = Attention::new(config.n_items, config.exposure_exponent);

    let k = config.n_compartments;
    let mut compartments: Vec<Compartment> = (0..k)
        .map(|c| {
            Compartment::new(
                config.n_items,
                RngStream::for_entity(seed, Domain::Compartment, 0, c as u64),
            )
        })
        .collect();
    let mut views = vec![0u64; config.n_items];
    let mut ordering: Vec<usize> = (0..config.n_items).collect();
    let mut scores;

    let epoch = if config.vetting_sessions == 0 {
        config.n_sessions
    } else {
        config.vetting_sessions
    };
    let mut start = 0;
    loop {
        let end = (start + epoch).min(config.n_sessions);
        // session s belongs to compartment s mod K
        for (c, compartment) in compartments.iter_mut().enumerate() {
            let first = start + (c + k - start % k) % k;
            for _ in (first..end).step_by(k) {
                compartment.session(&attention, &votes, &mut views);
            }
        }
        (scores, ordering) = aggregate(&compartments, config.aggregation, &ordering);
        if end == config.n_sessions {
            break;
        }
        for c in &mut compartments {
            c.reset_to(&ordering);
        }
        start = end;
    }

    let merit = meritocracy_metrics(&quality, &scores, &views)?;
    Ok(RunOutcome {
        final_ranking: ordering,
        aggregate_scores: scores,
        quality,
        attention: views,
        spearman_quality_rank: merit.spearman,
        gini_attention: merit.gini_attention,
        top1_share: merit.top1_share,
        config: *config,
        seed,
    })
}

/// Single-pool baseline: the configured `n_compartments` is ignored.
pub fn run_pooled(config: &AggregatorConfig, seed: u64) -> Result<RunOutcome> {
    let pooled = AggregatorConfig {
        n_compartments: 1,
        ..*config
    };
    run(&pooled, seed)
}

/// The session budget split across `config.n_compartments` compartments.
pub fn run_compartmentalized(config: &AggregatorConfig, seed: u64) -> Result<RunOutcome> {
    run(config, seed)
}
