//! Seeded substreams and the handful of rank statistics the simulators share.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Namespaces for stream identifiers, so that draws for different purposes
/// (agent sampling, outcome draws, paths, ...) never share a substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Domain {
    Population = 1,
    Outcome = 2,
    Path = 3,
    OutOfSample = 4,
    Shockley = 5,
    Simon = 6,
    Gibrat = 7,
    ItemQuality = 8,
    Compartment = 9,
}

/// A reproducible substream of a master seed.
///
/// The generator is ChaCha8 keyed by `master_seed` with `stream_id` selecting
/// the ChaCha stream (nonce), so every `(master_seed, stream_id)` pair gets its
/// own independent keystream and the draw order inside one stream is the only
/// ordering that matters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    /// Stream id layout: `domain` in the top 8 bits, `slot` in the next 24,
    /// `index` in the low 32.
    pub fn for_entity(master_seed: u64, domain: Domain, slot: u32, index: u64) -> Self {
        debug_assert!(slot < (1 << 24), "slot {slot} does not fit in 24 bits");
        debug_assert!(index < (1 << 32), "index {index} does not fit in 32 bits");
        let id = ((domain as u64) << 56) | (u64::from(slot & 0x00ff_ffff) << 32) | (index & 0xffff_ffff);
        Self::new(master_seed, id)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// The stream's standard-normal draws, in order.
    pub fn normals(&self) -> impl Iterator<Item = f64> {
        let mut rng = self.rng();
        std::iter::repeat_with(move || standard_normal(&mut rng))
    }
}

/// One N(0, 1) draw.
#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Ranks starting at 1, ascending, with tied values sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end (0-based) hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientObservations {
            needed: 2,
            got: x.len(),
        });
    }
    pearson(&average_ranks(x), &average_ranks(y)).ok_or_else(|| Error::Degenerate("zero rank variance".into()))
}

/// Gini coefficient of non-negative values via the sorted-index formula
/// `G = 2 Σ i·x_(i) / (n Σ x) − (n + 1) / n` with 1-based `i` over ascending values.
pub fn gini(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("gini of an empty list".into()));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::domain(
            "gini",
            format!("value {v} is not a finite non-negative number"),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("gini of all-zero values".into()));
    }
    let n = sorted.len() as f64;
    let weighted: f64 = sorted.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
    let g = 2.0 * weighted / (n * total) - (n + 1.0) / n;
    Ok(g.max(0.0))
}

/// Share of the total held by the largest `ceil(fraction · n)` values.
pub fn top_share(values: &[f64], fraction: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("top share of an empty list".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::domain(
            "top share",
            format!("fraction {fraction} outside (0, 1]"),
        ));
    }
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("top share of all-zero values".into()));
    }
    let k = ((fraction * values.len() as f64).ceil() as usize).clamp(1, values.len());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[..k].iter().sum::<f64>() / total)
}

/// Mean and unbiased variance in one pass (Welford). Identical inputs give a
/// mean equal to that input and a variance of exactly zero.
pub(crate) fn mean_and_variance(values: impl IntoIterator<Item = f64>) -> (f64, f64, usize) {
    let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
    for x in values {
        n += 1;
        let delta = x - mean;
        mean += delta / n as f64;
        m2 += delta * (x - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    (mean, var, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spearman_identity_and_reversal() {
        let x = [0.3, 1.0, -2.0, 7.5, 4.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(spearman_rho(&x, &x).unwrap(), 1.0);
        assert_eq!(spearman_rho(&x, &neg).unwrap(), -1.0);
    }

    #[test]
    fn spearman_hand_computed() {
        // ranks (1,2,3) vs (1,3,2): d² = (0,1,1), 1 − 6·2/(3·8) = 0.5
        let rho = spearman_rho(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((rho - 0.5).abs() < 1e-12);
    }

    #[test]
    fn spearman_errors() {
        assert!(matches!(
            spearman_rho(&[1.0, 2.0], &[1.0]),
            Err(Error::LengthMismatch { left: 2, right: 1 })
        ));
        assert!(matches!(
            spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(spearman_rho(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn gini_known_values() {
        assert_eq!(gini(&[3.0; 8]).unwrap(), 0.0);
        let mut one_holder = vec![0.0; 9];
        one_holder.push(1.0);
        assert!((gini(&one_holder).unwrap() - 0.9).abs() < 1e-12);
        assert!((gini(&[1.0, 2.0, 3.0, 4.0]).unwrap() - 0.25).abs() < 1e-12);
        assert!(matches!(gini(&[0.0, 0.0]), Err(Error::Degenerate(_))));
        assert!(gini(&[]).is_err());
        assert!(gini(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn top_share_basics() {
        assert!((top_share(&[1.0; 20], 0.1).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(top_share(&[0.0, 0.0, 5.0], 0.01).unwrap(), 1.0);
    }

    #[test]
    fn stream_determinism_and_separation() {
        let a: Vec<f64> = RngStream::new(7, 3).normals().take(16).collect();
        let b: Vec<f64> = RngStream::new(7, 3).normals().take(16).collect();
        let c: Vec<f64> = RngStream::new(7, 4).normals().take(16).collect();
        let d: Vec<f64> = RngStream::new(8, 3).normals().take(16).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn entity_ids_do_not_collide_across_domains() {
        let a = RngStream::for_entity(1, Domain::Population, 0, 5);
        let b = RngStream::for_entity(1, Domain::Outcome, 0, 5);
        let c = RngStream::for_entity(1, Domain::Outcome, 1, 5);
        assert_ne!(a.stream_id, b.stream_id);
        assert_ne!(b.stream_id, c.stream_id);
    }

    #[test]
    fn normal_moments_over_a_million_draws() {
        let draws: Vec<f64> = RngStream::new(2024, 0).normals().take(1_000_000).collect();
        let (mean, var, n) = mean_and_variance(draws.iter().copied());
        let skew = draws.iter().map(|x| ((x - mean) / var.sqrt()).powi(3)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.004, "mean {mean}");
        assert!((var - 1.0).abs() < 0.006, "var {var}");
        // se of skewness ≈ sqrt(6/n) ≈ 0.0024
        assert!(skew.abs() < 0.01, "skew {skew}");
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let n = 1_000_000;
        let x = RngStream::new(99, 1).normals().take(n);
        let y = RngStream::new(99, 2).normals().take(n);
        let corr = x.zip(y).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        assert!(corr.abs() < 0.004, "cross-correlation {corr}");
    }

    #[test]
    fn welford_identical_values_are_exact() {
        let (mean, var, n) = mean_and_variance(std::iter::repeat_n(0.1 / 3.0, 37));
        assert_eq!(mean, 0.1 / 3.0);
        assert_eq!(var, 0.0);
        assert_eq!(n, 37);
    }

    proptest! {
        #[test]
        fn spearman_invariant_under_monotone_transforms(
            x in prop::collection::vec(-1e3f64..1e3, 3..40),
            y in prop::collection::vec(-1e3f64..1e3, 40),
        ) {
            let y = &y[..x.len()];
            if let Ok(rho) = spearman_rho(&x, y) {
                let tx: Vec<f64> = x.iter().map(|v| (v / 100.0).exp()).collect();
                let ty: Vec<f64> = y.iter().map(|v| v * 3.0 - 11.0).collect();
                let rho2 = spearman_rho(&tx, &ty).unwrap();
                prop_assert!((rho - rho2).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(&rho));
            }
        }

        #[test]
        fn gini_scale_and_permutation_invariant(
            v in prop::collection::vec(0.0f64..100.0, 1..50),
            scale in 0.01f64..100.0,
            rot in 0usize..50,
        ) {
            prop_assume!(v.iter().sum::<f64>() > 0.0);
            let g = gini(&v).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| x * scale).collect();
            let mut rotated = v.clone();
            rotated.rotate_left(rot % v.len());
            prop_assert!((0.0..1.0).contains(&g));
            prop_assert!((gini(&scaled).unwrap() - g).abs() < 1e-9);
            prop_assert!((gini(&rotated).unwrap() - g).abs() < 1e-9);
        }
    }
}
