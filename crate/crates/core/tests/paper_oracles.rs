//! Published numbers and qualitative claims, checked against the models.

use skill_luck::gbm::{characteristic_time, DayCount, VettingPeriod};
use skill_luck::growth::{
    concentration_metrics, hill_tail_exponent, simulate_simon, SimonConfig, DEFAULT_TAIL_FRACTION,
};
use skill_luck::population::{shockley_productivity, Preset};
use skill_luck::stats::spearman_rho;
use skill_luck::vetting::{
    optimal_decile, select_on_success_onset, sharpe_observation_study, vetting_sweep, RankingStatistic, SweepOptions,
};

const SEEDS: u64 = 20;

#[test]
fn fifty_percent_edge_on_ten_tasks_is_close_to_58() {
    let ratio = shockley_productivity(&[1.5; 10]).unwrap() / shockley_productivity(&[1.0; 10]).unwrap();
    assert!((ratio - 57.665).abs() < 0.001, "{ratio}");
    assert_eq!(ratio.round(), 58.0);
}

#[test]
fn fund_characteristic_times_span_4_to_36_years() {
    let long = characteristic_time(0.05, 0.30).unwrap();
    let short = characteristic_time(0.10, 0.20).unwrap();
    assert!((long - 36.0).abs() <= 4.0 * f64::EPSILON * 36.0, "{long}");
    assert_eq!(short, 4.0);
    // every (μ, σ) in the 5–10% / 20–30% ranges falls inside
    for mu in [0.05, 0.075, 0.10] {
        for sigma in [0.20, 0.25, 0.30] {
            let t = characteristic_time(mu, sigma).unwrap();
            assert!(t >= short - 1e-12 && t <= long + 1e-12, "{mu} {sigma}: {t}");
        }
    }
}

#[test]
fn preset_ratios_are_one_four_one_four_years() {
    let ratios: Vec<f64> = Preset::ALL.iter().map(|p| p.spec(1).moment_ratio_years()).collect();
    for (r, want) in ratios.iter().zip([1.0, 4.0, 1.0, 4.0]) {
        assert!((r - want).abs() < 1e-12, "{ratios:?}");
    }
}

/// Optimal decile per period from Sharpe ratios averaged over seeds.
fn averaged_optimum(preset: Preset, periods: &[VettingPeriod], n_agents: usize) -> Vec<usize> {
    let spec = preset.spec(n_agents);
    let mut mean = vec![vec![0.0; 10]; periods.len()];
    for seed in 0..SEEDS {
        let sweep = vetting_sweep(
            &spec,
            periods,
            RankingStatistic::RawOutcome,
            seed,
            SweepOptions::default(),
        )
        .unwrap();
        for (acc, o) in mean.iter_mut().zip(&sweep.optimal) {
            for (a, s) in acc.iter_mut().zip(&o.sharpe_by_decile) {
                *a += s / SEEDS as f64;
            }
        }
    }
    mean.iter().map(|s| optimal_decile(s)).collect()
}

#[test]
fn select_on_success_overtakes_near_four_years() {
    let periods = VettingPeriod::standard_grid(&DayCount::default());
    let winners = averaged_optimum(Preset::Population2, &periods, 100_000);
    assert!(winners[..3].iter().all(|d| (3..=8).contains(d)), "{winners:?}");
    let onset = select_on_success_onset(&winners).expect("a transition");
    let years = periods[onset].years;
    assert!((2.0..=8.0).contains(&years), "{winners:?}: onset {years}");
}

#[test]
fn middle_deciles_win_up_to_a_year_in_population_one() {
    let periods = VettingPeriod::standard_grid(&DayCount::default());
    let winners = averaged_optimum(Preset::Population1, &periods, 100_000);
    let year = periods.iter().position(|p| p.years == 1.0).unwrap();
    assert!(winners[..year].iter().all(|d| *d >= 2), "{winners:?}");
    assert_eq!(winners.last(), Some(&1), "{winners:?}");
}

#[test]
fn luck_smile_disappears_for_every_observation_count() {
    let spec = Preset::Population2.spec(100_000);
    let n_obs: Vec<usize> = (1..=8).map(|k| 1 << k).collect();
    let year = VettingPeriod::parse_with("1Y", &DayCount::default()).unwrap();
    let mut monotone = vec![0u64; n_obs.len()];
    let mut skill_rho = vec![0.0; n_obs.len()];
    let deciles: Vec<f64> = (1..=10).map(f64::from).collect();
    for seed in 0..SEEDS {
        let reports = sharpe_observation_study(&spec, year, &n_obs, seed).unwrap();
        for (i, r) in reports.iter().enumerate() {
            let luck = r.rms_luck_by_decile();
            if luck.windows(2).all(|w| w[0] <= w[1]) {
                monotone[i] += 1;
            }
            skill_rho[i] += spearman_rho(&deciles, &r.mean_skill_by_decile()).unwrap() / SEEDS as f64;
        }
    }
    for (i, count) in monotone.iter().enumerate() {
        assert!(
            *count * 10 >= SEEDS * 9,
            "n_obs {}: monotone luck in {count}/{SEEDS}",
            n_obs[i]
        );
        assert!(skill_rho[i] <= -0.9, "n_obs {}: skill rho {}", n_obs[i], skill_rho[i]);
    }
}

#[test]
fn simon_tail_matches_yule_simon() {
    let config = SimonConfig {
        alpha: 0.1,
        n_steps: 1_000_000,
    };
    let sizes = simulate_simon(&config, 7).unwrap();
    let density = 1.0 + hill_tail_exponent(&sizes, DEFAULT_TAIL_FRACTION).unwrap();
    assert!((config.yule_simon_exponent() - 2.111).abs() < 1e-3);
    assert!((density - config.yule_simon_exponent()).abs() <= 0.3, "{density}");
}

#[test]
fn fewer_entrants_concentrate_success() {
    for seed in 0..SEEDS {
        let few = concentration_metrics(
            &simulate_simon(
                &SimonConfig {
                    alpha: 0.1,
                    n_steps: 1_000_000,
                },
                seed,
            )
            .unwrap(),
        )
        .unwrap();
        let many = concentration_metrics(
            &simulate_simon(
                &SimonConfig {
                    alpha: 0.5,
                    n_steps: 1_000_000,
                },
                seed,
            )
            .unwrap(),
        )
        .unwrap();
        assert!(few.gini > many.gini, "seed {seed}: {few:?} vs {many:?}");
        assert!(few.top1_share > many.top1_share, "seed {seed}: {few:?} vs {many:?}");
    }
}
