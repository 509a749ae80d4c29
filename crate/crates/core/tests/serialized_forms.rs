//! JSON shapes of the configuration types, as written in experiment configs.

use serde_json::json;
use skill_luck::aggregator::{AggregationRule, AggregatorConfig};
use skill_luck::gbm::DayCount;
use skill_luck::population::{LognormalMoments, PopulationSpec, Preset};
use skill_luck::vetting::{AllocationMetric, PopulationReuse, RankingStatistic};

#[test]
fn ranking_statistics() {
    assert_eq!(
        serde_json::to_value(RankingStatistic::RawOutcome).unwrap(),
        json!({"kind": "raw_outcome"})
    );
    let sharpe: RankingStatistic = serde_json::from_value(json!({"kind": "realized_sharpe", "n_obs": 4})).unwrap();
    assert_eq!(sharpe, RankingStatistic::RealizedSharpe { n_obs: 4 });
    assert!(serde_json::from_value::<RankingStatistic>(json!({"kind": "raw_outcome", "n_obs": 4})).is_err());
}

#[test]
fn allocation_and_reuse() {
    let m: AllocationMetric =
        serde_json::from_value(json!({"kind": "out-of-sample", "years": 1.0, "n_obs": 252})).unwrap();
    assert_eq!(m, AllocationMetric::ONE_YEAR_DAILY);
    assert_eq!(
        serde_json::to_value(AllocationMetric::TrueSharpe).unwrap(),
        json!({"kind": "true-sharpe"})
    );
    assert_eq!(
        serde_json::to_value(PopulationReuse::Resample).unwrap(),
        json!("resample")
    );
}

#[test]
fn presets_and_populations() {
    assert_eq!(
        serde_json::to_value(Preset::Population3).unwrap(),
        json!("population-3")
    );
    let spec: PopulationSpec = serde_json::from_value(json!({
        "skill": {"mean": 0.1, "std_dev": 0.05},
        "luck": {"mean": 0.0, "std_dev": 0.0},
        "n_agents": 10
    }))
    .unwrap();
    assert_eq!(spec.luck, LognormalMoments::constant(0.0));
    assert!(spec.validate().is_ok());
    assert!(serde_json::from_value::<LognormalMoments>(json!({"mean": 1.0, "sd": 0.1})).is_err());
}

#[test]
fn aggregator_defaults_fill_missing_fields() {
    let c: AggregatorConfig =
        serde_json::from_value(json!({"n_compartments": 4, "aggregation": "mean-score"})).unwrap();
    assert_eq!(
        c,
        AggregatorConfig {
            n_compartments: 4,
            aggregation: AggregationRule::MeanScore,
            ..AggregatorConfig::default()
        }
    );
    assert!(serde_json::from_value::<AggregatorConfig>(json!({"gamma": 1.0})).is_err());
    let days: DayCount =
        serde_json::from_value(json!({"days_per_year": 365.0, "weeks_per_year": 52.0, "months_per_year": 12.0}))
            .unwrap();
    assert!(days.validate().is_ok());
}

#[test]
fn tagged_variants_reject_stray_or_missing_fields() {
    for bad in [
        json!({"kind": "realized_sharpe"}),
        json!({"kind": "realized_sharpe", "n_obs": 4, "extra": 1}),
        json!({"kind": "sharpe", "n_obs": 4}),
    ] {
        assert!(
            serde_json::from_value::<RankingStatistic>(bad.clone()).is_err(),
            "{bad}"
        );
    }
    for bad in [
        json!({"kind": "true-sharpe", "years": 1.0}),
        json!({"kind": "out-of-sample", "years": 1.0}),
        json!({"kind": "oos"}),
    ] {
        assert!(
            serde_json::from_value::<AllocationMetric>(bad.clone()).is_err(),
            "{bad}"
        );
    }
}
