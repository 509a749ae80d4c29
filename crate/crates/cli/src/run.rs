//! Experiment orchestration and CSV emission.
//!
//! Repetitions run in parallel; every output file is written afterwards from
//! a single thread with rows sorted on their key columns. Floats use Rust's
//! shortest round-trip formatting, so identical results give identical bytes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use skill_luck::aggregator::{run_compartmentalized, run_pooled, RunOutcome};
use skill_luck::gbm::characteristic_time;
use skill_luck::growth::{concentration_metrics, hill_stability, simulate_gibrat, simulate_simon, SizeVector};
use skill_luck::population::{sample_shockley, shockley_productivity};
use skill_luck::vetting::{
    optimal_decile, select_on_success_onset, sharpe_observation_study, vetting_sweep, DecileReport, SweepResult,
};

use crate::config::{Experiment, ExperimentConfig, PopulationConfig};

pub const DECILE_HEADER: &str =
    "population,statistic,n_obs,vetting_label,vetting_years,decile,mean_skill,rms_luck,sharpe,n_agents";
pub const OPTIMAL_HEADER: &str = "population,statistic,n_obs,vetting_label,vetting_years,decile,mean_score,optimal";
pub const TRANSITION_HEADER: &str = "population,moment_ratio_years,onset_label,onset_years";
pub const SIZES_HEADER: &str = "run,item_id,size";
pub const TAIL_HEADER: &str =
    "run,seed,n_items,total,hill_alpha,density_exponent,tail_spread,tail_stable,gini,top1_share,top10_share";
pub const AGGREGATOR_HEADER: &str = "variant,K,seed,spearman,gini_attention,top1_share";
pub const CHARACTERISTIC_TIME_HEADER: &str = "mu,sigma,years";
pub const SHOCKLEY_HEADER: &str = "n_factors,factor_multiplier,baseline,amplified,ratio";

pub const METADATA_FILE: &str = "metadata.json";

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub output: PathBuf,
    /// Files written, relative to `output`, in write order.
    pub files: Vec<PathBuf>,
    /// A one-line result for experiments that have one.
    pub headline: Option<String>,
}

/// Runs the experiment and writes its CSVs plus a metadata sidecar under `config.output`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    let mut out = Output::create(&config.output)?;
    let seeds = config.repetition_seeds();
    let headline = match &config.experiment {
        Experiment::VettingSweep(c) => {
            let periods = c.vetting_periods()?;
            let spec = c.population.spec;
            let sweeps: Vec<SweepResult> = seeds
                .par_iter()
                .map(|&s| vetting_sweep(&spec, &periods, c.statistic, s, c.options()))
                .collect::<skill_luck::Result<_>>()?;
            for (r, sweep) in sweeps.iter().enumerate() {
                out.write(
                    &rep_file(r, "deciles.csv"),
                    DECILE_HEADER,
                    decile_rows(&c.population, &sweep.reports),
                )?;
            }
            let (optimal, onset) = averaged_optimum(&c.population, &sweeps);
            out.write(Path::new("optimal.csv"), OPTIMAL_HEADER, optimal)?;
            out.write(Path::new("transition.csv"), TRANSITION_HEADER, [onset.clone()])?;
            Some(format!("transition: {onset}"))
        }
        Experiment::SharpeStudy(c) => {
            let period = c.vetting_period()?;
            let spec = c.population.spec;
            let studies: Vec<Vec<DecileReport>> = seeds
                .par_iter()
                .map(|&s| sharpe_observation_study(&spec, period, &c.n_obs_list, s))
                .collect::<skill_luck::Result<_>>()?;
            for (r, reports) in studies.iter().enumerate() {
                out.write(
                    &rep_file(r, "deciles.csv"),
                    DECILE_HEADER,
                    decile_rows(&c.population, reports),
                )?;
            }
            None
        }
        Experiment::GrowthSimon(c) => {
            let model = c.model();
            let runs: Vec<SizeVector> = seeds
                .par_iter()
                .map(|&s| simulate_simon(&model, s))
                .collect::<skill_luck::Result<_>>()?;
            Some(write_growth(&mut out, &seeds, &runs, c.tail_fraction)?)
        }
        Experiment::GrowthGibrat(c) => {
            let model = c.model();
            let runs: Vec<SizeVector> = seeds
                .par_iter()
                .map(|&s| simulate_gibrat(&model, s))
                .collect::<skill_luck::Result<_>>()?;
            Some(write_growth(&mut out, &seeds, &runs, c.tail_fraction)?)
        }
        Experiment::Aggregator(c) => {
            let pairs: Vec<(RunOutcome, RunOutcome)> = seeds
                .par_iter()
                .map(|&s| Ok((run_pooled(c, s)?, run_compartmentalized(c, s)?)))
                .collect::<skill_luck::Result<_>>()?;
            let mut rows: Vec<(&'static str, usize, u64, String)> = Vec::new();
            for (pooled, split) in &pairs {
                rows.push(aggregator_row("pooled", pooled));
                rows.push(aggregator_row("compartmentalized", split));
            }
            rows.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
            out.write(
                Path::new("aggregator.csv"),
                AGGREGATOR_HEADER,
                rows.into_iter().map(|r| r.3),
            )?;
            let wins = pairs
                .iter()
                .filter(|(p, s)| s.spearman_quality_rank > p.spearman_quality_rank)
                .count();
            Some(format!(
                "K={} beats K=1 on quality rank correlation in {wins} of {} runs",
                c.n_compartments,
                pairs.len()
            ))
        }
        Experiment::CharacteristicTime(c) => {
            let years = characteristic_time(c.mu, c.sigma)?;
            let row = format!("{},{},{}", num(c.mu), num(c.sigma), num(years));
            out.write(Path::new("characteristic_time.csv"), CHARACTERISTIC_TIME_HEADER, [row])?;
            Some(display_years(years))
        }
        Experiment::Shockley(c) => {
            let (row, ratio) = shockley_row(c.n_factors, c.factor_multiplier)?;
            out.write(Path::new("shockley.csv"), SHOCKLEY_HEADER, [row])?;
            if c.n_samples > 0 {
                let spec = c.factor_spec();
                let runs: Vec<Vec<f64>> = seeds
                    .par_iter()
                    .map(|&s| sample_shockley(&spec, c.n_samples, s))
                    .collect::<skill_luck::Result<_>>()?;
                let rows = runs
                    .iter()
                    .enumerate()
                    .flat_map(|(r, v)| v.iter().enumerate().map(move |(i, x)| format!("{r},{i},{}", num(*x))));
                out.write(Path::new("shockley_samples.csv"), SIZES_HEADER, rows)?;
            }
            Some(format!("productivity ratio {}", num(ratio)))
        }
    };
    out.metadata(config)?;
    Ok(RunSummary {
        output: config.output.clone(),
        files: out.files,
        headline,
    })
}

/// Runs on a dedicated pool of `threads` workers, or on rayon's global pool
/// when `None`. Results do not depend on the thread count.
pub fn run_with_threads(config: &ExperimentConfig, threads: Option<usize>) -> Result<RunSummary> {
    match threads {
        None => run_experiment(config),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building the thread pool")?
            .install(|| run_experiment(config)),
    }
}

/// Shortest text that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// A characteristic time for humans: rounded to 12 significant digits, so
/// `(0.30/0.05)²` prints as `36.0` rather than its last-ulp f64 value.
pub fn display_years(years: f64) -> String {
    let rounded: f64 = format!("{years:.11e}").parse().expect("formatted float");
    format!("{rounded:?}")
}

fn rep_file(rep: usize, name: &str) -> PathBuf {
    Path::new(&format!("rep-{rep:03}")).join(name)
}

fn decile_rows(population: &PopulationConfig, reports: &[DecileReport]) -> Vec<String> {
    let mut keyed: Vec<(usize, f64, usize, String)> = Vec::new();
    for report in reports {
        let n_obs = report.statistic.n_obs();
        let prefix = format!(
            "{},{},{n_obs},{},{}",
            population.label(),
            report.statistic.name(),
            report.vetting,
            num(report.vetting.years)
        );
        let bench = report.population_benchmark;
        let total: usize = report.per_decile.iter().map(|d| d.n_agents).sum();
        keyed.push((
            n_obs,
            report.vetting.years,
            0,
            format!(
                "{prefix},0,{},{},{},{total}",
                num(bench.mean_skill),
                num(bench.rms_luck),
                num(bench.sharpe)
            ),
        ));
        for d in &report.per_decile {
            keyed.push((
                n_obs,
                report.vetting.years,
                d.decile,
                format!(
                    "{prefix},{},{},{},{},{}",
                    d.decile,
                    num(d.mean_skill),
                    num(d.rms_luck),
                    num(d.sharpe),
                    d.n_agents
                ),
            ));
        }
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    keyed.into_iter().map(|k| k.3).collect()
}

/// Per-period scores averaged over repetitions, the winning decile of the
/// averages, and the transition row derived from those winners.
fn averaged_optimum(population: &PopulationConfig, sweeps: &[SweepResult]) -> (Vec<String>, String) {
    let first = &sweeps[0];
    let reps = sweeps.len() as f64;
    let mut rows = Vec::new();
    let mut winners = Vec::new();
    let mut order: Vec<usize> = (0..first.optimal.len()).collect();
    order.sort_by(|&a, &b| first.optimal[a].period.years.total_cmp(&first.optimal[b].period.years));
    for &i in &order {
        let period = first.optimal[i].period;
        let n = first.optimal[i].sharpe_by_decile.len();
        let mean: Vec<f64> = (0..n)
            .map(|d| sweeps.iter().map(|s| s.optimal[i].sharpe_by_decile[d]).sum::<f64>() / reps)
            .collect();
        let best = optimal_decile(&mean);
        winners.push(best);
        let statistic = first.reports[i].statistic;
        for (d, score) in mean.iter().enumerate() {
            rows.push(format!(
                "{},{},{},{period},{},{},{},{}",
                population.label(),
                statistic.name(),
                statistic.n_obs(),
                num(period.years),
                d + 1,
                num(*score),
                u8::from(d + 1 == best)
            ));
        }
    }
    let onset = select_on_success_onset(&winners).map(|k| first.optimal[order[k]].period);
    let (label, years) = match onset {
        Some(p) => (p.to_string(), num(p.years)),
        None => (String::new(), String::new()),
    };
    let transition = format!(
        "{},{},{label},{years}",
        population.label(),
        num(population.spec.moment_ratio_years())
    );
    (rows, transition)
}

fn write_growth(out: &mut Output, seeds: &[u64], runs: &[SizeVector], tail_fraction: f64) -> Result<String> {
    let sizes = runs.iter().enumerate().flat_map(|(r, v)| {
        v.as_slice()
            .iter()
            .enumerate()
            .map(move |(i, x)| format!("{r},{i},{}", num(*x)))
    });
    out.write(Path::new("sizes.csv"), SIZES_HEADER, sizes)?;
    let mut rows = Vec::with_capacity(runs.len());
    let mut exponents = Vec::with_capacity(runs.len());
    for (r, (sizes, seed)) in runs.iter().zip(seeds).enumerate() {
        // too few items for a tail estimate leaves those columns empty
        let tail = match hill_stability(sizes, tail_fraction) {
            Ok(t) => {
                let alpha = t.estimates[0].1;
                exponents.push(1.0 + alpha);
                format!(
                    "{},{},{},{}",
                    num(alpha),
                    num(1.0 + alpha),
                    num(t.relative_spread),
                    t.stable
                )
            }
            Err(_) => ",,,".to_string(),
        };
        let c = concentration_metrics(sizes)?;
        rows.push(format!(
            "{r},{seed},{},{},{tail},{},{},{}",
            sizes.len(),
            num(sizes.total()),
            num(c.gini),
            num(c.top1_share),
            num(c.top10_share)
        ));
    }
    out.write(Path::new("tail.csv"), TAIL_HEADER, rows)?;
    if exponents.is_empty() {
        return Ok("too few items for a tail estimate".into());
    }
    let mean = exponents.iter().sum::<f64>() / exponents.len() as f64;
    Ok(format!("mean tail density exponent {}", num(mean)))
}

fn aggregator_row(variant: &'static str, o: &RunOutcome) -> (&'static str, usize, u64, String) {
    let k = o.config.n_compartments;
    (
        variant,
        k,
        o.seed,
        format!(
            "{variant},{k},{},{},{},{}",
            o.seed,
            num(o.spearman_quality_rank),
            num(o.gini_attention),
            num(o.top1_share)
        ),
    )
}

fn shockley_row(n_factors: usize, multiplier: f64) -> Result<(String, f64)> {
    let baseline = shockley_productivity(&vec![1.0; n_factors])?;
    let amplified = shockley_productivity(&vec![multiplier; n_factors])?;
    let ratio = amplified / baseline;
    Ok((
        format!(
            "{n_factors},{},{},{},{}",
            num(multiplier),
            num(baseline),
            num(amplified),
            num(ratio)
        ),
        ratio,
    ))
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    repetitions: u32,
    repetition_seeds: Vec<u64>,
    experiment: &'a Experiment,
    files: &'a [PathBuf],
}

struct Output {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write<I, S>(&mut self, rel: &Path, header: &str, rows: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let write = || -> std::io::Result<()> {
            let mut w = BufWriter::new(File::create(&path)?);
            writeln!(w, "{header}")?;
            for row in rows {
                writeln!(w, "{}", row.as_ref())?;
            }
            w.flush()
        };
        write().with_context(|| format!("writing {}", path.display()))?;
        self.files.push(rel.to_path_buf());
        Ok(())
    }

    fn metadata(&mut self, config: &ExperimentConfig) -> Result<()> {
        let meta = Metadata {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            repetitions: config.repetitions,
            repetition_seeds: config.repetition_seeds(),
            experiment: &config.experiment,
            files: &self.files,
        };
        let path = self.root.join(METADATA_FILE);
        let mut text = serde_json::to_string_pretty(&meta)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(PathBuf::from(METADATA_FILE));
        Ok(())
    }
}
