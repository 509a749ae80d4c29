use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use skill_luck_cli::config::{config_from_value, parse_config_with, Overrides};
use skill_luck_cli::run::{display_years, run_with_threads};

/// Skill-versus-luck simulation studies.
#[derive(Parser)]
#[command(name = "skill-luck", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named by the config file.
    Run(Common),
    /// Decile vetting over a grid of vetting periods.
    VettingSweep(Common),
    /// Realized-Sharpe ranking at several observation counts.
    SharpeStudy(Common),
    /// Simon proportional growth with entry.
    GrowthSimon(Common),
    /// Gibrat multiplicative growth.
    GrowthGibrat(Common),
    /// Pooled versus compartmentalized ranking.
    Aggregator(Common),
    /// Multiplicative productivity amplification.
    Shockley(Common),
    /// Print (σ/μ)², the horizon where drift overtakes noise.
    CharacteristicTime(CharacteristicTime),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct RunFlags {
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "SKILL_LUCK_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct CharacteristicTime {
    /// JSON config; `--mu` and `--sigma` override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[command(flatten)]
    run: RunFlags,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let (kind, common) = match cli.command {
        Command::Run(c) => (None, c),
        Command::VettingSweep(c) => (Some("vetting-sweep"), c),
        Command::SharpeStudy(c) => (Some("sharpe-study"), c),
        Command::GrowthSimon(c) => (Some("growth-simon"), c),
        Command::GrowthGibrat(c) => (Some("growth-gibrat"), c),
        Command::Aggregator(c) => (Some("aggregator"), c),
        Command::Shockley(c) => (Some("shockley"), c),
        Command::CharacteristicTime(c) => return characteristic_time(c),
    };
    let text = fs::read_to_string(&common.config).with_context(|| format!("reading {}", common.config.display()))?;
    let overrides = Overrides {
        seed: common.run.seed,
        output: common.run.out,
        kind,
    };
    let config = parse_config_with(&text, &overrides)?;
    let summary = run_with_threads(&config, common.run.threads)?;
    if let Some(line) = summary.headline {
        println!("{line}");
    }
    println!("wrote {} files to {}", summary.files.len(), summary.output.display());
    Ok(())
}

/// Without `--config` or `--out` this only prints the result; no seed is needed.
fn characteristic_time(args: CharacteristicTime) -> Result<()> {
    let mut value = match &args.config {
        Some(path) => {
            serde_json::from_str(&fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => serde_json::json!({ "seed": 0, "experiment": {} }),
    };
    let experiment = value
        .get_mut("experiment")
        .and_then(|e| e.as_object_mut())
        .context("experiment: expected a JSON object")?;
    if let Some(mu) = args.mu {
        experiment.insert("mu".into(), mu.into());
    }
    if let Some(sigma) = args.sigma {
        experiment.insert("sigma".into(), sigma.into());
    }
    let write_files = args.config.is_some() || args.run.out.is_some();
    let overrides = Overrides {
        seed: args.run.seed,
        output: args.run.out,
        kind: Some("characteristic-time"),
    };
    let config = config_from_value(value, &overrides)?;
    if write_files {
        let summary = run_with_threads(&config, args.run.threads)?;
        println!("{}", summary.headline.unwrap_or_default());
    } else {
        let skill_luck_cli::Experiment::CharacteristicTime(c) = config.experiment else {
            unreachable!("kind was forced above")
        };
        println!(
            "{}",
            display_years(skill_luck::gbm::characteristic_time(c.mu, c.sigma)?)
        );
    }
    Ok(())
}
