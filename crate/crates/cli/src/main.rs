use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use prsloc::harness::{
    aggregate, calibrate_kappa, export, MetricsReport, Profile, Scenario, ScenarioConfig,
};

#[derive(Parser)]
#[command(
    name = "prsloc",
    version,
    about = "PRS downlink positioning simulator with attack and integrity models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write epochs.csv, metrics.json and config_resolved.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the sampling profile (test or full).
        #[arg(long)]
        profile: Option<String>,
    },
    /// Calibrate the hearability threshold on pure-noise windows.
    CalibrateThreshold {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Re-run a scenario for each value of one configuration parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted parameter path, e.g. `attack.power_dbm`.
        #[arg(long)]
        param: String,
        /// JSON literals (bare words are taken as strings).
        #[arg(long, num_args = 1.., required = true)]
        values: Vec<String>,
        /// Optional directory receiving one sub-directory per value.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, seed: Option<u64>, profile: Option<&str>) -> Result<ScenarioConfig> {
    let mut cfg =
        ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(p) = profile {
        cfg.profile = Profile::parse(p)?;
    }
    Ok(cfg)
}

fn run_one(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<MetricsReport> {
    let scenario = Scenario::prepare(cfg)?;
    let records = scenario.run()?;
    let report = aggregate(&records, cfg)?;
    if let Some(dir) = out {
        export(&records, &report, &scenario.resolved_config(), dir)?;
    }
    Ok(report)
}

fn summary(report: &MetricsReport) -> String {
    let mut parts = Vec::new();
    for (phase, s) in &report.outcome_shares {
        parts.push(format!(
            "{phase}: success {:.2}% large_error {:.2}% dos {:.2}%",
            100.0 * s.success,
            100.0 * s.large_error,
            100.0 * s.dos
        ));
    }
    for (name, t) in &report.techniques {
        let att = t
            .attacked_correct_rate
            .map(|r| format!("{:.2}%", 100.0 * r))
            .unwrap_or("-".into());
        let fa = t
            .false_alarm_rate
            .map(|r| format!("{:.2}%", 100.0 * r))
            .unwrap_or("-".into());
        parts.push(format!("{name}: attacked-correct {att} false-alarm {fa}"));
    }
    parts.join("\n")
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            profile,
        } => {
            let cfg = load(&config, seed, profile.as_deref())?;
            let report = run_one(&cfg, Some(&out))?;
            println!("{}", summary(&report));
            log::info!("wrote results to {}", out.display());
        }
        Command::CalibrateThreshold { config, trials } => {
            let cfg = load(&config, None, None)?;
            let cal = calibrate_kappa(&cfg, trials)?;
            println!("{}", serde_json::to_string_pretty(&cal)?);
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let base = load(&config, None, None)?;
            let mut rows = Vec::new();
            for v in &values {
                let cfg = base.with_override(&param, v)?;
                let dir = out.as_ref().map(|d| d.join(format!("{param}={v}")));
                let report = run_one(&cfg, dir.as_deref())?;
                println!("== {param} = {v}\n{}", summary(&report));
                rows.push(serde_json::json!({ "value": v, "metrics": report }));
            }
            if let Some(d) = &out {
                let path = d.join("sweep.json");
                std::fs::write(&path, serde_json::to_string_pretty(&rows)? + "\n")
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}
