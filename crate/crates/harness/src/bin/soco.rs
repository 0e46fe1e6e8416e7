use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand};
use soco_harness::config::ScenarioConfig;
use soco_harness::experiment::{summary_json, write_outputs, ExperimentResult};
use soco_harness::{lqr_sim, sweep, verify_suites, write_lqr_outputs};

#[derive(Parser)]
#[command(name = "soco", version, about = "Online balanced descent experiments and bound checks")]
struct Cli {
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config and $SOCO_OUT_DIR).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and check every bound.
    Run { config: PathBuf },
    /// Run a scenario once per value of a numeric parameter.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
    },
    /// Run property suites (all when none are named).
    Verify { suites: Vec<String> },
    /// Simulate the balanced-descent controller on an LQR scenario.
    LqrSim { config: PathBuf },
}

fn load(cli: &Cli, path: &Path) -> Result<ScenarioConfig> {
    let mut config = ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        config.output.dir = Some(dir.clone());
    }
    Ok(config)
}

fn report(result: &ExperimentResult) -> Result<()> {
    let written = write_outputs(result, &result.config.out_dir())?;
    println!("{}", serde_json::to_string_pretty(&summary_json(result))?);
    log::info!("wrote {} and {}", written.csv.display(), written.summary.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Run { config } => {
            let config = load(cli, config)?;
            let result = soco_harness::run_experiment(&config)?;
            report(&result)?;
            Ok(result.passed())
        }
        Command::Sweep { config, param, values } => {
            let config = load(cli, config)?;
            let results = sweep(&config, param, values)?;
            let dir = config.out_dir();
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let table = dir.join(format!("{}.sweep.csv", config.stem()));
            let mut writer = csv::Writer::from_path(&table).with_context(|| format!("creating {}", table.display()))?;
            writer.write_record([
                param.as_str(),
                "alg_cost",
                "opt_cost",
                "competitive_ratio",
                "cr_bound",
                "dynamic_regret",
                "regret_bound",
                "passed",
            ])?;
            let mut all = true;
            for (value, mut result) in results {
                result.config.output.stem = Some(format!("{}-{param}-{value}", config.stem()));
                write_outputs(&result, &dir)?;
                let r = &result.report;
                let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
                writer.write_record([
                    value.to_string(),
                    r.alg_cost.to_string(),
                    r.opt_cost.to_string(),
                    r.competitive_ratio.value.to_string(),
                    opt(r.bounds.competitive_ratio),
                    r.dynamic_regret.to_string(),
                    opt(r.bounds.regret),
                    result.passed().to_string(),
                ])?;
                println!(
                    "{param}={value}: ratio {:.6} (bound {}), regret {:.6e} {}",
                    r.competitive_ratio.value,
                    opt(r.bounds.competitive_ratio),
                    r.dynamic_regret,
                    if result.passed() { "pass" } else { "FAIL" }
                );
                all &= result.passed();
            }
            writer.flush()?;
            Ok(all)
        }
        Command::Verify { suites } => {
            let outcomes = verify_suites(suites)?;
            for o in &outcomes {
                println!(
                    "{:<24} {:>7} cases  worst margin {:>12.4e}  {}",
                    o.name,
                    o.cases,
                    o.worst_margin,
                    if o.passed { "pass" } else { "FAIL" }
                );
                if let Some(f) = &o.failure {
                    println!("  reproduce: {f}");
                }
            }
            Ok(outcomes.iter().all(|o| o.passed))
        }
        Command::LqrSim { config } => {
            let config = load(cli, config)?;
            let result = lqr_sim(&config)?;
            let written = write_lqr_outputs(&result, &config.out_dir())?;
            println!("{}", serde_json::to_string_pretty(&soco_harness::lqr_sim::lqr_summary_json(&result))?);
            log::info!("wrote {} and {}", written.csv.display(), written.summary.display());
            Ok(result.passed())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
