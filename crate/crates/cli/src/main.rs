use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mcris::exp::{emit, run_sweep, ExperimentConfig, Format, Profile, Scenario};

#[derive(Parser)]
#[command(name = "mcris", version, about = "Coupling-aware RIS channel estimation and beamforming sweeps")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Paper => Profile::Paper,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a sweep and write aggregated results.
    Run {
        #[arg(long)]
        scenario: Option<String>,
        /// JSON experiment config; overrides the scenario preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_enum, default_value = "desk")]
        profile: ProfileArg,
        /// Override the number of trials per sweep point.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Print the built-in scenario names.
    ListScenarios,
    /// Print the preset config of a scenario as JSON.
    Preset {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_enum, default_value = "desk")]
        profile: ProfileArg,
    },
    /// Check a config file and print it back with defaults filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<18} {}", s.name(), s.description());
            }
        }
        Cmd::Preset { scenario, profile } => {
            let cfg = ExperimentConfig::preset(Scenario::parse(&scenario)?, profile.into());
            println!("{}", serde_json::to_string_pretty(&cfg)?);
        }
        Cmd::Validate { config } => {
            let cfg = ExperimentConfig::load(&config).with_context(|| format!("invalid config {}", config.display()))?;
            println!("{}", serde_json::to_string_pretty(&cfg)?);
        }
        Cmd::Run {
            scenario,
            config,
            out,
            format,
            seed,
            workers,
            profile,
            trials,
        } => {
            let profile: Profile = profile.into();
            let mut cfg = match (&config, &scenario) {
                (Some(path), _) => ExperimentConfig::load(path).with_context(|| format!("invalid config {}", path.display()))?,
                (None, Some(name)) => ExperimentConfig::preset(Scenario::parse(name)?, profile),
                (None, None) => bail!("either --scenario or --config is required"),
            };
            if let (Some(_), Some(name)) = (&config, &scenario) {
                let sc = Scenario::parse(name)?;
                if sc != cfg.scenario {
                    bail!("--scenario {} disagrees with the config's scenario {}", name, cfg.scenario.name());
                }
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            cfg.validate()?;
            let records = run_sweep(&cfg)?;
            let fmt = match format {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
            emit(&records, &out, fmt)?;
            let failed: usize = records.iter().map(|r| r.failures).sum();
            eprintln!("wrote {} records to {} ({} failed trial-metrics)", records.len(), out.display(), failed);
        }
    }
    Ok(())
}
