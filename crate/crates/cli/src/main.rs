use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ana_cli::config::{ExperimentName, ExperimentSpec};
use ana_cli::data::{make_dataset, read_csv, write_dataset};
use ana_cli::experiments::{compare, run_experiment, run_scan, Summary};
use ana_cli::targets::Target;
use ana_core::{Error, Result};
use clap::{Args, Parser, Subcommand};

/// Adversarial parameter estimation for simulation models.
#[derive(Parser)]
#[command(name = "ana", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Override `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Override `experiment.out_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override `train.max_iterations`.
    #[arg(long)]
    max_iter: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a configured experiment and write history and summaries.
    Run {
        /// TOML config, or a bare experiment name for its defaults.
        config: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Generate the synthetic dataset and manifest only.
    Gen {
        config: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Discrete-KL landscape over kappa and tau.
    Scan {
        config: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// KS distance and moment errors of a one-column sample against a target.
    Compare {
        sample: PathBuf,
        /// e.g. `beta:1,3`, `cauchy:0,0.5`, `gmix:0.4,0.3,0.1;0.6,0.8,0.05`.
        target: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the full default config of an experiment as TOML.
    Defaults { name: ExperimentName },
}

fn load(config: &str, o: &Overrides) -> Result<ExperimentSpec> {
    let mut spec = match config.parse::<ExperimentName>() {
        Ok(name) if !Path::new(config).exists() => ExperimentSpec::defaults(name),
        _ => ExperimentSpec::load(Path::new(config))?,
    };
    if let Some(s) = o.seed {
        spec.experiment.seed = s;
    }
    if let Some(d) = &o.out_dir {
        spec.experiment.out_dir = d.clone();
    }
    if let Some(n) = o.max_iter {
        spec.train.max_iterations = n;
    }
    spec.validate()?;
    Ok(spec)
}

fn print(summary: &Summary) {
    print!("{}", summary.to_text());
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides } => {
            let spec = load(&config, &overrides)?;
            let report = run_experiment(&spec)?;
            print(&report.summary);
        }
        Command::Gen { config, overrides } => {
            let spec = load(&config, &overrides)?;
            if !spec.experiment.name.is_adversarial() {
                return Err(Error::Parse(format!(
                    "{} has no dataset to generate",
                    spec.experiment.name
                )));
            }
            let data = make_dataset(&spec)?;
            for f in write_dataset(&spec, &data, &spec.experiment.out_dir)? {
                println!("{}", f.display());
            }
        }
        Command::Scan { config, overrides } => {
            let spec = load(&config, &overrides)?;
            print(&run_scan(&spec)?.report.summary);
        }
        Command::Compare { sample, target, seed } => {
            let target: Target = target.parse()?;
            let (_, m) = read_csv(&sample)?;
            if m.ncols() != 1 {
                return Err(Error::Parse(format!(
                    "{}: expected one column, found {}",
                    sample.display(),
                    m.ncols()
                )));
            }
            let values = m.column(0).to_vec();
            print(&compare(&values, &target, seed)?.to_summary(&target));
        }
        Command::Defaults { name } => print!("{}", ExperimentSpec::defaults(name).to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
