use std::path::PathBuf;
use std::process::ExitCode;

use biharm::experiment::{self, exit_code, Experiment, Outcome};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "biharm", version, about = "Radial laboratory for energy-critical biharmonic Schrödinger systems")]
struct Cli {
    /// Override the config's rng seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit the model's structural hypotheses.
    Check { config: PathBuf },
    /// Compute the ground state and its thresholds.
    Groundstate { config: PathBuf },
    /// Evolve the configured initial data.
    Evolve { config: PathBuf },
    /// Classify the initial data against the thresholds.
    Classify {
        config: PathBuf,
        /// Also evolve and report the trajectory evidence.
        #[arg(long)]
        evolve: bool,
    },
    /// Evolve `a·ψ` for every amplitude in `[sweep]`.
    Sweep { config: PathBuf },
    /// Print the effective config and its hash.
    Config { config: PathBuf },
}

fn load(path: &PathBuf, cli: &Cli) -> biharm::Result<Experiment> {
    let mut exp = Experiment::load(path)?;
    if let Some(seed) = cli.seed {
        exp = exp.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        let cwd = std::env::current_dir()?;
        exp = exp.with_output_dir(cwd.join(out));
    }
    Ok(exp)
}

fn run(cli: &Cli) -> biharm::Result<Outcome> {
    match &cli.command {
        Command::Check { config } => experiment::cmd_check(&load(config, cli)?),
        Command::Groundstate { config } => experiment::cmd_groundstate(&load(config, cli)?),
        Command::Evolve { config } => experiment::cmd_evolve(&load(config, cli)?),
        Command::Classify { config, evolve } => experiment::cmd_classify(&load(config, cli)?, *evolve),
        Command::Sweep { config } => experiment::cmd_sweep(&load(config, cli)?),
        Command::Config { config } => {
            let exp = load(config, cli)?;
            print!("# config_hash = {}\n{}", exp.config.hash()?, exp.config.to_toml()?);
            Ok(Outcome {
                success: true,
                summary: serde_json::Value::Null,
                artifacts: Vec::new(),
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli);
    match &result {
        Ok(o) => {
            if !o.summary.is_null() {
                match serde_json::to_string_pretty(&o.summary) {
                    Ok(s) => println!("{s}"),
                    Err(e) => eprintln!("biharm: {e}"),
                }
            }
            for a in &o.artifacts {
                eprintln!("wrote {}", a.display());
            }
            if !o.success {
                eprintln!("biharm: failed");
            }
        }
        Err(e) => eprintln!("biharm: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
