use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ness_lab::config::{self, Experiment};
use ness_lab::runner::run_experiment;
use ness_lab::Error;

#[derive(Parser)]
#[command(name = "nesslab", version, about = "Steady states of a Maxwellian gas between thermal reservoirs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override one key, e.g. `--set numerics.dt=0.01`. Repeatable.
    #[arg(long = "set", value_name = "KEY=JSON", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve for the steady state by fixed-point iteration.
    Ness,
    /// Evolve a characteristic function in time.
    Evolve,
    /// Particle simulation with replicas.
    Dsmc,
    /// Entropy-production ledger for the thermalizing model.
    Entropy,
    /// Run the acceptance suite.
    Validate,
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Command::Ness => Experiment::Ness,
            Command::Evolve => Experiment::Evolve,
            Command::Dsmc => Experiment::Dsmc,
            Command::Entropy => Experiment::Entropy,
            Command::Validate => Experiment::Validate,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut overrides = cli.set.clone();
    overrides.push(format!("experiment=\"{}\"", cli.command.experiment()));
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(out) = &cli.out {
        match serde_json::to_string(out) {
            Ok(s) => overrides.push(format!("output_dir={s}")),
            Err(e) => {
                eprintln!("error: output path: {e}");
                return ExitCode::from(2);
            }
        }
    }
    let cfg = match config::load(cli.config.as_deref(), &overrides).and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_experiment(&cfg) {
        Ok(outcome) => {
            // The suite prints its own table while it runs.
            let echo = outcome.experiment != Experiment::Validate;
            for a in outcome.assertions.iter().filter(|_| echo) {
                let mark = if a.passed { "PASS" } else { "FAIL" };
                println!("{mark}  {}  {}", a.name, a.detail);
            }
            if !outcome.complete {
                eprintln!("run did not complete");
            }
            println!("results in {}", cfg.output_dir.display());
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
