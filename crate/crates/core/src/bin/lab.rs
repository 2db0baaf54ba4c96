use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hjlab::harness::{self, ExperimentConfig, ExperimentKind, RunOutcome};
use hjlab::{LabError, Result};

#[derive(Parser)]
#[command(name = "lab", about = "Mixed local-nonlocal Hamilton-Jacobi laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named by the config's `experiment` key.
    Run { config: PathBuf },
    /// Run the identity suite and write the residual ledger.
    Identities { config: PathBuf },
    /// Run the spike-family Lipschitz sweep.
    Sweep { config: PathBuf },
    /// Print the exponent threshold table as CSV.
    Thresholds {
        #[arg(long, value_delimiter = ',', required = true)]
        gamma: Vec<f64>,
        #[arg(long = "N", value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        q: Vec<f64>,
    },
}

fn load(path: &Path, kind: Option<ExperimentKind>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(kind) = kind {
        if kind == ExperimentKind::Lipschitz && cfg.kind != kind {
            // re-validate so the threshold and preset checks apply
            let mut kv = cfg.resolved.clone();
            kv.set("experiment", "lipschitz");
            cfg = ExperimentConfig::from_key_values(kv)?;
        }
        cfg.kind = kind;
    }
    Ok(cfg)
}

fn execute(command: Command) -> Result<RunOutcome> {
    match command {
        Command::Run { config } => harness::run(&load(&config, None)?),
        Command::Identities { config } => {
            harness::run(&load(&config, Some(ExperimentKind::Identities))?)
        }
        Command::Sweep { config } => harness::run(&load(&config, Some(ExperimentKind::Lipschitz))?),
        Command::Thresholds { gamma, dims, q } => {
            let rows = harness::run_threshold_table(&gamma, &dims, &q)?;
            harness::write_threshold_csv(io::stdout().lock(), &rows)?;
            Ok(RunOutcome {
                experiment: ExperimentKind::SingleRun,
                all_pass: true,
                output_dir: PathBuf::new(),
                reports: vec![],
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = execute(cli.command);
    match &outcome {
        Ok(o) => {
            for r in &o.reports {
                println!(
                    "{:<20} residual={:.3e} tolerance={:.1e} {}",
                    r.name,
                    r.residual,
                    r.tolerance,
                    if r.pass { "PASS" } else { "FAIL" }
                );
            }
            if !o.output_dir.as_os_str().is_empty() {
                println!("output: {}", o.output_dir.display());
            }
        }
        Err(e @ LabError::Config(_)) => eprintln!("configuration error: {e}"),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(harness::exit_code(&outcome) as u8)
}
