use std::path::PathBuf;
use std::process::ExitCode;

use banditbias::bounds::{render_catalog, Verdict};
use banditbias::harness::{self, ExperimentConfig, RunReport};
use clap::{Parser, Subcommand};

/// Monte Carlo checks of bias and risk bounds for adaptively collected data.
///
/// Exit status: 0 when every check holds, 1 when any check is violated,
/// 2 on usage or configuration errors.
#[derive(Parser)]
#[command(name = "banditbias", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config file.
    Run {
        config: PathBuf,
        /// Directory for the JSON report, text table and plot data.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a built-in scenario.
    Scenario {
        name: String,
        /// Override the number of replications.
        #[arg(long)]
        reps: Option<usize>,
        /// Override the root seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Print the scenario config as TOML instead of running it.
        #[arg(long)]
        print_config: bool,
    },
    /// List built-in scenarios.
    ListScenarios,
    /// Print the table of bounds.
    Catalog,
}

fn execute(mut config: ExperimentConfig, out: Option<PathBuf>, threads: Option<usize>) -> ExitCode {
    if out.is_some() {
        config.output = out;
    }
    let result = match threads {
        Some(n) => harness::run_with_threads(&config, n),
        None => harness::run(&config),
    };
    match result {
        Ok(report) => finish(&report),
        Err(e @ banditbias::Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn finish(report: &RunReport) -> ExitCode {
    print!("{}", report.render());
    if let Some(dir) = &report.config.output {
        eprintln!("report written to {}", dir.display());
    }
    match report.verdict() {
        Verdict::Violated => ExitCode::from(1),
        _ => ExitCode::SUCCESS,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run { config, out, threads } => match ExperimentConfig::from_file(&config) {
            Ok(cfg) => execute(cfg, out, threads),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Scenario {
            name,
            reps,
            seed,
            out,
            threads,
            print_config,
        } => {
            let mut cfg = match harness::scenario(&name) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(r) = reps {
                cfg.n_reps = r;
            }
            if let Some(s) = seed {
                cfg.root_seed = s;
            }
            if print_config {
                return match cfg.to_toml_string() {
                    Ok(t) => {
                        print!("{t}");
                        ExitCode::SUCCESS
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        ExitCode::from(2)
                    }
                };
            }
            execute(cfg, out, threads)
        }
        Command::ListScenarios => {
            for (name, about) in harness::SCENARIOS {
                println!("{name:<28} {about}");
            }
            ExitCode::SUCCESS
        }
        Command::Catalog => {
            print!("{}", render_catalog());
            ExitCode::SUCCESS
        }
    }
}
