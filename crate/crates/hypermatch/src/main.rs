use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hypermatch::runner::write_plots;
use hypermatch::{run, Experiment, ExperimentConfig, HResult, HarnessError, RunOutcome, RunRecord};

#[derive(Parser)]
#[command(name = "hypermatch", version, about = "Transport and matching experiments for stationary point processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Override a config value, e.g. `--set d=3` or `--set rates.solver=sinkhorn`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// List the available experiments.
    ListExperiments,
    /// Redraw the charts of a finished run.
    Plot {
        record: PathBuf,
        /// Output directory (defaults to the record's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn execute(cli: Cli) -> HResult<()> {
    match cli.command {
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<18} {}", e.name(), e.describe());
            }
            Ok(())
        }
        Command::Run { config, seed, replicas, out, workers, set } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", config.display())))?;
            let mut overrides = Vec::new();
            if let Some(s) = seed {
                overrides.push(format!("seed={s}"));
            }
            if let Some(r) = replicas {
                overrides.push(format!("replicas={r}"));
            }
            if let Some(o) = out {
                overrides.push(format!("out={}", toml_string(&o.display().to_string())));
            }
            if let Some(w) = workers {
                overrides.push(format!("workers={w}"));
            }
            overrides.extend(set);
            let cfg = ExperimentConfig::from_toml(&text, &overrides)?;
            match run(&cfg)? {
                RunOutcome::Complete(record) => {
                    eprintln!(
                        "{}: {} tasks in {:.1} s, outputs in {}",
                        cfg.experiment.name(),
                        record.tasks.len(),
                        record.wall_clock_seconds,
                        cfg.out.display()
                    );
                }
                RunOutcome::Interrupted { completed, total } => {
                    eprintln!("stopped after {completed} of {total} tasks; run again to resume");
                }
            }
            Ok(())
        }
        Command::Plot { record, out } => {
            let r = RunRecord::load(&record)?;
            let dir = out.unwrap_or_else(|| record.parent().map(|p| p.to_path_buf()).unwrap_or_default());
            write_plots(&r, &dir)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
