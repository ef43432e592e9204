use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kerr_cli::{run, validate, Experiment, ExperimentConfig, WORKERS_ENV};

const EXIT_VALIDATION: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

#[derive(Parser)]
#[command(name = "kerrsim", version, about = "Driven-dissipative Kerr oscillator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Worker threads; overrides the config and the environment.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check a config and print diagnostics.
    Validate { config: PathBuf },
    /// List available experiments and their sweep axes.
    ListExperiments,
}

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    let cfg = ExperimentConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_VALIDATION)
    })?;
    let diags = validate(&cfg);
    if !diags.is_empty() {
        for d in &diags {
            eprintln!("invalid config: {d}");
        }
        return Err(ExitCode::from(EXIT_VALIDATION));
    }
    Ok(cfg)
}

fn workers(cfg: &ExperimentConfig, flag: Option<usize>) -> Result<usize, String> {
    if let Some(w) = flag {
        return if w >= 1 { Ok(w) } else { Err("--workers must be at least 1".into()) };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(w),
            _ => Err(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")),
        },
        Err(_) => Ok(cfg.workers),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for e in Experiment::ALL {
                let axes = e.sweep_axes();
                let axes = if axes.is_empty() { "none".to_string() } else { axes.join(", ") };
                println!("{:<18} {} [sweep axes: {axes}]", e.name(), e.description());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Err(e) => {
                println!("error: {e}");
                ExitCode::from(EXIT_VALIDATION)
            }
            Ok(cfg) => {
                let diags = validate(&cfg);
                if diags.is_empty() {
                    println!("ok: {} with {} sweep point(s)", cfg.experiment, cfg.points().len());
                    ExitCode::SUCCESS
                } else {
                    for d in &diags {
                        println!("{d}");
                    }
                    ExitCode::from(EXIT_VALIDATION)
                }
            }
        },
        Command::Run { config, workers: flag } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let w = match workers(&cfg, flag) {
                Ok(w) => w,
                Err(e) => {
                    eprintln!("invalid config: workers: {e}");
                    return ExitCode::from(EXIT_VALIDATION);
                }
            };
            match run(&cfg, w) {
                Ok(m) => {
                    let failed = m.failed();
                    eprintln!(
                        "{}: {} point(s), {} failed, {:.2}s, output {}",
                        cfg.experiment,
                        m.points.len(),
                        failed,
                        m.wall_time_s,
                        cfg.output.display()
                    );
                    for p in m.points.iter().filter(|p| p.error.is_some()) {
                        eprintln!("  point {} ({:?}): {}", p.index, p.value, p.error.as_deref().unwrap_or(""));
                    }
                    if failed == 0 {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_PARTIAL)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(EXIT_PARTIAL)
                }
            }
        }
    }
}
