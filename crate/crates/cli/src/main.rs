use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pinchcast_core::experiments::{
    analytic_preset, run_experiment_to_dir, summary_table, ExperimentConfig, MethodRegistry, PRESETS,
};
use pinchcast_core::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

const DEFAULT_OUT: &str = "results";

/// Multicast beamforming experiments for pinching-antenna systems.
#[derive(Parser)]
#[command(name = "pinchcast", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and write results.csv and summary.txt.
    Run {
        /// JSON experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `output` (default `results`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the number of trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads.
        #[arg(long, env = "PINCHCAST_THREADS")]
        threads: Option<NonZeroUsize>,
    },
    /// Write closed-form curves as CSV.
    Analytic {
        #[arg(long, value_parser = PRESETS)]
        preset: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Failures the user can fix by editing the configuration.
fn is_config_error(err: &Error) -> bool {
    matches!(
        err,
        Error::Config(_) | Error::InvalidParameter { .. } | Error::UnknownName { .. } | Error::EmptyUserSet
    )
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(if is_config_error(err) { EXIT_CONFIG } else { EXIT_FAILURE })
}

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    ExperimentConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        // an unreadable config file is a config problem too
        ExitCode::from(EXIT_CONFIG)
    })
}

fn run(
    config: &Path,
    out: Option<PathBuf>,
    trials: Option<usize>,
    seed: Option<u64>,
    threads: Option<NonZeroUsize>,
) -> ExitCode {
    let mut cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let registry = MethodRegistry::with_defaults();
    if let Err(e) = cfg.validate(&registry) {
        return fail(&e);
    }
    let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    match run_experiment_to_dir(&cfg, &registry, threads.map(NonZeroUsize::get), &dir) {
        Ok(output) => {
            print!("{}", summary_table(cfg.sweep.variable.as_str(), &output.summary));
            let failed = output.failures();
            if failed > 0 {
                eprintln!("{failed} of {} runs failed; see {}", output.records.len(), dir.join("results.csv").display());
                ExitCode::from(EXIT_PARTIAL)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => fail(&e),
    }
}

fn analytic(preset: &str, out: &Path) -> ExitCode {
    let text = match analytic_preset(preset) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    match std::fs::write(out, text) {
        Ok(()) => ExitCode::SUCCESS,
        Err(source) => fail(&Error::Io { path: out.to_path_buf(), source }),
    }
}

fn validate(config: &Path) -> ExitCode {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match cfg.validate(&MethodRegistry::with_defaults()) {
        Ok(()) => {
            let methods = cfg.method_names().join(", ");
            println!(
                "ok: {} over {} ({} values), {} trials, methods: {methods}",
                cfg.scenario,
                cfg.sweep.variable,
                cfg.sweep.values.len(),
                cfg.trials
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out, trials, seed, threads } => run(&config, out, trials, seed, threads),
        Command::Analytic { preset, out } => analytic(&preset, &out),
        Command::Validate { config } => validate(&config),
    }
}
