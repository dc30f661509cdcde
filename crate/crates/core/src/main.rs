use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pgsim_core::cli::{run, Command, RunConfig};

/// Parametric iSWAP/bSWAP gate simulator: regenerates chevrons, gate strengths,
/// leakage spectra and gate errors as CSV/JSON.
#[derive(Parser)]
#[command(name = "pgsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: available cores).
    #[arg(long, global = true, env = "PGSIM_THREADS")]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Population chevron and resonance profile.
    Chevron,
    /// Gate strength and resonance versus modulation amplitude.
    Strengths,
    /// Leakage spectral lines versus modulation frequency.
    Leakage,
    /// Calibrated gate error versus modulation amplitude.
    Fidelity,
    /// Flux-amplitude scale from measured resonance shifts.
    Calibrate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Chevron => Command::Chevron,
            Cmd::Strengths => Command::Strengths,
            Cmd::Leakage => Command::Leakage,
            Cmd::Fidelity => Command::Fidelity,
            Cmd::Calibrate => Command::Calibrate,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(path) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(1);
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let mut config = match RunConfig::from_file(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match run(cli.command.into(), &config, &cli.out) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
