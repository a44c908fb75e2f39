use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use pulse_atlas_cli::config::ExperimentConfig;
use pulse_atlas_cli::run::{run, Command};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    /// Single-pulse snakes and the asymmetric rungs between them.
    Snake,
    /// Multi-pulse isola and its asymmetric sub-branches.
    Isola,
    /// Invariant manifolds, pinning tangencies and the heteroclinic loop.
    Manifold,
    /// Numerical invariants of the model and the solver.
    Verify,
    /// One branch annotated with unstable eigenvalue counts.
    Stability,
}

#[derive(Debug, Parser)]
#[command(name = "pulse-atlas", version, about = "Continuation of localized pulses on the discrete Nagumo lattice")]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overrides output.directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, all cores when absent.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let mut cfg = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(3);
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.output.directory = o;
    }
    let cmd = match cli.command {
        Sub::Snake => Command::Snake,
        Sub::Isola => Command::Isola,
        Sub::Manifold => Command::Manifold,
        Sub::Verify => Command::Verify,
        Sub::Stability => Command::Stability,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("config error: --threads must be positive");
            return ExitCode::from(3);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    let dir = cfg.output.directory.clone();
    let outcome = pool.install(|| run(cmd, &cfg, &dir));
    if let Some(m) = &outcome.manifest {
        eprintln!("{}: {} files in {}", cmd.name(), m.files.len(), dir.display());
    }
    if let Some(e) = &outcome.error {
        eprintln!("{e}");
    }
    ExitCode::from(outcome.exit_code() as u8)
}
