use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use obstacle_homog::cli::{dispatch, exit_code, Command};
use obstacle_homog::config::load_config;

/// Boundary-obstacle homogenization laboratory.
#[derive(Debug, Parser)]
#[command(name = "obstacle-lab", version)]
struct Args {
    /// TOML run configuration.
    #[arg(long, env = "OBSTACLE_LAB_CONFIG", global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir` of the configuration.
    #[arg(long, env = "OBSTACLE_LAB_OUT", global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "OBSTACLE_LAB_THREADS", global = true)]
    threads: Option<usize>,
    /// Reserved; every pipeline is deterministic.
    #[arg(long, env = "OBSTACLE_LAB_SEED", global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Sub {
    /// Patch centers and radii per ε.
    DumpLayout,
    /// Corrector, auxiliary and density norms per ε with fitted slopes.
    CorrectorScan,
    /// Extrapolated capacity density.
    MuLimit,
    /// Obstacle solves per ε.
    SolveEps,
    /// Homogenized solve.
    SolveHom,
    /// Limit and flux checks.
    CheckLemmas,
    /// Convergence study.
    Converge,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::DumpLayout => Command::DumpLayout,
            Sub::CorrectorScan => Command::CorrectorScan,
            Sub::MuLimit => Command::MuLimit,
            Sub::SolveEps => Command::SolveEps,
            Sub::SolveHom => Command::SolveHom,
            Sub::CheckLemmas => Command::CheckLemmas,
            Sub::Converge => Command::Converge,
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let _ = args.seed;
    if let Some(k) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let Some(path) = args.config else {
        eprintln!("error: no configuration given (--config or OBSTACLE_LAB_CONFIG)");
        return ExitCode::from(2);
    };
    let config = match load_config(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let dir = args.out.unwrap_or_else(|| config.output.dir.clone());
    let command = Command::from(args.command);
    let outcome = dispatch(command, &config, &dir);
    match &outcome {
        Ok(o) => {
            for a in &o.artifacts {
                println!("{}", a.display());
            }
            if let Some(e) = &o.error {
                eprintln!("{command}: {e}");
            }
            println!("{command}: {}", if o.pass && o.error.is_none() { "PASS" } else { "FAIL" });
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&outcome) as u8)
}
