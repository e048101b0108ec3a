use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stochmhd::harness::{parse_config, resolve_out_dir, run_experiment, ExperimentConfig, ExperimentKind, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "stochmhd", version, about = "Stochastic MHD experiments on the 2D torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Algebraic and integral identities on random fields
    Identities(Common),
    /// Renormalization constant and Wiener chaos statistics
    Renorm(Common),
    /// Time integration with diagnostics
    Simulate(Common),
    /// Self-convergence of Galerkin approximations
    Galerkin(Common),
    /// Moments of the noise coefficients
    NoiseStats(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; defaults are used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces the seed list of the config
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this
    #[arg(long)]
    threads: Option<usize>,
    /// Grid size when no config is given [default: 128 for renorm, else 32]
    #[arg(long)]
    n: Option<usize>,
}

fn execute(kind: ExperimentKind, args: Common) -> stochmhd::Result<bool> {
    if let Some(t) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| stochmhd::Error::InvalidParameter(e.to_string()))?;
    }
    let (mut cfg, base) = match &args.config {
        Some(p) => (parse_config(p)?, p.parent().unwrap_or(Path::new(".")).to_path_buf()),
        None => {
            let n = args.n.unwrap_or(if kind == ExperimentKind::Renorm { 128 } else { 32 });
            (ExperimentConfig::new(kind, n), PathBuf::from("."))
        }
    };
    if cfg.kind != kind {
        return Err(stochmhd::Error::Config(vec![format!(
            "kind: config says {}, command is {}",
            cfg.kind.name(),
            kind.name()
        )]));
    }
    if let Some(s) = args.seed {
        cfg.seeds = vec![s];
    }
    cfg.validate()?;
    let out = resolve_out_dir(args.out.as_deref(), &cfg);
    let outcome = run_experiment(&cfg, &out, &base)?;
    for inv in outcome.invariants.iter().filter(|i| !i.passed) {
        eprintln!("FAIL {}: {}", inv.name, inv.detail);
    }
    let passed = outcome.passed();
    println!(
        "{}: {} invariants, {} failed, outputs in {}",
        kind.name(),
        outcome.invariants.len(),
        outcome.invariants.iter().filter(|i| !i.passed).count(),
        out.display()
    );
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Identities(a) => (ExperimentKind::Identities, a),
        Command::Renorm(a) => (ExperimentKind::Renorm, a),
        Command::Simulate(a) => (ExperimentKind::Simulate, a),
        Command::Galerkin(a) => (ExperimentKind::Galerkin, a),
        Command::NoiseStats(a) => (ExperimentKind::NoiseStats, a),
    };
    match execute(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(stochmhd::Error::Config(v)) => {
            for m in v {
                eprintln!("config error: {m}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
