use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use quenched_cli::config::{parse_config, ExperimentKind};
use quenched_cli::run;

/// Spectral and Monte-Carlo experiments for random compositions of
/// piecewise-linear expanding interval maps.
#[derive(Parser)]
#[command(name = "quenched", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// INI experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides [output] dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker count (overrides [output] workers); artifacts do not depend
    /// on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Seed override (replaces [model] seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Fail on unknown config keys (default).
    #[arg(long, conflicts_with = "lenient")]
    strict: bool,
    /// Downgrade unknown config keys to warnings.
    #[arg(long)]
    lenient: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Equivariant density at one fiber and twist.
    Density(RunArgs),
    /// Lyapunov exponent curve with derivatives at 0.
    Lambda(RunArgs),
    /// Correlation-series and curve-based variance.
    Variance(RunArgs),
    /// Large-deviation tail rates against the Legendre rate function.
    Ldp(RunArgs),
    /// Central limit theorem: KS distance and empirical variance.
    Clt(RunArgs),
    /// Local central limit theorem (aperiodic or lattice).
    Lclt(RunArgs),
    /// Lambda(it) scan with lattice detection.
    Aperiodicity(RunArgs),
    /// Expansion, regularity, and covering evidence for the map family.
    Validate(RunArgs),
    /// Render a CSV artifact as a self-contained SVG.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        /// lambda | ldp | lclt
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run_experiment(kind: ExperimentKind, args: &RunArgs) -> anyhow::Result<bool> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let strict = !args.lenient;
    let (mut plan, warnings) = parse_config(&text, Some(kind), strict)?;
    if let Some(out) = &args.out {
        plan.out_dir = out.display().to_string();
    }
    if let Some(workers) = args.workers {
        plan.workers = workers.max(1);
    }
    if let Some(seed) = args.seed {
        plan.seed = seed;
    }
    let summary = run::run(&plan, warnings)?;
    summary.print_verdicts();
    println!(
        "{}: {} ({} ms), artifacts in {}",
        summary.kind,
        if summary.passed { "all checks passed" } else { "CHECKS FAILED" },
        summary.wall_time_ms,
        plan.out_dir
    );
    Ok(summary.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Density(a) => run_experiment(ExperimentKind::Density, a),
        Cmd::Lambda(a) => run_experiment(ExperimentKind::Lambda, a),
        Cmd::Variance(a) => run_experiment(ExperimentKind::Variance, a),
        Cmd::Ldp(a) => run_experiment(ExperimentKind::Ldp, a),
        Cmd::Clt(a) => run_experiment(ExperimentKind::Clt, a),
        Cmd::Lclt(a) => run_experiment(ExperimentKind::Lclt, a),
        Cmd::Aperiodicity(a) => run_experiment(ExperimentKind::Aperiodicity, a),
        Cmd::Validate(a) => run_experiment(ExperimentKind::Validate, a),
        Cmd::Plot { csv, kind, out } => run::plot_file(csv, kind, out).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
