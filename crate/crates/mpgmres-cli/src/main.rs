//! Command-line experiment runner for the mpgmres solver.

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use mpgmres::gmres::{GmresConfig, OrthScheme, PrecisionAssignment, PrecondKind};
use mpgmres::{RestartPolicy, Width};
use mpgmres_cli::{
    comparison_csv, configure_threads, run_comparison, run_experiment, ComparisonSpec,
    ExperimentSpec, MatrixSource, RhsMode,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mpgmres",
    about = "Restarted GMRES experiments with mixed single/double precision"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one system and report timing, iterations, and backward error.
    Run(RunArgs),
    /// Time a baseline preset against a variant preset over a matrix set.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SolverArgs {
    /// Orthogonalization scheme: mgs, cgsr, or cgs.
    #[arg(long, default_value = "mgs")]
    orth: String,
    /// Restart policy: fixed:M, improve:DELTA, improve-repeat:DELTA,
    /// stall:WINDOW:FACTOR, orthloss:spectral:ITERS:TAU, or
    /// orthloss:frob:TAU. Defaults to fixed restarts at --m.
    #[arg(long)]
    policy: Option<String>,
    /// Target normwise backward error.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Maximum inner iterations per restart cycle.
    #[arg(long, default_value_t = 300)]
    m: usize,
    /// Maximum restart cycles.
    #[arg(long, default_value_t = 50)]
    max_outer: usize,
    /// Seed for the uniform-random solution vector.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solve repetitions for the timing summary.
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Worker threads (default: MPGMRES_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Disable the ILU(0) preconditioner.
    #[arg(long)]
    no_precond: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Matrix Market file holding the system matrix.
    #[arg(long, conflicts_with = "gen")]
    matrix: Option<PathBuf>,
    /// Generated convection-diffusion problem: K or K,BETA.
    #[arg(long)]
    gen: Option<String>,
    /// Right-hand side file (one entry per line); default derives b from a
    /// seeded uniform-random solution.
    #[arg(long)]
    rhs_file: Option<PathBuf>,
    /// Precision preset: double, single, mixed, limited-mixed, single-ilu,
    /// or custom (with --low).
    #[arg(long, default_value = "double")]
    preset: String,
    /// Comma-separated variables to store in low precision with
    /// --preset custom: residual-matrix, rhs, solution-update,
    /// residual-vector, krylov-matrix, preconditioner, basis, candidate,
    /// hessenberg.
    #[arg(long)]
    low: Option<String>,
    /// Record the true backward error every N inner iterations.
    #[arg(long)]
    truth_stride: Option<usize>,
    /// Write the convergence trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// Matrix Market file; repeatable.
    #[arg(long)]
    matrix: Vec<PathBuf>,
    /// Generated problem K or K,BETA; repeatable.
    #[arg(long)]
    gen: Vec<String>,
    /// Baseline preset.
    #[arg(long, default_value = "double")]
    baseline: String,
    /// Variant preset.
    #[arg(long, default_value = "mixed")]
    variant: String,
    /// Calibrate the cycle length to half the baseline's unrestarted
    /// iteration count before timing.
    #[arg(long)]
    calibrate_half: bool,
    /// Write the speedup table CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

fn parse_orth(s: &str) -> Result<OrthScheme> {
    Ok(match s {
        "mgs" => OrthScheme::Mgs,
        "cgsr" => OrthScheme::Cgsr,
        "cgs" => OrthScheme::Cgs,
        other => bail!("unknown orthogonalization scheme '{other}' (expected mgs, cgsr, or cgs)"),
    })
}

fn parse_preset(name: &str, low: Option<&str>) -> Result<PrecisionAssignment> {
    let mut p = match name {
        "double" => PrecisionAssignment::double(),
        "single" => PrecisionAssignment::single(),
        "mixed" => PrecisionAssignment::mixed(),
        "limited-mixed" => PrecisionAssignment::limited_mixed(),
        "single-ilu" => PrecisionAssignment::single_ilu(),
        "custom" => PrecisionAssignment::double(),
        other => bail!(
            "unknown preset '{other}' (expected double, single, mixed, limited-mixed, \
             single-ilu, or custom)"
        ),
    };
    match (name, low) {
        ("custom", Some(vars)) => {
            for var in vars.split(',').map(str::trim).filter(|v| !v.is_empty()) {
                let slot = match var {
                    "residual-matrix" => &mut p.matrix_for_residual,
                    "rhs" => &mut p.rhs,
                    "solution-update" => &mut p.solution_update,
                    "residual-vector" => &mut p.residual_vector,
                    "krylov-matrix" => &mut p.matrix_for_krylov,
                    "preconditioner" => &mut p.preconditioner,
                    "basis" => &mut p.krylov_basis,
                    "candidate" => &mut p.candidate_vector,
                    "hessenberg" => &mut p.hessenberg_and_givens,
                    other => bail!("unknown variable '{other}' in --low"),
                };
                *slot = Width::Low;
            }
        }
        ("custom", None) => bail!("--preset custom requires --low"),
        (_, Some(_)) => bail!("--low is only valid with --preset custom"),
        _ => {}
    }
    Ok(p)
}

fn build_config(solver: &SolverArgs, precision: PrecisionAssignment) -> Result<GmresConfig> {
    let mut cfg = GmresConfig::new(solver.m);
    cfg.tol = solver.tol;
    cfg.max_outer = solver.max_outer;
    cfg.orth = parse_orth(&solver.orth)?;
    cfg.precision = precision;
    cfg.policy = match &solver.policy {
        Some(s) => RestartPolicy::parse(s)?,
        None => RestartPolicy::FixedCount(solver.m),
    };
    cfg.preconditioner = if solver.no_precond {
        PrecondKind::Identity
    } else {
        PrecondKind::Ilu0
    };
    cfg.validate()?;
    Ok(cfg)
}

fn matrix_sources(files: &[PathBuf], generated: &[String]) -> Result<Vec<MatrixSource>> {
    let mut sources: Vec<MatrixSource> =
        files.iter().cloned().map(MatrixSource::File).collect();
    for spec in generated {
        sources.push(MatrixSource::parse_generated(spec)?);
    }
    if sources.is_empty() {
        bail!("no matrix given: use --matrix or --gen");
    }
    Ok(sources)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let threads = configure_threads(args.solver.threads);
    let sources = matrix_sources(
        args.matrix.as_slice(),
        args.gen.as_ref().map(std::slice::from_ref).unwrap_or(&[]),
    )?;
    if sources.len() > 1 {
        bail!("run takes exactly one matrix");
    }
    let precision = parse_preset(&args.preset, args.low.as_deref())?;
    let mut cfg = build_config(&args.solver, precision)?;
    cfg.truth_stride = args.truth_stride;
    cfg.validate()?;

    let spec = ExperimentSpec {
        source: sources.into_iter().next().unwrap(),
        rhs: match args.rhs_file {
            Some(p) => RhsMode::File(p),
            None => RhsMode::FromSolution,
        },
        config: cfg.clone(),
        seed: args.solver.seed,
        repetitions: args.solver.reps,
        trace_path: args.trace,
    };
    let result = run_experiment(&spec)?;
    println!("config: {cfg} threads={threads} seed={}", args.solver.seed);
    println!("{}", result.summary_line());
    println!(
        "cycle_lengths: {}",
        result
            .cycle_lengths
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    Ok(match result.status {
        mpgmres::SolveStatus::Converged => ExitCode::SUCCESS,
        mpgmres::SolveStatus::Exhausted => {
            eprintln!("error: solver exhausted its iteration budget before reaching tol");
            ExitCode::from(2)
        }
    })
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode> {
    let threads = configure_threads(args.solver.threads);
    let sources = matrix_sources(&args.matrix, &args.gen)?;
    let baseline = build_config(&args.solver, parse_preset(&args.baseline, None)?)?;
    let variant = build_config(&args.solver, parse_preset(&args.variant, None)?)?;
    let spec = ComparisonSpec {
        sources,
        baseline,
        variant,
        seed: args.solver.seed,
        repetitions: args.solver.reps,
        calibrate_half: args.calibrate_half,
    };
    let result = run_comparison(&spec)?;
    println!(
        "comparing baseline={} variant={} reps={} threads={threads}",
        args.baseline, args.variant, args.solver.reps
    );
    for row in &result.rows {
        println!(
            "{} n={} m={} baseline={:.4}s variant={:.4}s speedup={:.3}",
            row.matrix_name,
            row.n,
            row.m,
            row.baseline_median_seconds,
            row.variant_median_seconds,
            row.speedup
        );
    }
    println!("geometric mean speedup: {:.3}", result.geometric_mean_speedup);
    if let Some(path) = &args.out {
        std::fs::write(path, comparison_csv(&result))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
