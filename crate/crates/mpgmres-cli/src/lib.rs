//! Experiment-runner library behind the `mpgmres` binary: matrix loading
//! and generation, seeded problem construction, repeated timed solves, and
//! preset-versus-preset speedup comparisons.

use anyhow::{bail, Context, Result};
use mpgmres::gmres::{gmres_solve, GmresConfig};
use mpgmres::matrix_market::read_matrix_market;
use mpgmres::sparse::gen_convdiff2d;
use mpgmres::trace::write_csv;
use mpgmres::{CsrMatrix, SolveStatus};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

/// Where the system matrix comes from.
#[derive(Debug, Clone)]
pub enum MatrixSource {
    /// Matrix Market file.
    File(PathBuf),
    /// Convection-diffusion generator: k x k grid, convection strength beta.
    Generated { k: usize, beta: f64 },
}

impl MatrixSource {
    pub fn name(&self) -> String {
        match self {
            MatrixSource::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
            MatrixSource::Generated { k, beta } => format!("convdiff2d_{k}x{k}_beta{beta}"),
        }
    }

    /// Parse a generator spec `K` or `K,BETA`.
    pub fn parse_generated(s: &str) -> Result<Self> {
        let mut parts = s.split(',');
        let k: usize = parts
            .next()
            .unwrap()
            .trim()
            .parse()
            .with_context(|| format!("invalid grid size in generator spec '{s}'"))?;
        let beta: f64 = match parts.next() {
            Some(b) => b
                .trim()
                .parse()
                .with_context(|| format!("invalid beta in generator spec '{s}'"))?,
            None => 1.0,
        };
        if parts.next().is_some() {
            bail!("generator spec '{s}' has too many fields (expected K or K,BETA)");
        }
        Ok(MatrixSource::Generated { k, beta })
    }
}

/// Where the right-hand side comes from.
#[derive(Debug, Clone, Default)]
pub enum RhsMode {
    /// b = A x_true with x_true drawn uniformly from (0, 1) under the
    /// experiment seed, so the true solution is known.
    #[default]
    FromSolution,
    /// Explicit vector file: one entry per line.
    File(PathBuf),
}

/// One experiment: a matrix, a right-hand side, a solver configuration,
/// and a repetition protocol.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub source: MatrixSource,
    pub rhs: RhsMode,
    pub config: GmresConfig,
    pub seed: u64,
    pub repetitions: usize,
    /// Convergence-trace CSV destination for the last repetition.
    pub trace_path: Option<PathBuf>,
}

/// Summary of a completed experiment.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub matrix_name: String,
    pub n: usize,
    pub n_nz: usize,
    pub status: SolveStatus,
    pub final_backward_error: f64,
    pub inner_iterations: usize,
    pub cycle_lengths: Vec<usize>,
    /// Forward error ‖x − x_true‖₂ when the solution is known.
    pub forward_error: Option<f64>,
    pub median_seconds: f64,
    pub min_seconds: f64,
    pub max_seconds: f64,
    pub setup_seconds: f64,
}

impl ExperimentResult {
    /// One-line human-readable summary.
    pub fn summary_line(&self) -> String {
        let mut line = format!(
            "{} n={} nnz={} status={} backward_error={:.3e} iters={} cycles={} \
             median={:.4}s min={:.4}s max={:.4}s",
            self.matrix_name,
            self.n,
            self.n_nz,
            match self.status {
                SolveStatus::Converged => "converged",
                SolveStatus::Exhausted => "exhausted",
            },
            self.final_backward_error,
            self.inner_iterations,
            self.cycle_lengths.len(),
            self.median_seconds,
            self.min_seconds,
            self.max_seconds,
        );
        if let Some(fe) = self.forward_error {
            let _ = write!(line, " forward_error={fe:.3e}");
        }
        line
    }
}

pub fn load_matrix(source: &MatrixSource) -> Result<CsrMatrix<f64>> {
    match source {
        MatrixSource::File(path) => read_matrix_market(path)
            .with_context(|| format!("cannot read matrix file {}", path.display())),
        MatrixSource::Generated { k, beta } => {
            gen_convdiff2d(*k, *beta).context("cannot generate matrix")
        }
    }
}

/// Uniform-(0,1) solution vector under the experiment seed.
pub fn seeded_solution(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()
}

/// Build (x_true, b) for a matrix under the given rhs mode.
pub fn build_rhs(
    a: &CsrMatrix<f64>,
    mode: &RhsMode,
    seed: u64,
) -> Result<(Option<Vec<f64>>, Vec<f64>)> {
    match mode {
        RhsMode::FromSolution => {
            let x_true = seeded_solution(a.n_cols(), seed);
            let b = a.spmv(&x_true)?;
            Ok((Some(x_true), b))
        }
        RhsMode::File(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read rhs file {}", path.display()))?;
            let b: Vec<f64> = text
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .with_context(|| format!("invalid rhs entry '{t}'"))
                })
                .collect::<Result<_>>()?;
            if b.len() != a.n_rows() {
                bail!(
                    "rhs file has {} entries, matrix has {} rows",
                    b.len(),
                    a.n_rows()
                );
            }
            Ok((None, b))
        }
    }
}

fn median(sorted: &[f64]) -> f64 {
    let k = sorted.len();
    if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

/// Run the configured solve `repetitions` times and summarize.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    if spec.repetitions < 1 {
        bail!("repetitions must be at least 1");
    }
    let a = load_matrix(&spec.source)?;
    let (x_true, b) = build_rhs(&a, &spec.rhs, spec.seed)?;
    let x0 = vec![0.0; a.n_cols()];

    let mut times = Vec::with_capacity(spec.repetitions);
    let mut last = None;
    for _ in 0..spec.repetitions {
        let outcome = gmres_solve(&a, &b, &x0, &spec.config)?;
        times.push(outcome.stats.solve_seconds);
        last = Some(outcome);
    }
    let last = last.unwrap();
    times.sort_by(|p, q| p.partial_cmp(q).unwrap());

    if let Some(path) = &spec.trace_path {
        let mut trace = last.trace.clone();
        trace.meta.matrix_name = spec.source.name();
        write_csv(&trace, path)
            .with_context(|| format!("cannot write trace to {}", path.display()))?;
    }

    let forward_error = x_true.as_ref().map(|xt| {
        last.x
            .iter()
            .zip(xt)
            .map(|(xi, ti)| (xi - ti) * (xi - ti))
            .sum::<f64>()
            .sqrt()
    });

    Ok(ExperimentResult {
        matrix_name: spec.source.name(),
        n: a.n_rows(),
        n_nz: a.nnz(),
        status: last.status,
        final_backward_error: last.stats.final_backward_error,
        inner_iterations: last.stats.inner_iterations,
        cycle_lengths: last.stats.cycle_lengths.clone(),
        forward_error,
        median_seconds: median(&times),
        min_seconds: times[0],
        max_seconds: *times.last().unwrap(),
        setup_seconds: last.stats.setup_seconds,
    })
}

/// Baseline-versus-variant timing comparison over a matrix set.
#[derive(Debug, Clone)]
pub struct ComparisonSpec {
    pub sources: Vec<MatrixSource>,
    pub baseline: GmresConfig,
    pub variant: GmresConfig,
    pub seed: u64,
    pub repetitions: usize,
    /// Two-phase protocol: first run the baseline until it reaches the
    /// tolerance with unbounded cycle length, then re-time both
    /// configurations restarting after half that many iterations.
    pub calibrate_half: bool,
}

#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub matrix_name: String,
    pub n: usize,
    pub baseline_median_seconds: f64,
    pub variant_median_seconds: f64,
    /// baseline median time / variant median time.
    pub speedup: f64,
    pub baseline_backward_error: f64,
    pub variant_backward_error: f64,
    /// Cycle length actually used (calibrated or configured).
    pub m: usize,
}

#[derive(Debug, Clone)]
pub struct ComparisonResult {
    pub rows: Vec<ComparisonRow>,
    pub geometric_mean_speedup: f64,
}

pub fn geometric_mean(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
}

pub const COMPARISON_CSV_HEADER: &str =
    "matrix,n,m,baseline_median_s,variant_median_s,speedup,baseline_backward_error,variant_backward_error";

pub fn comparison_csv(result: &ComparisonResult) -> String {
    let mut out = String::from(COMPARISON_CSV_HEADER);
    out.push('\n');
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.matrix_name,
            r.n,
            r.m,
            r.baseline_median_seconds,
            r.variant_median_seconds,
            r.speedup,
            r.baseline_backward_error,
            r.variant_backward_error,
        );
    }
    let _ = writeln!(out, "geometric_mean,,,,,{:.16e},,", result.geometric_mean_speedup);
    out
}

fn timed_medians(
    a: &CsrMatrix<f64>,
    b: &[f64],
    cfg: &GmresConfig,
    repetitions: usize,
) -> Result<(f64, f64)> {
    let x0 = vec![0.0; a.n_cols()];
    let mut times = Vec::with_capacity(repetitions);
    let mut be = f64::NAN;
    for _ in 0..repetitions {
        let outcome = gmres_solve(a, b, &x0, cfg)?;
        times.push(outcome.stats.solve_seconds);
        be = outcome.stats.final_backward_error;
    }
    times.sort_by(|p, q| p.partial_cmp(q).unwrap());
    Ok((median(&times), be))
}

pub fn run_comparison(spec: &ComparisonSpec) -> Result<ComparisonResult> {
    if spec.sources.is_empty() {
        bail!("comparison needs at least one matrix");
    }
    if spec.repetitions < 1 {
        bail!("repetitions must be at least 1");
    }
    let same_policy = format!("{}", spec.baseline.policy) == format!("{}", spec.variant.policy);
    if spec.baseline.m != spec.variant.m
        || spec.baseline.tol != spec.variant.tol
        || !same_policy
    {
        bail!("mismatched specs: baseline and variant must share m, tol, and restart policy");
    }

    let mut rows = Vec::with_capacity(spec.sources.len());
    for source in &spec.sources {
        let a = load_matrix(source)?;
        let (_, b) = build_rhs(&a, &RhsMode::FromSolution, spec.seed)?;

        let (mut base_cfg, mut var_cfg) = (spec.baseline.clone(), spec.variant.clone());
        if spec.calibrate_half {
            // phase one: how many iterations does the baseline need in a
            // single unrestarted sweep?
            let mut calibrate = spec.baseline.clone();
            calibrate.m = a.n_rows();
            calibrate.policy = mpgmres::RestartPolicy::FixedCount(a.n_rows());
            calibrate.max_outer = 1;
            let x0 = vec![0.0; a.n_cols()];
            let probe = gmres_solve(&a, &b, &x0, &calibrate)?;
            if probe.status != SolveStatus::Converged {
                bail!(
                    "calibration run on {} did not reach tol {:e}",
                    source.name(),
                    calibrate.tol
                );
            }
            let half = (probe.stats.inner_iterations / 2).max(1);
            for cfg in [&mut base_cfg, &mut var_cfg] {
                cfg.m = half;
                cfg.policy = mpgmres::RestartPolicy::FixedCount(half);
            }
        }

        let (base_t, base_be) = timed_medians(&a, &b, &base_cfg, spec.repetitions)?;
        let (var_t, var_be) = timed_medians(&a, &b, &var_cfg, spec.repetitions)?;
        rows.push(ComparisonRow {
            matrix_name: source.name(),
            n: a.n_rows(),
            baseline_median_seconds: base_t,
            variant_median_seconds: var_t,
            speedup: base_t / var_t,
            baseline_backward_error: base_be,
            variant_backward_error: var_be,
            m: base_cfg.m,
        });
    }
    let speedups: Vec<f64> = rows.iter().map(|r| r.speedup).collect();
    Ok(ComparisonResult {
        geometric_mean_speedup: geometric_mean(&speedups),
        rows,
    })
}

/// Resolve the worker-thread count: explicit flag, then the
/// `MPGMRES_THREADS` environment variable, then all cores; installs the
/// global thread pool on first use.
pub fn configure_threads(requested: Option<usize>) -> usize {
    let from_env = std::env::var("MPGMRES_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0);
    let threads = requested.or(from_env);
    if let Some(t) = threads {
        // a second installation attempt in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        t
    } else {
        rayon::current_num_threads()
    }
}
