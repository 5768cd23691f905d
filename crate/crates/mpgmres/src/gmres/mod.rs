//! Restarted, left-preconditioned GMRES generic over floating-point
//! precision.
//!
//! The outer loop runs in high precision: it forms the residual
//! `z = b - A x`, tests the normwise backward error, and applies the
//! correction `x <- x + u`. Each restart cycle runs the Arnoldi process and
//! its Givens least-squares in the configured correction precision.
//!
//! The named presets map onto uniform-precision kernels with casts at the
//! cycle boundary (downcast z, upcast u). Per-variable width assignments
//! outside the presets run on a separate experimentation path that keeps
//! f64 storage and rounds each designated variable through f32.

mod cycle;
mod emulated;

pub use cycle::{
    compute_correction, least_squares_update, orthogonalize_cgs, orthogonalize_cgsr,
    orthogonalize_mgs, BasisMatrix, Cycle, GivensRotation, KrylovState, OrthScheme, PrecondOp,
};

use crate::error::{Error, Result};
use crate::ilu0::ilu0_factorize;
use crate::restart::{PolicyState, RestartPolicy, SMatrixMonitor};
use crate::scalar::{convert_slice, upcast_slice, Scalar, Width};
use crate::sparse::{backward_error_with_norm, CsrMatrix};
use crate::trace::{ConvergenceTrace, TraceEvent, TraceMeta, TraceRecord};
use std::time::Instant;

/// Storage width of every solver variable, individually assignable.
///
/// The refinement variables (`matrix_for_residual`, `rhs`,
/// `solution_update`, `residual_vector`) govern the outer loop; the
/// remaining correction variables govern the restart cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecisionAssignment {
    pub matrix_for_residual: Width,
    pub rhs: Width,
    pub solution_update: Width,
    /// The residual z = b - A x.
    pub residual_vector: Width,
    pub matrix_for_krylov: Width,
    pub preconditioner: Width,
    /// The basis V.
    pub krylov_basis: Width,
    /// The candidate vector w inside each Arnoldi step.
    pub candidate_vector: Width,
    /// H, the rotation coefficients, and s.
    pub hessenberg_and_givens: Width,
}

impl PrecisionAssignment {
    const fn uniform(w: Width) -> Self {
        Self {
            matrix_for_residual: w,
            rhs: w,
            solution_update: w,
            residual_vector: w,
            matrix_for_krylov: w,
            preconditioner: w,
            krylov_basis: w,
            candidate_vector: w,
            hessenberg_and_givens: w,
        }
    }

    /// Everything in high precision.
    pub const fn double() -> Self {
        Self::uniform(Width::High)
    }

    /// Everything in low precision.
    pub const fn single() -> Self {
        Self::uniform(Width::Low)
    }

    /// High-precision refinement variables, low-precision correction
    /// variables.
    pub const fn mixed() -> Self {
        Self {
            matrix_for_residual: Width::High,
            rhs: Width::High,
            solution_update: Width::High,
            residual_vector: Width::Low,
            ..Self::uniform(Width::Low)
        }
    }

    /// Low precision only for the Krylov matrix copy, the preconditioner,
    /// and the basis.
    pub const fn limited_mixed() -> Self {
        Self {
            matrix_for_krylov: Width::Low,
            preconditioner: Width::Low,
            krylov_basis: Width::Low,
            ..Self::uniform(Width::High)
        }
    }

    /// High-precision solver with a low-precision preconditioner.
    pub const fn single_ilu() -> Self {
        Self {
            preconditioner: Width::Low,
            ..Self::uniform(Width::High)
        }
    }

    /// Preset name, or "custom" when none matches.
    pub fn name(&self) -> &'static str {
        if *self == Self::double() {
            "double"
        } else if *self == Self::single() {
            "single"
        } else if *self == Self::mixed() {
            "mixed"
        } else if *self == Self::limited_mixed() {
            "limited-mixed"
        } else if *self == Self::single_ilu() {
            "single-ilu"
        } else {
            "custom"
        }
    }
}

/// Preconditioner selection for a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecondKind {
    Identity,
    Ilu0,
}

/// Solver configuration.
#[derive(Debug, Clone)]
pub struct GmresConfig {
    /// Maximum inner iterations per restart cycle.
    pub m: usize,
    /// Target normwise backward error.
    pub tol: f64,
    /// Maximum restart cycles.
    pub max_outer: usize,
    pub orth: OrthScheme,
    pub precision: PrecisionAssignment,
    pub policy: RestartPolicy,
    pub preconditioner: PrecondKind,
    /// Materialize the candidate solution and record its true backward
    /// error every this many inner iterations; `None` records it only in
    /// the terminal trace record.
    pub truth_stride: Option<usize>,
}

impl GmresConfig {
    /// Configuration with the given cycle length and library defaults:
    /// tolerance 1e-10, 50 cycles, MGS, double precision, ILU(0), fixed
    /// restarts at `m`.
    pub fn new(m: usize) -> Self {
        Self {
            m,
            tol: 1e-10,
            max_outer: 50,
            orth: OrthScheme::Mgs,
            precision: PrecisionAssignment::double(),
            policy: RestartPolicy::FixedCount(m),
            preconditioner: PrecondKind::Ilu0,
            truth_stride: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::InvalidConfig("m must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be positive".into()));
        }
        if self.max_outer < 1 {
            return Err(Error::InvalidConfig("max_outer must be at least 1".into()));
        }
        if self.truth_stride == Some(0) {
            return Err(Error::InvalidConfig("truth stride must be at least 1".into()));
        }
        self.policy.validate()
    }
}

impl std::fmt::Display for GmresConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "preset={} orth={} policy={} m={} tol={:e} max_outer={} precond={}",
            self.precision.name(),
            self.orth,
            self.policy,
            self.m,
            self.tol,
            self.max_outer,
            match self.preconditioner {
                PrecondKind::Identity => "none",
                PrecondKind::Ilu0 => "ilu0",
            }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    Exhausted,
}

/// Measured facts about a completed solve.
#[derive(Debug, Clone)]
pub struct SolveStats {
    pub inner_iterations: usize,
    pub cycles: usize,
    /// Inner iterations per cycle, in order.
    pub cycle_lengths: Vec<usize>,
    /// Preconditioned residual norm at the start of each cycle.
    pub cycle_betas: Vec<f64>,
    /// Preconditioned residual norm at termination.
    pub final_precond_residual: f64,
    pub final_backward_error: f64,
    /// Storage width of the correction-space variables (basis, candidate,
    /// Hessenberg) actually allocated by the solve.
    pub correction_width: Width,
    /// Bytes of the correction-space working set: Krylov matrix copy,
    /// factors, basis, candidate vector, triangular factor, rotations, s.
    pub workspace_bytes: u64,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub trace: ConvergenceTrace,
    pub status: SolveStatus,
    pub stats: SolveStats,
}

/// Solve `A x = b` from the initial guess `x0` under the given
/// configuration; the matrix and vectors are supplied in high precision
/// and reduced-precision copies are built internally as assigned.
pub fn gmres_solve(
    a: &CsrMatrix<f64>,
    b: &[f64],
    x0: &[f64],
    cfg: &GmresConfig,
) -> Result<GmresOutcome> {
    check_dims(a, b, x0)?;
    cfg.validate()?;
    let p = &cfg.precision;
    if *p == PrecisionAssignment::double() {
        solve_generic::<f64, f64>(a, b, x0, cfg, false)
    } else if *p == PrecisionAssignment::single() {
        solve_generic::<f32, f32>(a, b, x0, cfg, false)
    } else if *p == PrecisionAssignment::mixed() {
        solve_generic::<f64, f32>(a, b, x0, cfg, false)
    } else if *p == PrecisionAssignment::single_ilu() {
        solve_generic::<f64, f64>(a, b, x0, cfg, true)
    } else {
        // limited-mixed and custom assignments: experimentation path
        emulated::solve_emulated(a, b, x0, cfg)
    }
}

fn check_dims(a: &CsrMatrix<f64>, b: &[f64], x0: &[f64]) -> Result<()> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            n_rows: a.n_rows(),
            n_cols: a.n_cols(),
        });
    }
    if b.len() != a.n_rows() {
        return Err(Error::Dimension {
            context: "gmres_solve b",
            expected: a.n_rows(),
            found: b.len(),
        });
    }
    if x0.len() != a.n_cols() {
        return Err(Error::Dimension {
            context: "gmres_solve x0",
            expected: a.n_cols(),
            found: x0.len(),
        });
    }
    Ok(())
}

/// Inner products of the newest basis column against all previous ones,
/// accumulated in high precision for the orthogonality monitor.
fn monitor_u_col<T: Scalar>(basis: &BasisMatrix<T>) -> Vec<f64> {
    let k = basis.len() - 1;
    let v_new = basis.col(k);
    (0..k)
        .map(|i| {
            basis
                .col(i)
                .iter()
                .zip(v_new)
                .map(|(&a, &b)| a.as_f64() * b.as_f64())
                .sum()
        })
        .collect()
}

/// Uniform-kernel driver: residual and solution update in `R`, the restart
/// cycles in `C`, casts at the boundary. `low_precond` factorizes the
/// preconditioner in low precision inside an otherwise `C`-width cycle.
fn solve_generic<R: Scalar, C: Scalar>(
    a: &CsrMatrix<f64>,
    b: &[f64],
    x0: &[f64],
    cfg: &GmresConfig,
    low_precond: bool,
) -> Result<GmresOutcome> {
    let n = a.n_rows();
    let m = cfg.m;
    let setup_t0 = Instant::now();
    let a_norm = a.frobenius_norm();

    let a_res: CsrMatrix<R> = a.convert()?;
    let b_r: Vec<R> = convert_slice(b)?;
    let mut x_r: Vec<R> = convert_slice(x0)?;

    let a_cor: CsrMatrix<C> = a.convert()?;
    let precond: PrecondOp<C> = match (cfg.preconditioner, low_precond) {
        (PrecondKind::Identity, _) => PrecondOp::Identity,
        (PrecondKind::Ilu0, false) => PrecondOp::Native(ilu0_factorize(&a_cor)?),
        (PrecondKind::Ilu0, true) => PrecondOp::LowCast(ilu0_factorize(&a.convert::<f32>()?)?),
    };
    let setup_seconds = setup_t0.elapsed().as_secs_f64();

    let precond_width_bytes = if low_precond {
        Width::Low.bytes()
    } else {
        C::WIDTH.bytes()
    };
    let workspace_bytes = C::WIDTH.bytes()
        * (a_cor.nnz() + n * (m + 1) + n + m * (m + 1) / 2 + 3 * (m + 1)) as u64
        + precond_width_bytes * precond.nnz() as u64;

    let mut trace = ConvergenceTrace::new(TraceMeta {
        matrix_name: String::new(),
        n,
        n_nz: a.nnz(),
        config: cfg.to_string(),
    });
    let mut policy = PolicyState::new(cfg.policy.clone(), m);

    let solve_t0 = Instant::now();
    let mut status = SolveStatus::Exhausted;
    let mut cycle_lengths = Vec::new();
    let mut cycle_betas = Vec::new();
    let mut total_inner = 0usize;
    let mut last_arn = 0.0;
    let mut final_be = f64::NAN;
    let mut z_r = vec![R::zero(); n];

    for outer in 0..cfg.max_outer {
        a_res.spmv_into(&x_r, &mut z_r);
        for (zi, &bi) in z_r.iter_mut().zip(&b_r) {
            *zi = bi - *zi;
        }
        let x_hi = upcast_slice(&x_r);
        let be = backward_error_with_norm(a, a_norm, &x_hi, b)?;
        final_be = be;
        if be <= cfg.tol {
            status = SolveStatus::Converged;
            break;
        }

        let z_c: Vec<C> = convert_slice(&z_r)?;
        let mut cycle = Cycle::new(&a_cor, &precond, &z_c, cfg.orth, m, outer)?;
        let beta = cycle.beta().as_f64();
        if beta == 0.0 {
            // the working-precision residual quantized to zero: no further
            // correction is expressible at this width
            break;
        }
        cycle_betas.push(beta);
        policy.cycle_start(beta);
        let mut monitor = if cfg.policy.needs_monitor() {
            let mut mon = SMatrixMonitor::new();
            mon.append_column(Vec::new());
            Some(mon)
        } else {
            None
        };

        let mut cycle_iters = 0usize;
        loop {
            let step = cycle.step()?;
            cycle_iters += 1;
            total_inner += 1;
            last_arn = cycle.arnoldi_residual();
            policy.record(last_arn);
            if let Some(mon) = monitor.as_mut() {
                if !step.breakdown {
                    mon.append_column(monitor_u_col(&cycle.state.basis));
                }
            }
            let sampled_be = match cfg.truth_stride {
                Some(stride) if total_inner % stride == 0 => {
                    let u = upcast_slice(&cycle.correction()?);
                    let cand: Vec<f64> = x_hi.iter().zip(&u).map(|(&xi, &ui)| xi + ui).collect();
                    Some(backward_error_with_norm(a, a_norm, &cand, b)?)
                }
                _ => None,
            };
            let restart = step.breakdown || policy.should_restart(monitor.as_ref())?;
            let event = if step.breakdown {
                TraceEvent::Breakdown
            } else if restart {
                TraceEvent::Restart
            } else {
                TraceEvent::None
            };
            trace.records.push(TraceRecord {
                outer,
                inner: cycle_iters,
                arnoldi_residual: last_arn,
                true_backward_error: sampled_be,
                event,
                elapsed: solve_t0.elapsed().as_secs_f64(),
            });
            if restart {
                break;
            }
        }
        policy.cycle_end();
        cycle_lengths.push(cycle_iters);

        let u = cycle.correction()?;
        for (xi, &ui) in x_r.iter_mut().zip(&u) {
            *xi += R::from_f64(ui.as_f64());
        }
    }

    if status != SolveStatus::Converged {
        let x_hi = upcast_slice(&x_r);
        final_be = backward_error_with_norm(a, a_norm, &x_hi, b)?;
        // the last permitted cycle may itself reach the tolerance
        if final_be <= cfg.tol {
            status = SolveStatus::Converged;
        }
    }

    // preconditioned residual norm at termination, for contraction checks
    a_res.spmv_into(&x_r, &mut z_r);
    for (zi, &bi) in z_r.iter_mut().zip(&b_r) {
        *zi = bi - *zi;
    }
    let mut r_c: Vec<C> = convert_slice(&z_r)?;
    precond.apply_in_place(&mut r_c);
    let final_precond_residual = r_c.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt();

    let solve_seconds = solve_t0.elapsed().as_secs_f64();
    trace.records.push(TraceRecord {
        outer: cycle_lengths.len(),
        inner: 0,
        arnoldi_residual: last_arn,
        true_backward_error: Some(final_be),
        event: match status {
            SolveStatus::Converged => TraceEvent::Converged,
            SolveStatus::Exhausted => TraceEvent::Exhausted,
        },
        elapsed: solve_seconds,
    });

    Ok(GmresOutcome {
        x: upcast_slice(&x_r),
        trace,
        status,
        stats: SolveStats {
            inner_iterations: total_inner,
            cycles: cycle_lengths.len(),
            cycle_lengths,
            cycle_betas,
            final_precond_residual,
            final_backward_error: final_be,
            correction_width: C::WIDTH,
            workspace_bytes,
            setup_seconds,
            solve_seconds,
        },
    })
}
