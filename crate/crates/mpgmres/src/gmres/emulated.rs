//! Experimentation path for per-variable width assignments outside the
//! named presets.
//!
//! All storage stays in f64; every variable whose assigned width is low is
//! rounded through f32 at each point where the optimized path would store
//! it. This reproduces the accuracy behavior of an arbitrary assignment
//! without one kernel instantiation per width combination.

use super::cycle::{
    compute_correction, BasisMatrix, GivensRotation, KrylovState, OrthScheme,
};
use super::{
    check_dims, monitor_u_col, GmresConfig, GmresOutcome, PrecondKind, SolveStats, SolveStatus,
};
use crate::error::Result;
use crate::ilu0::{ilu0_apply_into, ilu0_factorize, Ilu0Factors};
use crate::restart::{PolicyState, SMatrixMonitor};
use crate::scalar::{round_low, Width};
use crate::sparse::{backward_error_with_norm, kernels::norm2_unchecked, CsrMatrix};
use crate::trace::{ConvergenceTrace, TraceEvent, TraceMeta, TraceRecord};
use std::time::Instant;

/// Round a value through its assigned storage width.
#[inline]
fn q(w: Width, v: f64) -> f64 {
    match w {
        Width::High => v,
        Width::Low => round_low(v),
    }
}

fn q_slice(w: Width, v: &mut [f64]) {
    if w == Width::Low {
        for x in v {
            *x = round_low(*x);
        }
    }
}

fn orthogonalize_rounded(
    orth: OrthScheme,
    w_vec: &mut [f64],
    basis: &BasisMatrix<f64>,
    w_h: Width,
    w_cand: Width,
) -> Vec<f64> {
    match orth {
        OrthScheme::Mgs => {
            let mut h = Vec::with_capacity(basis.len());
            for v in basis.cols() {
                let mut hij = 0.0;
                for (&wi, &vi) in w_vec.iter().zip(v) {
                    hij += wi * vi;
                }
                hij = q(w_h, hij);
                for (wi, &vi) in w_vec.iter_mut().zip(v) {
                    *wi = q(w_cand, *wi - hij * vi);
                }
                h.push(hij);
            }
            h
        }
        OrthScheme::Cgsr | OrthScheme::Cgs => {
            let passes = if orth == OrthScheme::Cgsr { 2 } else { 1 };
            let mut h = vec![0.0; basis.len()];
            for _ in 0..passes {
                let coeffs: Vec<f64> = basis
                    .cols()
                    .iter()
                    .map(|v| {
                        q(
                            w_h,
                            w_vec.iter().zip(v).map(|(&a, &b)| a * b).sum::<f64>(),
                        )
                    })
                    .collect();
                for (c, v) in coeffs.iter().zip(basis.cols()) {
                    for (wi, &vi) in w_vec.iter_mut().zip(v) {
                        *wi = q(w_cand, *wi - c * vi);
                    }
                }
                for (acc, c) in h.iter_mut().zip(&coeffs) {
                    *acc = q(w_h, *acc + c);
                }
            }
            h
        }
    }
}

pub(crate) fn solve_emulated(
    a: &CsrMatrix<f64>,
    b: &[f64],
    x0: &[f64],
    cfg: &GmresConfig,
) -> Result<GmresOutcome> {
    check_dims(a, b, x0)?;
    let p = cfg.precision;
    let n = a.n_rows();
    let m = cfg.m;
    let setup_t0 = Instant::now();
    let a_norm = a.frobenius_norm();

    let a_res = a.map_values(|v| q(p.matrix_for_residual, v));
    // with a low residual matrix the product runs entirely in low
    // arithmetic: demoted operands and low-width accumulation
    let a_res_low: Option<CsrMatrix<f32>> = if p.matrix_for_residual == Width::Low {
        Some(a_res.convert::<f32>()?)
    } else {
        None
    };
    let a_kry = a.map_values(|v| q(p.matrix_for_krylov, v));
    let b_q: Vec<f64> = b.iter().map(|&v| q(p.rhs, v)).collect();
    let mut x: Vec<f64> = x0.iter().map(|&v| q(p.solution_update, v)).collect();

    let factors: Option<Ilu0Factors<f64>> = match cfg.preconditioner {
        PrecondKind::Identity => None,
        PrecondKind::Ilu0 => {
            let src = a.map_values(|v| q(p.preconditioner, v));
            Some(ilu0_factorize(&src)?.map_values(|v| q(p.preconditioner, v)))
        }
    };
    let setup_seconds = setup_t0.elapsed().as_secs_f64();

    // the emulation allocates everything in f64
    let workspace_bytes = Width::High.bytes()
        * (a_kry.nnz()
            + factors.as_ref().map_or(0, |f| f.nnz())
            + n * (m + 1)
            + n
            + m * (m + 1) / 2
            + 3 * (m + 1)) as u64;

    let apply_precond = |v: &mut [f64], w: Width| {
        if let Some(f) = &factors {
            ilu0_apply_into(f, v);
        }
        q_slice(w, v);
    };

    // the residual z = b - A x runs at the narrowest width among the
    // matrix copy and z itself, so a low assignment suffers the
    // accumulation and cancellation errors of genuine low arithmetic
    let w_res = if p.matrix_for_residual == Width::Low || p.residual_vector == Width::Low {
        Width::Low
    } else {
        Width::High
    };
    let residual_into = |x: &[f64], z: &mut Vec<f64>| {
        if let Some(a_low) = &a_res_low {
            let x_low: Vec<f32> = x.iter().map(|&v| v as f32).collect();
            let mut y_low = vec![0.0f32; n];
            a_low.spmv_into(&x_low, &mut y_low);
            for (zi, &yi) in z.iter_mut().zip(&y_low) {
                *zi = f64::from(yi);
            }
        } else {
            a_res.spmv_into(x, z);
        }
        for (zi, &bi) in z.iter_mut().zip(&b_q) {
            let yi = q(w_res, *zi);
            *zi = q(w_res, q(w_res, bi) - yi);
        }
    };

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
    let mut z = vec![0.0; n];

    for outer in 0..cfg.max_outer {
        residual_into(&x, &mut z);
        let be = backward_error_with_norm(a, a_norm, &x, b)?;
        final_be = be;
        if be <= cfg.tol {
            status = SolveStatus::Converged;
            break;
        }

        let mut r = z.clone();
        apply_precond(&mut r, p.krylov_basis);
        let beta = q(p.hessenberg_and_givens, norm2_unchecked(&r));
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

        let mut basis = BasisMatrix::new(n, m + 1);
        basis.push(r.iter().map(|&v| q(p.krylov_basis, v / beta)).collect())?;
        let mut state = KrylovState {
            basis,
            r_cols: Vec::with_capacity(m),
            rotations: Vec::with_capacity(m),
            s: vec![beta],
            beta,
            j: 0,
            outer,
        };

        let mut cycle_iters = 0usize;
        loop {
            let jj = state.j;
            let mut w = a_kry.spmv(state.basis.col(jj))?;
            q_slice(p.candidate_vector, &mut w);
            apply_precond(&mut w, p.candidate_vector);
            let mut h_col = orthogonalize_rounded(
                cfg.orth,
                &mut w,
                &state.basis,
                p.hessenberg_and_givens,
                p.candidate_vector,
            );
            let h_sub = q(p.hessenberg_and_givens, norm2_unchecked(&w));
            let breakdown = h_sub == 0.0;
            if !breakdown {
                state
                    .basis
                    .push(w.iter().map(|&v| q(p.krylov_basis, v / h_sub)).collect())?;
            }
            // least-squares update with rounded stored coefficients
            let wh = p.hessenberg_and_givens;
            for (i, rot) in state.rotations.iter().enumerate() {
                let (ra, rb) = rot.apply(h_col[i], h_col[i + 1]);
                h_col[i] = q(wh, ra);
                h_col[i + 1] = q(wh, rb);
            }
            let mut rot = GivensRotation::form(h_col[jj], h_sub)?;
            rot.alpha = q(wh, rot.alpha);
            rot.beta = q(wh, rot.beta);
            h_col[jj] = q(wh, rot.alpha * h_col[jj] + rot.beta * h_sub);
            let s_old = state.s[jj];
            state.s[jj] = q(wh, rot.alpha * s_old);
            state.s.push(q(wh, -rot.beta * s_old));
            state.rotations.push(rot);
            state.r_cols.push(h_col);
            state.j += 1;

            cycle_iters += 1;
            total_inner += 1;
            last_arn = state.s[state.j].abs();
            policy.record(last_arn);
            if let Some(mon) = monitor.as_mut() {
                if !breakdown {
                    mon.append_column(monitor_u_col(&state.basis));
                }
            }
            let sampled_be = match cfg.truth_stride {
                Some(stride) if total_inner % stride == 0 => {
                    let u = compute_correction(&state)?;
                    let cand: Vec<f64> = x.iter().zip(&u).map(|(&xi, &ui)| xi + ui).collect();
                    Some(backward_error_with_norm(a, a_norm, &cand, b)?)
                }
                _ => None,
            };
            let restart = breakdown || policy.should_restart(monitor.as_ref())?;
            let event = if breakdown {
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

        let mut u = compute_correction(&state)?;
        q_slice(p.candidate_vector, &mut u);
        for (xi, &ui) in x.iter_mut().zip(&u) {
            *xi = q(p.solution_update, *xi + ui);
        }
    }

    if status != SolveStatus::Converged {
        final_be = backward_error_with_norm(a, a_norm, &x, b)?;
        // the last permitted cycle may itself reach the tolerance
        if final_be <= cfg.tol {
            status = SolveStatus::Converged;
        }
    }

    residual_into(&x, &mut z);
    let mut r = z.clone();
    apply_precond(&mut r, p.krylov_basis);
    let final_precond_residual = norm2_unchecked(&r);

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
        x,
        trace,
        status,
        stats: SolveStats {
            inner_iterations: total_inner,
            cycles: cycle_lengths.len(),
            cycle_lengths,
            cycle_betas,
            final_precond_residual,
            final_backward_error: final_be,
            correction_width: Width::High,
            workspace_bytes,
            setup_seconds,
            solve_seconds,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmres::{gmres_solve, PrecisionAssignment};
    use crate::restart::RestartPolicy;
    use crate::sparse::gen_convdiff2d;

    fn test_problem() -> (CsrMatrix<f64>, Vec<f64>) {
        let a = gen_convdiff2d(10, 1.0).unwrap();
        let n = a.n_rows();
        let x_true: Vec<f64> = (0..n).map(|i| 0.2 + 0.007 * i as f64).collect();
        let b = a.spmv(&x_true).unwrap();
        (a, b)
    }

    #[test]
    fn limited_mixed_reaches_tight_tolerance() {
        let (a, b) = test_problem();
        let n = a.n_rows();
        let mut cfg = GmresConfig::new(40);
        cfg.precision = PrecisionAssignment::limited_mixed();
        cfg.policy = RestartPolicy::FixedCount(40);
        cfg.tol = 1e-12;
        let out = gmres_solve(&a, &b, &vec![0.0; n], &cfg).unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        assert!(out.stats.final_backward_error <= 1e-12);
    }

    #[test]
    fn low_solution_update_caps_accuracy() {
        let (a, b) = test_problem();
        let n = a.n_rows();
        let mut cfg = GmresConfig::new(40);
        cfg.precision = PrecisionAssignment::double();
        cfg.precision.solution_update = Width::Low;
        cfg.tol = 1e-13;
        cfg.max_outer = 10;
        let out = gmres_solve(&a, &b, &vec![0.0; n], &cfg).unwrap();
        assert_eq!(out.status, SolveStatus::Exhausted);
        // the stored solution is f32-rounded, so its error floor sits near
        // single-precision round-off
        assert!(out.stats.final_backward_error > 1e-10);
    }

    #[test]
    fn all_high_custom_matches_double_preset_closely() {
        let (a, b) = test_problem();
        let n = a.n_rows();
        let mut cfg = GmresConfig::new(40);
        // force the emulation path with a width set equal to DOUBLE except
        // for one low assignment on the rhs of a well-scaled problem
        cfg.precision = PrecisionAssignment::double();
        cfg.precision.hessenberg_and_givens = Width::High;
        let direct = gmres_solve(&a, &b, &vec![0.0; n], &cfg).unwrap();
        let emulated = solve_emulated(&a, &b, &vec![0.0; n], &cfg).unwrap();
        assert_eq!(emulated.status, SolveStatus::Converged);
        for (xe, xd) in emulated.x.iter().zip(&direct.x) {
            assert!((xe - xd).abs() <= 1e-9 * xd.abs().max(1.0));
        }
    }
}
