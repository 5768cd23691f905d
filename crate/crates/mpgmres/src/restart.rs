//! Restart-initiation strategies and the S-matrix orthogonality-loss
//! monitor.
//!
//! Every policy also restarts unconditionally once a cycle reaches `m`
//! inner iterations, and never restarts before the first iteration of a
//! cycle completes.

use crate::error::{Error, Result};

/// Norm used by the orthogonality-loss monitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// 2-norm estimated with a fixed number of power iterations.
    Spectral { power_iters: usize },
    Frobenius,
}

/// When to initiate a restart within a GMRES cycle.
#[derive(Debug, Clone, PartialEq)]
pub enum RestartPolicy {
    /// Restart after a fixed number of inner iterations.
    FixedCount(usize),
    /// Restart once the Arnoldi residual has improved by the factor `delta`
    /// relative to the cycle-start preconditioned residual norm.
    ImprovementThreshold { delta: f64 },
    /// First cycle restarts on the `delta` threshold (falling back to `m`),
    /// recording its length; later cycles repeat that length.
    ImprovementThenRepeat { delta: f64 },
    /// Restart when the Arnoldi residual improved by less than `factor`
    /// over the last `ceil(window_fraction * m)` inner iterations.
    StallDetect { window_fraction: f64, factor: f64 },
    /// Restart when the monitored norm of the S matrix reaches `threshold`.
    OrthLoss { norm: NormKind, threshold: f64 },
}

impl RestartPolicy {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RestartPolicy::FixedCount(c) => c >= 1,
            RestartPolicy::ImprovementThreshold { delta }
            | RestartPolicy::ImprovementThenRepeat { delta } => delta > 0.0 && delta < 1.0,
            RestartPolicy::StallDetect {
                window_fraction,
                factor,
            } => window_fraction > 0.0 && window_fraction <= 1.0 && factor > 1.0,
            RestartPolicy::OrthLoss { threshold, norm } => {
                threshold > 0.0
                    && match norm {
                        NormKind::Spectral { power_iters } => power_iters >= 1,
                        NormKind::Frobenius => true,
                    }
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid policy {self:?}")))
        }
    }

    pub fn needs_monitor(&self) -> bool {
        matches!(self, RestartPolicy::OrthLoss { .. })
    }

    /// Parse the CLI policy grammar: `fixed:M`, `improve:DELTA`,
    /// `improve-repeat:DELTA`, `stall:W:F`, `orthloss:spectral:I:TAU`,
    /// `orthloss:frob:TAU`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::PolicyParse(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        let policy = match parts.as_slice() {
            ["fixed", m] => RestartPolicy::FixedCount(m.parse().map_err(|_| bad())?),
            ["improve", d] => RestartPolicy::ImprovementThreshold {
                delta: d.parse().map_err(|_| bad())?,
            },
            ["improve-repeat", d] => RestartPolicy::ImprovementThenRepeat {
                delta: d.parse().map_err(|_| bad())?,
            },
            ["stall", w, f] => RestartPolicy::StallDetect {
                window_fraction: w.parse().map_err(|_| bad())?,
                factor: f.parse().map_err(|_| bad())?,
            },
            ["orthloss", "spectral", i, tau] => RestartPolicy::OrthLoss {
                norm: NormKind::Spectral {
                    power_iters: i.parse().map_err(|_| bad())?,
                },
                threshold: tau.parse().map_err(|_| bad())?,
            },
            ["orthloss", "frob", tau] => RestartPolicy::OrthLoss {
                norm: NormKind::Frobenius,
                threshold: tau.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        policy.validate()?;
        Ok(policy)
    }
}

impl std::fmt::Display for RestartPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RestartPolicy::FixedCount(m) => write!(f, "fixed:{m}"),
            RestartPolicy::ImprovementThreshold { delta } => write!(f, "improve:{delta}"),
            RestartPolicy::ImprovementThenRepeat { delta } => write!(f, "improve-repeat:{delta}"),
            RestartPolicy::StallDetect {
                window_fraction,
                factor,
            } => write!(f, "stall:{window_fraction}:{factor}"),
            RestartPolicy::OrthLoss {
                norm: NormKind::Spectral { power_iters },
                threshold,
            } => write!(f, "orthloss:spectral:{power_iters}:{threshold}"),
            RestartPolicy::OrthLoss {
                norm: NormKind::Frobenius,
                threshold,
            } => write!(f, "orthloss:frob:{threshold}"),
        }
    }
}

/// Incrementally built S matrix `S_k = (I + U_k)^{-1} U_k`, with `U_k` the
/// strictly upper part of `V_k^T V_k`. The basis is linearly dependent
/// exactly when the spectral norm of S reaches one.
#[derive(Debug, Clone, Default)]
pub struct SMatrixMonitor {
    /// Strictly-upper columns of U; column k holds rows 0..k.
    u_cols: Vec<Vec<f64>>,
    /// Strictly-upper columns of S, same layout.
    s_cols: Vec<Vec<f64>>,
    frob_sq: f64,
}

impl SMatrixMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of basis columns seen so far.
    pub fn k(&self) -> usize {
        self.u_cols.len()
    }

    /// Strictly-upper S entry; `i < j` required to be nonzero.
    pub fn s_entry(&self, i: usize, j: usize) -> f64 {
        if i < j {
            self.s_cols[j][i]
        } else {
            0.0
        }
    }

    /// Append the next basis column given its inner products with every
    /// previous column: `u_col[i] = v_i . v_new`. The triangular update
    /// costs O(k^2) on top of the 2nk needed for the inner products.
    pub fn append_column(&mut self, u_col: Vec<f64>) {
        let k = self.u_cols.len();
        debug_assert_eq!(u_col.len(), k);
        // solve (I + U_k) s = u by back-substitution on the unit upper factor
        let mut s = u_col.clone();
        for i in (0..k).rev() {
            let mut acc = s[i];
            for j in (i + 1)..k {
                acc -= self.u_cols[j][i] * s[j];
            }
            s[i] = acc;
        }
        self.frob_sq += s.iter().map(|v| v * v).sum::<f64>();
        self.u_cols.push(u_col);
        self.s_cols.push(s);
    }

    /// Frobenius norm of S; non-decreasing as columns are appended.
    pub fn frobenius_norm(&self) -> f64 {
        self.frob_sq.sqrt()
    }

    /// Power-method estimate of the spectral norm of S, run on `S^T S` with
    /// a deterministic all-ones start vector.
    pub fn spectral_norm(&self, power_iters: usize) -> f64 {
        let k = self.u_cols.len();
        if k == 0 {
            return 0.0;
        }
        let mut x = vec![1.0 / (k as f64).sqrt(); k];
        let mut sx = vec![0.0; k];
        for _ in 0..power_iters {
            self.apply_s(&x, &mut sx);
            let y = self.apply_st(&sx);
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            for (xi, yi) in x.iter_mut().zip(&y) {
                *xi = yi / norm;
            }
        }
        self.apply_s(&x, &mut sx);
        sx.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn apply_s(&self, x: &[f64], out: &mut [f64]) {
        let k = x.len();
        for (i, oi) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in (i + 1)..k {
                acc += self.s_cols[j][i] * x[j];
            }
            *oi = acc;
        }
    }

    fn apply_st(&self, x: &[f64]) -> Vec<f64> {
        let k = x.len();
        (0..k)
            .map(|j| {
                let mut acc = 0.0;
                for i in 0..j {
                    acc += self.s_cols[j][i] * x[i];
                }
                acc
            })
            .collect()
    }

    fn monitored_norm(&self, kind: NormKind) -> f64 {
        match kind {
            NormKind::Spectral { power_iters } => self.spectral_norm(power_iters),
            NormKind::Frobenius => self.frobenius_norm(),
        }
    }
}

/// Per-solve policy bookkeeping: cycle-start residual norm, the in-cycle
/// Arnoldi residual history, and the repeated cycle length for
/// `ImprovementThenRepeat`.
#[derive(Debug, Clone)]
pub struct PolicyState {
    policy: RestartPolicy,
    m: usize,
    beta: f64,
    history: Vec<f64>,
    repeat_len: Option<usize>,
}

impl PolicyState {
    pub fn new(policy: RestartPolicy, m: usize) -> Self {
        Self {
            policy,
            m,
            beta: 0.0,
            history: Vec::new(),
            repeat_len: None,
        }
    }

    pub fn policy(&self) -> &RestartPolicy {
        &self.policy
    }

    pub fn cycle_start(&mut self, beta: f64) {
        self.beta = beta;
        self.history.clear();
    }

    pub fn record(&mut self, arnoldi_residual: f64) {
        self.history.push(arnoldi_residual);
    }

    /// Completed inner iterations in the current cycle.
    pub fn j(&self) -> usize {
        self.history.len()
    }

    pub fn cycle_end(&mut self) {
        if self.repeat_len.is_none() {
            self.repeat_len = Some(self.history.len().max(1));
        }
    }

    /// Restart predicate evaluated after each completed inner iteration.
    pub fn should_restart(&self, monitor: Option<&SMatrixMonitor>) -> Result<bool> {
        let j = self.history.len();
        if j == 0 {
            return Ok(false);
        }
        if j >= self.m {
            return Ok(true);
        }
        let triggered = match self.policy {
            RestartPolicy::FixedCount(count) => j >= count,
            RestartPolicy::ImprovementThreshold { delta } => {
                self.history[j - 1] <= delta * self.beta
            }
            RestartPolicy::ImprovementThenRepeat { delta } => match self.repeat_len {
                None => self.history[j - 1] <= delta * self.beta,
                Some(len) => j >= len,
            },
            RestartPolicy::StallDetect {
                window_fraction,
                factor,
            } => {
                let window = ((window_fraction * self.m as f64).ceil() as usize).max(1);
                j > window && self.history[j - 1 - window] < factor * self.history[j - 1]
            }
            RestartPolicy::OrthLoss { norm, threshold } => {
                let monitor = monitor.ok_or(Error::MonitorRequired)?;
                monitor.monitored_norm(norm) >= threshold
            }
        };
        Ok(triggered)
    }
}

/// Restart predicate as a free function over externally held state.
pub fn policy_should_restart(
    state: &PolicyState,
    monitor: Option<&SMatrixMonitor>,
) -> Result<bool> {
    state.should_restart(monitor)
}

/// First inner iteration at which a residual history stalls: improvement
/// of less than `factor` over the preceding `ceil(window_frac * m)`
/// iterations. Returns a 1-based iteration count.
pub fn stall_iteration(
    residuals: &[f64],
    m: usize,
    window_frac: f64,
    factor: f64,
) -> Option<usize> {
    let window = ((window_frac * m as f64).ceil() as usize).max(1);
    for j in window..residuals.len() {
        if residuals[j - window] < factor * residuals[j] {
            return Some(j + 1);
        }
    }
    None
}
