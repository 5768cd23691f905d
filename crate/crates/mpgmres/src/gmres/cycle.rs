//! One restart cycle of the Arnoldi process with Givens-rotation
//! least-squares, generic over the working precision.

use crate::error::{Error, Result};
use crate::ilu0::{ilu0_apply_into, Ilu0Factors};
use crate::scalar::Scalar;
use crate::sparse::kernels::{dot_unchecked, norm2_unchecked};
use crate::sparse::CsrMatrix;

/// Orthogonalization scheme for the Arnoldi process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrthScheme {
    /// Modified Gram-Schmidt: sequential projections.
    Mgs,
    /// Classical Gram-Schmidt with one re-orthogonalization pass.
    Cgsr,
    /// Single-pass classical Gram-Schmidt, kept for ablation.
    Cgs,
}

impl std::fmt::Display for OrthScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OrthScheme::Mgs => write!(f, "mgs"),
            OrthScheme::Cgsr => write!(f, "cgsr"),
            OrthScheme::Cgs => write!(f, "cgs"),
        }
    }
}

/// Column-major orthonormal basis with a fixed capacity of m+1 columns.
#[derive(Debug, Clone)]
pub struct BasisMatrix<T> {
    n: usize,
    capacity: usize,
    cols: Vec<Vec<T>>,
}

impl<T: Scalar> BasisMatrix<T> {
    pub fn new(n: usize, capacity: usize) -> Self {
        Self {
            n,
            capacity,
            cols: Vec::with_capacity(capacity),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn col(&self, i: usize) -> &[T] {
        &self.cols[i]
    }

    pub fn cols(&self) -> &[Vec<T>] {
        &self.cols
    }

    pub fn push(&mut self, col: Vec<T>) -> Result<()> {
        if col.len() != self.n {
            return Err(Error::Dimension {
                context: "basis push",
                expected: self.n,
                found: col.len(),
            });
        }
        if self.cols.len() >= self.capacity {
            return Err(Error::InvalidConfig(format!(
                "basis capacity {} exceeded",
                self.capacity
            )));
        }
        self.cols.push(col);
        Ok(())
    }
}

/// Plane rotation with `alpha^2 + beta^2 = 1` up to round-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GivensRotation<T> {
    pub alpha: T,
    pub beta: T,
}

impl<T: Scalar> GivensRotation<T> {
    /// Form the rotation annihilating `b` against `a`, using the
    /// overflow-safe scaled construction.
    pub fn form(a: T, b: T) -> Result<Self> {
        if b == T::zero() {
            if a == T::zero() {
                return Err(Error::GivensUndefined);
            }
            return Ok(Self {
                alpha: T::one(),
                beta: T::zero(),
            });
        }
        if b.abs() > a.abs() {
            let t = a / b;
            let beta = b.signum() / (T::one() + t * t).sqrt();
            Ok(Self {
                alpha: beta * t,
                beta,
            })
        } else {
            let t = b / a;
            let alpha = a.signum() / (T::one() + t * t).sqrt();
            Ok(Self {
                alpha,
                beta: alpha * t,
            })
        }
    }

    /// Apply to a pair: `(alpha a + beta b, -beta a + alpha b)`.
    #[inline]
    pub fn apply(&self, a: T, b: T) -> (T, T) {
        (
            self.alpha * a + self.beta * b,
            -self.beta * a + self.alpha * b,
        )
    }
}

/// State of the triangularized least-squares problem across one cycle.
#[derive(Debug, Clone)]
pub struct KrylovState<T> {
    /// Orthonormal basis V with up to m+1 columns.
    pub basis: BasisMatrix<T>,
    /// Columns of the rotated upper-triangular factor R; column j holds
    /// rows 0..=j.
    pub r_cols: Vec<Vec<T>>,
    pub rotations: Vec<GivensRotation<T>>,
    /// Transformed right-hand side; `|s[j]|` for the last entry is the
    /// Arnoldi residual norm.
    pub s: Vec<T>,
    /// Preconditioned residual norm at the start of the cycle.
    pub beta: T,
    /// Completed inner iterations this cycle.
    pub j: usize,
    /// Restart cycle index.
    pub outer: usize,
}

/// Sequential-projection orthogonalization; returns the h coefficients.
pub fn orthogonalize_mgs<T: Scalar>(w: &mut [T], basis: &BasisMatrix<T>) -> Vec<T> {
    let mut h = Vec::with_capacity(basis.len());
    for v in basis.cols() {
        let hij = dot_unchecked(w, v);
        for (wi, &vi) in w.iter_mut().zip(v) {
            *wi -= hij * vi;
        }
        h.push(hij);
    }
    h
}

fn cgs_pass<T: Scalar>(w: &mut [T], basis: &BasisMatrix<T>) -> Vec<T> {
    // block projection: all coefficients against the incoming w
    let h: Vec<T> = basis.cols().iter().map(|v| dot_unchecked(w, v)).collect();
    for (hij, v) in h.iter().zip(basis.cols()) {
        for (wi, &vi) in w.iter_mut().zip(v) {
            *wi -= *hij * vi;
        }
    }
    h
}

/// Classical Gram-Schmidt with one re-orthogonalization pass; the returned
/// coefficients accumulate both passes.
pub fn orthogonalize_cgsr<T: Scalar>(w: &mut [T], basis: &BasisMatrix<T>) -> Vec<T> {
    let mut h = cgs_pass(w, basis);
    let h2 = cgs_pass(w, basis);
    for (a, b) in h.iter_mut().zip(&h2) {
        *a += *b;
    }
    h
}

/// Single-pass classical Gram-Schmidt.
pub fn orthogonalize_cgs<T: Scalar>(w: &mut [T], basis: &BasisMatrix<T>) -> Vec<T> {
    cgs_pass(w, basis)
}

pub fn orthogonalize<T: Scalar>(
    scheme: OrthScheme,
    w: &mut [T],
    basis: &BasisMatrix<T>,
) -> Vec<T> {
    match scheme {
        OrthScheme::Mgs => orthogonalize_mgs(w, basis),
        OrthScheme::Cgsr => orthogonalize_cgsr(w, basis),
        OrthScheme::Cgs => orthogonalize_cgs(w, basis),
    }
}

/// Fold the new Hessenberg column into the triangular factor: apply the
/// accumulated rotations, form the j-th rotation zeroing the subdiagonal,
/// and update the transformed right-hand side.
pub fn least_squares_update<T: Scalar>(
    state: &mut KrylovState<T>,
    mut h_col: Vec<T>,
    h_sub: T,
) -> Result<()> {
    let jj = state.r_cols.len();
    debug_assert_eq!(h_col.len(), jj + 1);
    for (i, rot) in state.rotations.iter().enumerate() {
        let (a, b) = rot.apply(h_col[i], h_col[i + 1]);
        h_col[i] = a;
        h_col[i + 1] = b;
    }
    let rot = GivensRotation::form(h_col[jj], h_sub)?;
    h_col[jj] = rot.alpha * h_col[jj] + rot.beta * h_sub;
    let s_old = state.s[jj];
    state.s[jj] = rot.alpha * s_old;
    state.s.push(-rot.beta * s_old);
    state.rotations.push(rot);
    state.r_cols.push(h_col);
    state.j += 1;
    Ok(())
}

/// Back-substitute `R y = s` and assemble the correction `u = V y`.
pub fn compute_correction<T: Scalar>(state: &KrylovState<T>) -> Result<Vec<T>> {
    let j = state.j;
    let n = state.basis.n();
    let mut y = vec![T::zero(); j];
    for i in (0..j).rev() {
        let mut acc = state.s[i];
        for l in (i + 1)..j {
            acc -= state.r_cols[l][i] * y[l];
        }
        let rii = state.r_cols[i][i];
        if rii == T::zero() {
            return Err(Error::SingularTriangular { index: i });
        }
        y[i] = acc / rii;
    }
    let mut u = vec![T::zero(); n];
    for (l, &yl) in y.iter().enumerate() {
        let v = state.basis.col(l);
        for (ui, &vi) in u.iter_mut().zip(v) {
            *ui += yl * vi;
        }
    }
    Ok(u)
}

/// Left preconditioner applied inside a cycle: identity, native-precision
/// ILU(0) factors, or single-precision factors applied through casts.
#[derive(Debug, Clone)]
pub enum PrecondOp<T> {
    Identity,
    Native(Ilu0Factors<T>),
    /// Low-precision factors inside an otherwise high-precision solver.
    LowCast(Ilu0Factors<f32>),
}

impl<T: Scalar> PrecondOp<T> {
    pub fn apply_in_place(&self, v: &mut [T]) {
        match self {
            PrecondOp::Identity => {}
            PrecondOp::Native(f) => ilu0_apply_into(f, v),
            PrecondOp::LowCast(f) => {
                let mut lo: Vec<f32> = v.iter().map(|&x| x.as_f64() as f32).collect();
                ilu0_apply_into(f, &mut lo);
                for (vi, &li) in v.iter_mut().zip(&lo) {
                    *vi = T::from_f64(li as f64);
                }
            }
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            PrecondOp::Identity => 0,
            PrecondOp::Native(f) => f.nnz(),
            PrecondOp::LowCast(f) => f.nnz(),
        }
    }
}

pub struct StepOutcome {
    /// The candidate vector vanished after orthogonalization; the exact
    /// solution lies in the current subspace.
    pub breakdown: bool,
}

/// Driver for one restart cycle over a matrix and preconditioner held in
/// the cycle's working precision.
pub struct Cycle<'a, T: Scalar> {
    a: &'a CsrMatrix<T>,
    m_inv: &'a PrecondOp<T>,
    pub state: KrylovState<T>,
    /// Raw Hessenberg columns before rotation; column j holds
    /// h_{1..j+1, j} including the subdiagonal entry.
    pub raw_h: Vec<Vec<T>>,
    orth: OrthScheme,
    m: usize,
}

impl<'a, T: Scalar> Cycle<'a, T> {
    /// Start a cycle from the unpreconditioned residual z: computes
    /// r = M^{-1} z, beta = ||r||, and the first basis vector.
    pub fn new(
        a: &'a CsrMatrix<T>,
        m_inv: &'a PrecondOp<T>,
        z: &[T],
        orth: OrthScheme,
        m: usize,
        outer: usize,
    ) -> Result<Self> {
        let n = a.n_rows();
        if z.len() != n {
            return Err(Error::Dimension {
                context: "cycle residual",
                expected: n,
                found: z.len(),
            });
        }
        let mut r = z.to_vec();
        m_inv.apply_in_place(&mut r);
        let beta = norm2_unchecked(&r);
        let mut basis = BasisMatrix::new(n, m + 1);
        if beta > T::zero() {
            let inv = beta.recip();
            basis.push(r.iter().map(|&x| x * inv).collect())?;
        }
        Ok(Self {
            a,
            m_inv,
            state: KrylovState {
                basis,
                r_cols: Vec::with_capacity(m),
                rotations: Vec::with_capacity(m),
                s: vec![beta],
                beta,
                j: 0,
                outer,
            },
            raw_h: Vec::with_capacity(m),
            orth,
            m,
        })
    }

    pub fn beta(&self) -> T {
        self.state.beta
    }

    /// Arnoldi residual |s_{j+1}| of the current least-squares problem.
    pub fn arnoldi_residual(&self) -> f64 {
        self.state.s.last().map(|s| s.abs().as_f64()).unwrap_or(0.0)
    }

    /// One Arnoldi step plus the least-squares update.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let jj = self.state.j;
        if jj >= self.m {
            return Err(Error::InvalidConfig(format!(
                "cycle already ran its maximum of {} iterations",
                self.m
            )));
        }
        let vj = self.state.basis.col(jj);
        let mut w = self.a.spmv(vj)?;
        self.m_inv.apply_in_place(&mut w);
        let h_col = orthogonalize(self.orth, &mut w, &self.state.basis);
        let h_sub = norm2_unchecked(&w);
        let mut raw = h_col.clone();
        raw.push(h_sub);
        self.raw_h.push(raw);

        let breakdown = h_sub == T::zero();
        if !breakdown {
            let inv = h_sub.recip();
            self.state.basis.push(w.iter().map(|&x| x * inv).collect())?;
        }
        least_squares_update(&mut self.state, h_col, h_sub)?;
        Ok(StepOutcome { breakdown })
    }

    /// Correction vector for the iterations completed so far.
    pub fn correction(&self) -> Result<Vec<T>> {
        compute_correction(&self.state)
    }
}
