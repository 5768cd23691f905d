//! Sparse and dense kernels: CSR storage, matrix-vector products, vector
//! operations, synthetic problem generation, the normwise backward error,
//! and the solver memory model.

use crate::error::{Error, Result};
use crate::scalar::{convert_slice, Scalar};
use rayon::prelude::*;

/// Row count above which spmv parallelizes over rows.
const SPMV_PAR_THRESHOLD: usize = 16_384;

/// Compressed-sparse-row matrix, generic over scalar width.
///
/// Invariants enforced at construction: `row_ptr` is non-decreasing with
/// `row_ptr[0] == 0` and `row_ptr[n_rows] == nnz`; within each row the
/// column indices are strictly increasing and less than `n_cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        if row_ptr.len() != n_rows + 1 {
            return Err(Error::InvalidMatrix(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                n_rows + 1
            )));
        }
        if row_ptr[0] != 0 || row_ptr[n_rows] != col_idx.len() || col_idx.len() != values.len() {
            return Err(Error::InvalidMatrix(
                "row_ptr endpoints do not match the nonzero arrays".into(),
            ));
        }
        for i in 0..n_rows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::InvalidMatrix(format!(
                    "row_ptr decreases at row {i}"
                )));
            }
            let row = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for w in row.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidMatrix(format!(
                        "columns in row {i} are not strictly increasing"
                    )));
                }
            }
            if let Some(&last) = row.last() {
                if last >= n_cols {
                    return Err(Error::InvalidMatrix(format!(
                        "column index {last} out of range in row {i}"
                    )));
                }
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::InvalidMatrix(format!(
                    "triplet ({r}, {c}) out of range for {n_rows}x{n_cols}"
                )));
            }
        }
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));

        let mut counts = vec![0usize; n_rows];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            if last == Some((r, c)) {
                let acc = values.last_mut().unwrap();
                *acc = *acc + v;
            } else {
                col_idx.push(c);
                values.push(v);
                counts[r] += 1;
                last = Some((r, c));
            }
        }
        let mut row_ptr = vec![0usize; n_rows + 1];
        for i in 0..n_rows {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        Self::new(n_rows, n_cols, row_ptr, col_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Entry lookup; zero when (i, j) is outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> T {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(pos) => self.values[self.row_ptr[i] + pos],
            Err(_) => T::zero(),
        }
    }

    /// Matrix-vector product `y = A x` in the matrix's own precision.
    pub fn spmv(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n_cols {
            return Err(Error::Dimension {
                context: "spmv",
                expected: self.n_cols,
                found: x.len(),
            });
        }
        let mut y = vec![T::zero(); self.n_rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without the allocation; lengths must already agree.
    pub fn spmv_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        let row_body = |i: usize| {
            let mut acc = T::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            acc
        };
        if self.n_rows >= SPMV_PAR_THRESHOLD {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| *yi = row_body(i));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row_body(i);
            }
        }
    }

    /// Frobenius norm of the matrix.
    pub fn frobenius_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| {
                let x = v.as_f64();
                x * x
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Convert to another scalar width, keeping the sparsity structure.
    /// Downcasts that overflow the target range are an error.
    pub fn convert<U: Scalar>(&self) -> Result<CsrMatrix<U>> {
        Ok(CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: convert_slice(&self.values)?,
        })
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    /// Copy with every stored value passed through `f`, keeping the pattern.
    pub fn map_values(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Dense vector kernels. All are standard definitions; mismatched lengths
/// are reported as errors.
pub mod kernels {
    use super::*;

    pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
        check_len("dot", x, y)?;
        Ok(dot_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn dot_unchecked<T: Scalar>(x: &[T], y: &[T]) -> T {
        let mut acc = T::zero();
        for (&a, &b) in x.iter().zip(y) {
            acc += a * b;
        }
        acc
    }

    /// `a * x + y`.
    pub fn axpy<T: Scalar>(a: T, x: &[T], y: &[T]) -> Result<Vec<T>> {
        check_len("axpy", x, y)?;
        Ok(x.iter().zip(y).map(|(&xi, &yi)| a * xi + yi).collect())
    }

    pub fn norm2<T: Scalar>(x: &[T]) -> T {
        norm2_unchecked(x)
    }

    #[inline]
    pub(crate) fn norm2_unchecked<T: Scalar>(x: &[T]) -> T {
        dot_unchecked(x, x).sqrt()
    }

    pub fn scale<T: Scalar>(a: T, x: &[T]) -> Vec<T> {
        x.iter().map(|&xi| a * xi).collect()
    }

    fn check_len<T>(context: &'static str, x: &[T], y: &[T]) -> Result<()> {
        if x.len() != y.len() {
            Err(Error::Dimension {
                context,
                expected: x.len(),
                found: y.len(),
            })
        } else {
            Ok(())
        }
    }
}

/// 2D convection-diffusion operator on a `k`x`k` interior grid with a
/// first-order upwind discretization of convection along (1, 1).
///
/// `beta = 0` reduces to the symmetric five-point Poisson matrix; any
/// nonzero `beta` makes the matrix nonsymmetric.
pub fn gen_convdiff2d(k: usize, beta: f64) -> Result<CsrMatrix<f64>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!(
            "grid size must be at least 2, got {k}"
        )));
    }
    let n = k * k;
    let h = 1.0 / (k as f64 + 1.0);
    let bh = beta * h;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(5 * n);
    let mut values = Vec::with_capacity(5 * n);
    row_ptr.push(0);
    for iy in 0..k {
        for ix in 0..k {
            let idx = iy * k + ix;
            if iy > 0 {
                col_idx.push(idx - k);
                values.push(-1.0 - bh);
            }
            if ix > 0 {
                col_idx.push(idx - 1);
                values.push(-1.0 - bh);
            }
            col_idx.push(idx);
            values.push(4.0 + 2.0 * bh);
            if ix + 1 < k {
                col_idx.push(idx + 1);
                values.push(-1.0);
            }
            if iy + 1 < k {
                col_idx.push(idx + k);
                values.push(-1.0);
            }
            row_ptr.push(col_idx.len());
        }
    }
    CsrMatrix::new(n, n, row_ptr, col_idx, values)
}

/// Normwise backward error `||b - A x||_2 / (||A||_F ||x||_2 + ||b||_2)`,
/// evaluated in double precision.
pub fn backward_error(a: &CsrMatrix<f64>, x: &[f64], b: &[f64]) -> Result<f64> {
    backward_error_with_norm(a, a.frobenius_norm(), x, b)
}

/// Backward error with a precomputed `||A||_F`, for per-iteration use.
pub fn backward_error_with_norm(
    a: &CsrMatrix<f64>,
    a_norm: f64,
    x: &[f64],
    b: &[f64],
) -> Result<f64> {
    if x.len() != a.n_cols() {
        return Err(Error::Dimension {
            context: "backward_error x",
            expected: a.n_cols(),
            found: x.len(),
        });
    }
    if b.len() != a.n_rows() {
        return Err(Error::Dimension {
            context: "backward_error b",
            expected: a.n_rows(),
            found: b.len(),
        });
    }
    let ax = a.spmv(x)?;
    let res: f64 = b
        .iter()
        .zip(&ax)
        .map(|(&bi, &axi)| {
            let d = bi - axi;
            d * d
        })
        .sum::<f64>()
        .sqrt();
    let denom = a_norm * kernels::norm2(x) + kernels::norm2(b);
    if denom == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(res / denom)
}

/// Solver memory mode used by the byte-count model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryMode {
    Double,
    Mixed,
}

/// Leading-term byte requirement of the restarted solver:
/// `24 n_nz + 8 n m + 28 n + 8 m^2` in double mode and
/// `24 n_nz + 4 n m + 32 n + 4 m^2` in mixed mode.
pub fn estimate_bytes(n: u64, n_nz: u64, m: u64, mode: MemoryMode) -> u64 {
    match mode {
        MemoryMode::Double => 24 * n_nz + 8 * n * m + 28 * n + 8 * m * m,
        MemoryMode::Mixed => 24 * n_nz + 4 * n * m + 32 * n + 4 * m * m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spmv_identity() {
        let a = CsrMatrix::<f64>::identity(3);
        let y = a.spmv(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn spmv_laplacian_stencil_cancellation() {
        // tridiag(-1, 2, -1) of size 4 applied to the constant vector
        let a = tridiag(4, -1.0, 2.0, -1.0);
        let y = a.spmv(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(y, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn spmv_dimension_mismatch() {
        let a = CsrMatrix::<f64>::identity(3);
        assert!(matches!(
            a.spmv(&[1.0, 2.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn kernels_trivial() {
        assert_eq!(kernels::dot(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(kernels::norm2(&[3.0, 4.0]), 5.0);
        assert_eq!(
            kernels::axpy(2.0, &[1.0, 1.0], &[1.0, 0.0]).unwrap(),
            vec![3.0, 2.0]
        );
        assert_eq!(kernels::scale(3.0, &[1.0, -2.0]), vec![3.0, -6.0]);
        assert!(kernels::dot(&[1.0], &[1.0, 2.0]).is_err());
        assert!(kernels::axpy(1.0, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn from_triplets_sums_duplicates() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 3.0), (0, 0, 2.0)]).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 1), 3.0);
    }

    #[test]
    fn convdiff_poisson_2x2() {
        let a = gen_convdiff2d(2, 0.0).unwrap();
        assert_eq!(a.n_rows(), 4);
        for i in 0..4 {
            assert_eq!(a.get(i, i), 4.0);
        }
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(0, 2), -1.0);
        assert_eq!(a.get(0, 3), 0.0);
    }

    #[test]
    fn convdiff_beta_zero_is_symmetric() {
        let a = gen_convdiff2d(5, 0.0).unwrap();
        for i in 0..a.n_rows() {
            for j in 0..a.n_cols() {
                assert_eq!(a.get(i, j), a.get(j, i));
            }
        }
    }

    #[test]
    fn convdiff_beta_nonzero_is_nonsymmetric() {
        let a = gen_convdiff2d(4, 1.0).unwrap();
        assert_ne!(a.get(0, 1), a.get(1, 0));
    }

    #[test]
    fn convdiff_rejects_small_grid() {
        assert!(gen_convdiff2d(1, 0.0).is_err());
    }

    #[test]
    fn backward_error_zero_vector() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, 4.0)]).unwrap();
        let b = [2.0, 4.0];
        let be = backward_error(&a, &[0.0, 0.0], &b).unwrap();
        assert!((be - 1.0).abs() < 1e-15);
    }

    #[test]
    fn backward_error_exact_solution() {
        let a = gen_convdiff2d(4, 1.0).unwrap();
        let x: Vec<f64> = (0..16).map(|i| (i as f64) * 0.1 - 0.5).collect();
        let b = a.spmv(&x).unwrap();
        let be = backward_error(&a, &x, &b).unwrap();
        assert!(be <= 1e-15);
    }

    #[test]
    fn backward_error_matches_scalar_formula() {
        // diag(2, 4), b = [2, 4], x = [1.1, 1]
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, 4.0)]).unwrap();
        let x = [1.1, 1.0];
        let b = [2.0, 4.0];
        // independent scalar evaluation of the formula
        let res = ((2.0 - 2.0 * 1.1f64).powi(2) + (4.0 - 4.0f64).powi(2)).sqrt();
        let frob = (4.0f64 + 16.0).sqrt();
        let expected = res / (frob * (1.1f64.powi(2) + 1.0).sqrt() + (4.0f64 + 16.0).sqrt());
        let got = backward_error(&a, &x, &b).unwrap();
        assert!((got - expected).abs() / expected < 1e-14);
    }

    #[test]
    fn backward_error_all_zero_is_error() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 0.0)]).unwrap();
        assert!(matches!(
            backward_error(&a, &[0.0, 0.0], &[0.0, 0.0]),
            Err(Error::ZeroDenominator)
        ));
    }

    #[test]
    fn estimate_bytes_reproduces_formulas() {
        assert_eq!(
            estimate_bytes(1000, 5000, 10, MemoryMode::Double),
            228_800
        );
        assert_eq!(estimate_bytes(1000, 5000, 10, MemoryMode::Mixed), 192_400);
    }

    #[test]
    fn estimate_bytes_mixed_below_double() {
        for n in [1u64, 10, 1000, 1_000_000] {
            for m in [1u64, 5, 50, 500] {
                for nnz in [n, 5 * n] {
                    assert!(
                        estimate_bytes(n, nnz, m, MemoryMode::Mixed)
                            < estimate_bytes(n, nnz, m, MemoryMode::Double)
                    );
                }
            }
        }
    }

    pub(crate) fn tridiag(n: usize, lo: f64, di: f64, up: f64) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            if i > 0 {
                t.push((i, i - 1, lo));
            }
            t.push((i, i, di));
            if i + 1 < n {
                t.push((i, i + 1, up));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }
}
