//! Incomplete LU factorization without fill-in and its application as the
//! left preconditioner.
//!
//! The factors live on exactly the sparsity pattern of the input matrix:
//! strictly-lower entries hold L (unit diagonal implicit), the diagonal and
//! upper entries hold U.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

/// Combined L/U factors on the pattern of the factorized matrix.
#[derive(Debug, Clone)]
pub struct Ilu0Factors<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
    /// Position of the diagonal entry within each row.
    diag: Vec<usize>,
}

impl<T: Scalar> Ilu0Factors<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Copy with every stored factor value passed through `f`.
    pub fn map_values(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            diag: self.diag.clone(),
        }
    }

    /// Factor entry lookup; zero outside the pattern. The unit diagonal of L
    /// is implicit and not reported here.
    pub fn get(&self, i: usize, j: usize) -> T {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(pos) => self.values[self.row_ptr[i] + pos],
            Err(_) => T::zero(),
        }
    }
}

/// Compute the ILU(0) factorization of a square matrix with a full
/// diagonal in its pattern.
pub fn ilu0_factorize<T: Scalar>(a: &CsrMatrix<T>) -> Result<Ilu0Factors<T>> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            n_rows: a.n_rows(),
            n_cols: a.n_cols(),
        });
    }
    let n = a.n_rows();
    let row_ptr = a.row_ptr().to_vec();
    let col_idx = a.col_idx().to_vec();
    let mut values = a.values().to_vec();

    let mut diag = vec![0usize; n];
    for i in 0..n {
        let row = &col_idx[row_ptr[i]..row_ptr[i + 1]];
        match row.binary_search(&i) {
            Ok(pos) => diag[i] = row_ptr[i] + pos,
            Err(_) => return Err(Error::MissingDiagonal { row: i }),
        }
    }

    // column -> position map for the current row; usize::MAX marks absent
    let mut pos_of_col = vec![usize::MAX; n];
    for i in 0..n {
        let (start, end) = (row_ptr[i], row_ptr[i + 1]);
        for kk in start..end {
            pos_of_col[col_idx[kk]] = kk;
        }
        for kk in start..diag[i] {
            let k = col_idx[kk];
            let pivot = values[diag[k]];
            if pivot == T::zero() {
                return Err(Error::ZeroPivot { row: k });
            }
            let l_ik = values[kk] / pivot;
            values[kk] = l_ik;
            // eliminate against row k's upper part, restricted to row i's pattern
            for jj in (diag[k] + 1)..row_ptr[k + 1] {
                let j = col_idx[jj];
                let pos = pos_of_col[j];
                if pos != usize::MAX {
                    values[pos] = values[pos] - l_ik * values[jj];
                }
            }
        }
        if values[diag[i]] == T::zero() {
            for kk in start..end {
                pos_of_col[col_idx[kk]] = usize::MAX;
            }
            return Err(Error::ZeroPivot { row: i });
        }
        for kk in start..end {
            pos_of_col[col_idx[kk]] = usize::MAX;
        }
    }

    Ok(Ilu0Factors {
        n,
        row_ptr,
        col_idx,
        values,
        diag,
    })
}

/// Apply the preconditioner: solve `L y = z` then `U r = y`.
pub fn ilu0_apply<T: Scalar>(f: &Ilu0Factors<T>, z: &[T]) -> Result<Vec<T>> {
    if z.len() != f.n {
        return Err(Error::Dimension {
            context: "ilu0_apply",
            expected: f.n,
            found: z.len(),
        });
    }
    let mut y = z.to_vec();
    ilu0_apply_into(f, &mut y);
    Ok(y)
}

/// In-place application on a work vector of the right length.
pub fn ilu0_apply_into<T: Scalar>(f: &Ilu0Factors<T>, y: &mut [T]) {
    debug_assert_eq!(y.len(), f.n);
    // forward solve with the unit-lower factor
    for i in 0..f.n {
        let mut acc = y[i];
        for kk in f.row_ptr[i]..f.diag[i] {
            acc = acc - f.values[kk] * y[f.col_idx[kk]];
        }
        y[i] = acc;
    }
    // backward solve with the upper factor
    for i in (0..f.n).rev() {
        let mut acc = y[i];
        for kk in (f.diag[i] + 1)..f.row_ptr[i + 1] {
            acc = acc - f.values[kk] * y[f.col_idx[kk]];
        }
        y[i] = acc / f.values[f.diag[i]];
    }
}
