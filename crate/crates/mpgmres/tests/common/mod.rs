//! Dense reference implementations used as independent oracles by the
//! integration tests. Everything here is deliberately naive: row-major
//! dense storage, textbook algorithms, no sharing with the library code.

#![allow(dead_code)]

use mpgmres::CsrMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Row-major dense matrix.
#[derive(Debug, Clone)]
pub struct Dense {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }

    pub fn from_csr(a: &CsrMatrix<f64>) -> Self {
        let mut d = Self::zeros(a.n_rows(), a.n_cols());
        for i in 0..a.n_rows() {
            for k in a.row_ptr()[i]..a.row_ptr()[i + 1] {
                *d.at_mut(i, a.col_idx()[k]) = a.values()[k];
            }
        }
        d
    }

    /// Columns as a dense matrix (n x k).
    pub fn from_cols(cols: &[Vec<f64>]) -> Self {
        let k = cols.len();
        let n = if k == 0 { 0 } else { cols[0].len() };
        let mut d = Self::zeros(n, k);
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                *d.at_mut(i, j) = v;
            }
        }
        d
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| (0..self.n_cols).map(|j| self.at(i, j) * x[j]).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                *t.at_mut(j, i) = self.at(i, j);
            }
        }
        t
    }

    pub fn matmul(&self, other: &Dense) -> Self {
        assert_eq!(self.n_cols, other.n_rows);
        let mut out = Self::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for l in 0..self.n_cols {
                let a_il = self.at(i, l);
                if a_il == 0.0 {
                    continue;
                }
                for j in 0..other.n_cols {
                    *out.at_mut(i, j) += a_il * other.at(l, j);
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Gaussian elimination with partial pivoting on a dense square system.
pub fn ge_solve(a: &Dense, b: &[f64]) -> Vec<f64> {
    let n = a.n_rows;
    assert_eq!(a.n_cols, n);
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| m.at(i, k).abs().partial_cmp(&m.at(j, k).abs()).unwrap())
            .unwrap();
        if piv != k {
            for j in 0..n {
                let tmp = m.at(k, j);
                *m.at_mut(k, j) = m.at(piv, j);
                *m.at_mut(piv, j) = tmp;
            }
            rhs.swap(k, piv);
        }
        let pivot = m.at(k, k);
        assert!(pivot != 0.0, "singular matrix in dense oracle");
        for i in (k + 1)..n {
            let f = m.at(i, k) / pivot;
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                *m.at_mut(i, j) -= f * m.at(k, j);
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        for j in (i + 1)..n {
            acc -= m.at(i, j) * x[j];
        }
        x[i] = acc / m.at(i, i);
    }
    x
}

/// Householder-QR least squares: returns (solution, residual 2-norm) of
/// `min ||A y - b||` for a tall matrix.
pub fn qr_lstsq(a: &Dense, b: &[f64]) -> (Vec<f64>, f64) {
    let (m, n) = (a.n_rows, a.n_cols);
    assert!(m >= n);
    assert_eq!(b.len(), m);
    let mut r = a.clone();
    let mut rhs = b.to_vec();
    for k in 0..n {
        // Householder vector for column k below the diagonal
        let mut alpha = 0.0;
        for i in k..m {
            alpha += r.at(i, k) * r.at(i, k);
        }
        let mut alpha = alpha.sqrt();
        if alpha == 0.0 {
            continue;
        }
        if r.at(k, k) > 0.0 {
            alpha = -alpha;
        }
        let mut v: Vec<f64> = (k..m).map(|i| r.at(i, k)).collect();
        v[0] -= alpha;
        let vnorm_sq = v.iter().map(|x| x * x).sum::<f64>();
        if vnorm_sq == 0.0 {
            continue;
        }
        for j in k..n {
            let proj: f64 = v
                .iter()
                .enumerate()
                .map(|(l, &vl)| vl * r.at(k + l, j))
                .sum();
            let f = 2.0 * proj / vnorm_sq;
            for (l, &vl) in v.iter().enumerate() {
                *r.at_mut(k + l, j) -= f * vl;
            }
        }
        let proj: f64 = v.iter().enumerate().map(|(l, &vl)| vl * rhs[k + l]).sum();
        let f = 2.0 * proj / vnorm_sq;
        for (l, &vl) in v.iter().enumerate() {
            rhs[k + l] -= f * vl;
        }
    }
    // back-substitute the n x n upper block
    let mut y = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        for j in (i + 1)..n {
            acc -= r.at(i, j) * y[j];
        }
        y[i] = acc / r.at(i, i);
    }
    let residual = norm2(&rhs[n..]);
    (y, residual)
}

/// Dense sequential modified Gram-Schmidt projection of `w` against the
/// columns of `v`; returns (projected w, coefficients).
pub fn dense_mgs(v: &[Vec<f64>], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut out = w.to_vec();
    let mut h = Vec::with_capacity(v.len());
    for col in v {
        let hij = dot(&out, col);
        for (oi, &ci) in out.iter_mut().zip(col) {
            *oi -= hij * ci;
        }
        h.push(hij);
    }
    (out, h)
}

/// Dense construction of `S = (I + U)^{-1} U` with `U` the strict upper
/// part of `V^T V`, solved column-by-column by back-substitution.
pub fn dense_s_matrix(v_cols: &[Vec<f64>]) -> Dense {
    let k = v_cols.len();
    let mut u = Dense::zeros(k, k);
    for j in 0..k {
        for i in 0..j {
            *u.at_mut(i, j) = dot(&v_cols[i], &v_cols[j]);
        }
    }
    let mut s = Dense::zeros(k, k);
    for j in 0..k {
        // solve (I + U) s_col = u_col; the system is unit upper triangular
        let mut col: Vec<f64> = (0..k).map(|i| u.at(i, j)).collect();
        for i in (0..k).rev() {
            let mut acc = col[i];
            for l in (i + 1)..k {
                acc -= u.at(i, l) * col[l];
            }
            col[i] = acc;
        }
        for i in 0..k {
            *s.at_mut(i, j) = col[i];
        }
    }
    s
}

/// Largest singular value by long power iteration on `A^T A`, an oracle for
/// the monitor's fixed-iteration estimate.
pub fn dense_spectral_norm(a: &Dense) -> f64 {
    let n = a.n_cols;
    if n == 0 || a.max_abs() == 0.0 {
        return 0.0;
    }
    let at = a.transpose();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) * 0.01).collect();
    let nrm = norm2(&x);
    for xi in &mut x {
        *xi /= nrm;
    }
    for _ in 0..1000 {
        let y = at.matvec(&a.matvec(&x));
        let nrm = norm2(&y);
        if nrm == 0.0 {
            return 0.0;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / nrm;
        }
    }
    norm2(&a.matvec(&x))
}

/// Transpose of a sparse matrix, built through triplets.
pub fn csr_transpose(a: &CsrMatrix<f64>) -> CsrMatrix<f64> {
    let mut t = Vec::with_capacity(a.nnz());
    for i in 0..a.n_rows() {
        for k in a.row_ptr()[i]..a.row_ptr()[i + 1] {
            t.push((a.col_idx()[k], i, a.values()[k]));
        }
    }
    CsrMatrix::from_triplets(a.n_cols(), a.n_rows(), &t).unwrap()
}

/// Largest singular value of a sparse matrix by power iteration on A^T A.
pub fn csr_spectral_norm(a: &CsrMatrix<f64>, iters: usize) -> f64 {
    let at = csr_transpose(a);
    let n = a.n_cols();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..iters {
        let y = at.spmv(&a.spmv(&x).unwrap()).unwrap();
        let nrm = norm2(&y);
        assert!(nrm > 0.0);
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / nrm;
        }
    }
    norm2(&a.spmv(&x).unwrap())
}

/// Normwise backward error with the spectral norm of A in the
/// denominator: ‖b − A x‖₂ / (‖A‖₂ ‖x‖₂ + ‖b‖₂).
pub fn backward_error_spectral(a: &CsrMatrix<f64>, a2: f64, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.spmv(x).unwrap();
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    norm2(&r) / (a2 * norm2(x) + norm2(b))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Random diagonally-dominant dense matrix as a CSR, well-conditioned by
/// construction.
pub fn random_dd_csr(rng: &mut ChaCha8Rng, n: usize) -> CsrMatrix<f64> {
    let mut triplets = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let v = if i == j {
                n as f64 + rng.gen_range(0.0..1.0)
            } else {
                rng.gen_range(-1.0..1.0)
            };
            triplets.push((i, j, v));
        }
    }
    CsrMatrix::from_triplets(n, n, &triplets).unwrap()
}

/// Random matrix with eigenvalues spread across [1, 2] (graded diagonal
/// plus small coupling), so Krylov convergence stays gradual over many
/// iterations while the basis remains well conditioned.
pub fn random_spread_csr(rng: &mut ChaCha8Rng, n: usize, coupling: f64) -> CsrMatrix<f64> {
    let mut triplets = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let v = if i == j {
                1.0 + (i + 1) as f64 / n as f64
            } else {
                rng.gen_range(-coupling..coupling)
            };
            triplets.push((i, j, v));
        }
    }
    CsrMatrix::from_triplets(n, n, &triplets).unwrap()
}

/// Orthonormalize the given columns in place with dense MGS.
pub fn orthonormalize(cols: &mut Vec<Vec<f64>>) {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for col in cols.iter() {
        let (mut w, _) = dense_mgs(&out, col);
        let nrm = norm2(&w);
        assert!(nrm > 1e-12, "dependent columns in orthonormalize");
        for wi in &mut w {
            *wi /= nrm;
        }
        out.push(w);
    }
    *cols = out;
}
