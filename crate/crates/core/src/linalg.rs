//! Small dense linear-algebra kernel: row-major matrices, Cholesky, matrix-free
//! conjugate gradient and a one-sided Jacobi thin SVD.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Wraps row-major `data`; fails if the length is wrong or any entry is
    /// not finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEncountered("matrix data"));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("rows of unequal length".into()));
        }
        Self::from_vec(r, c, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (p, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(p)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Copy of columns `start..end`.
    pub fn col_range(&self, start: usize, end: usize) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows, end - start, |i, j| self[(i, start + j)])
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A square linear map given only through its action on vectors.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// Writes `A x` into `out`; both slices have length `dim()`.
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }
}

/// Adapts a closure into a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnOperator { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

const SYMMETRY_TOL: f64 = 1e-10;
const PIVOT_RTOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors a symmetric positive-definite matrix. Only the lower triangle
    /// is read, after an explicit symmetry check.
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Cholesky of a {}x{} matrix",
                a.rows, a.cols
            )));
        }
        let n = a.rows;
        for i in 0..n {
            for j in 0..i {
                let (u, v) = (a[(i, j)], a[(j, i)]);
                if (u - v).abs() > SYMMETRY_TOL * 1f64.max(u.abs()).max(v.abs()) {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Self::factor_lower(n, a.as_slice())
    }

    /// Factors from a row-major buffer without the symmetry check; used on
    /// Gram matrices that are symmetric by construction.
    pub(crate) fn factor_lower(n: usize, a: &[f64]) -> Result<Self> {
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a[j * n + j];
            for p in 0..j {
                d -= l[j * n + p] * l[j * n + p];
            }
            // a pivot that is pure cancellation of its diagonal means rank deficiency
            if !(d > PIVOT_RTOL * a[j * n + j].abs()) || !d.is_finite() {
                return Err(Error::NotSpd { pivot: j, value: d });
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for p in 0..j {
                    s -= l[i * n + p] * l[j * n + p];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Cholesky { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        let n = self.n;
        if x.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side of length {} for dimension {n}",
                x.len()
            )));
        }
        let l = &self.l;
        for i in 0..n {
            let mut s = x[i];
            for p in 0..i {
                s -= l[i * n + p] * x[p];
            }
            x[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for p in i + 1..n {
                s -= l[p * n + i] * x[p];
            }
            x[i] = s / l[i * n + i];
        }
        Ok(())
    }
}

/// Solves `A x = b` for symmetric positive-definite `A`.
pub fn cholesky_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.rows {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side of length {} for {} rows",
            b.len(),
            a.rows
        )));
    }
    Cholesky::factor(a)?.solve(b)
}

/// Result of a conjugate-gradient run.
#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Recurrence residual norm at the returned iterate.
    pub residual_norm: f64,
    pub converged: bool,
    /// Residual norm before the first step and after each iteration.
    pub residual_history: Vec<f64>,
}

/// Unpreconditioned conjugate gradient for an SPD operator, warm-started
/// at `x0`. Stops when `‖b − A x‖ ≤ tol·‖b‖` or after `max_iter` steps.
pub fn conjugate_gradient<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = op.dim();
    if b.len() != n || x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "operator of dimension {n}, rhs {}, start {}",
            b.len(),
            x0.len()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("CG tolerance {tol} must be positive")));
    }
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual_norm: 0.0,
            converged: true,
            residual_history: vec![0.0],
        });
    }
    let threshold = tol * b_norm;

    let mut x = x0.to_vec();
    let mut ap = vec![0.0; n];
    op.apply(&x, &mut ap);
    let mut r: Vec<f64> = b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    if !rs.is_finite() {
        return Err(Error::NonFiniteEncountered("conjugate gradient residual"));
    }
    let mut history = vec![rs.sqrt()];
    let mut iterations = 0;

    while rs.sqrt() > threshold && iterations < max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !pap.is_finite() {
            return Err(Error::NonFiniteEncountered("conjugate gradient curvature"));
        }
        if pap <= 0.0 {
            return Err(Error::NotSpd {
                pivot: iterations,
                value: pap,
            });
        }
        let alpha = rs / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        if !rs_new.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEncountered("conjugate gradient iterate"));
        }
        let beta = rs_new / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
        iterations += 1;
        history.push(rs.sqrt());
    }

    Ok(CgOutcome {
        x,
        iterations,
        residual_norm: rs.sqrt(),
        converged: rs.sqrt() <= threshold,
        residual_history: history,
    })
}

/// Thin singular value decomposition `A ≈ U diag(s) Vᵀ`.
#[derive(Clone, Debug)]
pub struct Svd {
    /// rows × r
    pub u: DenseMatrix,
    /// Nonincreasing singular values, length r.
    pub s: Vec<f64>,
    /// r × cols
    pub vt: DenseMatrix,
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// Rank-`k` truncated SVD by one-sided (Hestenes) Jacobi rotations applied
/// to the columns of whichever orientation has fewer columns.
pub fn thin_svd(a: &DenseMatrix, k: usize) -> Result<Svd> {
    let (m, n) = a.shape();
    let r = m.min(n);
    if k == 0 || k > r {
        return Err(Error::InvalidArgument(format!(
            "rank {k} for a {m}x{n} matrix"
        )));
    }
    // Orthogonalize the p columns of W, where W = A if n ≤ m else Aᵀ.
    let transposed = n > m;
    let p = if transposed { m } else { n };
    let mut w: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            if transposed {
                a.row(j).to_vec()
            } else {
                a.col(j)
            }
        })
        .collect();
    let mut v: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            e
        })
        .collect();

    let eps = 1e-15;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let alpha = dot(&w[i], &w[i]);
                let beta = dot(&w[j], &w[j]);
                let gamma = dot(&w[i], &w[j]);
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = w.iter().enumerate().map(|(j, c)| (norm(c), j)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    order.truncate(k);

    let s: Vec<f64> = order.iter().map(|&(sv, _)| sv).collect();
    // Columns of W / sigma are singular vectors on the long side; V holds
    // the other side.
    let long_side = |c: usize, idx: usize| {
        let (sv, j) = order[c];
        if sv > 0.0 {
            w[j][idx] / sv
        } else {
            0.0
        }
    };
    let short_side = |c: usize, idx: usize| v[order[c].1][idx];
    let (u, vt) = if transposed {
        (
            DenseMatrix::from_fn(m, k, |i, c| short_side(c, i)),
            DenseMatrix::from_fn(k, n, &long_side),
        )
    } else {
        (
            DenseMatrix::from_fn(m, k, |i, c| long_side(c, i)),
            DenseMatrix::from_fn(k, n, short_side),
        )
    };
    if u.as_slice().iter().chain(vt.as_slice()).any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteEncountered("singular vectors"));
    }
    Ok(Svd { u, s, vt })
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(j);
    let (ci, cj) = (&mut left[i], &mut right[0]);
    for (a, b) in ci.iter_mut().zip(cj.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let mut a = m.transpose().matmul(&m).unwrap();
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        a
    }

    /// Gaussian elimination with partial pivoting, kept separate from the
    /// Cholesky path.
    #[allow(clippy::needless_range_loop)]
    fn gauss_solve(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
        let n = a.rows();
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r = a.row(i).to_vec();
                r.push(b[i]);
                r
            })
            .collect();
        for c in 0..n {
            let piv = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
            m.swap(c, piv);
            for r in c + 1..n {
                let f = m[r][c] / m[c][c];
                for j in c..=n {
                    m[r][j] -= f * m[c][j];
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
            x[i] = (m[i][n] - s) / m[i][i];
        }
        x
    }

    #[test]
    fn cholesky_identity_and_diagonal() {
        let x = cholesky_solve(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
        let a = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let x = cholesky_solve(&a, &[2.0, 8.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15, "{x:?}");
    }

    #[test]
    fn cholesky_matches_gaussian_elimination() {
        let a = random_spd(10, 11);
        let b: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let x = cholesky_solve(&a, &b).unwrap();
        let oracle = gauss_solve(&a, &b);
        for (u, v) in x.iter().zip(&oracle) {
            assert!((u - v).abs() <= 1e-8, "{u} vs {v}");
        }
        let ax = a.matvec(&x).unwrap();
        let res: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!(res <= 1e-8 * norm(&b));
    }

    #[test]
    fn cholesky_errors() {
        let indefinite = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(cholesky_solve(&indefinite, &[1.0, 1.0]), Err(Error::NotSpd { .. })));
        let asym = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 2.0]]).unwrap();
        assert!(matches!(cholesky_solve(&asym, &[1.0, 1.0]), Err(Error::NotSymmetric { .. })));
        assert!(matches!(
            cholesky_solve(&DenseMatrix::identity(2), &[1.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn cg_identity_one_iteration() {
        let b = vec![3.0, -1.0, 2.5];
        let out = conjugate_gradient(&DenseMatrix::identity(3), &b, &[0.0; 3], 1e-12, 10).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        for (u, v) in out.x.iter().zip(&b) {
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn cg_diagonal_inverse() {
        let op = FnOperator::new(5, |x: &[f64], out: &mut [f64]| {
            for i in 0..5 {
                out[i] = (i + 1) as f64 * x[i];
            }
        });
        let out = conjugate_gradient(&op, &[1.0; 5], &[0.0; 5], 1e-10, 100).unwrap();
        assert!(out.converged);
        for (i, v) in out.x.iter().enumerate() {
            assert!((v - 1.0 / (i + 1) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn cg_matches_direct_solve() {
        let a = random_spd(20, 5);
        let b: Vec<f64> = (0..20).map(|i| 1.0 + (i as f64) * 0.1).collect();
        let cg = conjugate_gradient(&a, &b, &[0.0; 20], 1e-12, 500).unwrap();
        let direct = cholesky_solve(&a, &b).unwrap();
        for (u, v) in cg.x.iter().zip(&direct) {
            assert!((u - v).abs() <= 1e-6 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn cg_zero_rhs_and_max_iter() {
        let a = random_spd(8, 2);
        let out = conjugate_gradient(&a, &[0.0; 8], &[1.0; 8], 1e-8, 5).unwrap();
        assert!(out.x.iter().all(|&v| v == 0.0));
        let out = conjugate_gradient(&a, &[1.0; 8], &[0.0; 8], 1e-14, 1).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(!out.converged);
    }

    #[test]
    fn svd_reconstructs_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &(m, n) in &[(6usize, 9usize), (9, 6), (5, 5)] {
            let a = DenseMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
            let r = m.min(n);
            let svd = thin_svd(&a, r).unwrap();
            let us = DenseMatrix::from_fn(m, r, |i, c| svd.u[(i, c)] * svd.s[c]);
            let rec = us.matmul(&svd.vt).unwrap();
            for (x, y) in rec.as_slice().iter().zip(a.as_slice()) {
                assert!((x - y).abs() < 1e-10);
            }
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
