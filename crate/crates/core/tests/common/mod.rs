//! Dense reference implementations built straight from the definitions.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use trmf::{DenseMatrix, LagSet, ObservedSeries};

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Up to `max_len` distinct lags from `1..=max_lag`.
pub fn random_lags<R: Rng>(rng: &mut R, max_len: usize, max_lag: usize) -> LagSet {
    let len = rng.random_range(1..=max_len.min(max_lag));
    let picked: Vec<usize> = sample(rng, max_lag, len).into_iter().map(|l| l + 1).collect();
    LagSet::new(picked).unwrap()
}

pub fn uniform_vec<R: Rng>(rng: &mut R, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..=hi)).collect()
}

pub fn normal_vec<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// `½ Σ_{t ≥ l_max} (x_t − Σ_l w_l x_{t−l})² + ½ η ‖x‖²`, written out.
pub fn ar_reg_oracle(x: &[f64], lags: &[usize], w: &[f64], eta: f64) -> f64 {
    let l_max = *lags.iter().max().unwrap();
    let mut s = 0.0;
    for t in l_max..x.len() {
        let mut r = x[t];
        for (&l, &wl) in lags.iter().zip(w) {
            r -= wl * x[t - l];
        }
        s += r * r;
    }
    0.5 * s + 0.5 * eta * x.iter().map(|v| v * v).sum::<f64>()
}

/// Hessian of the AR regularizer: `Σ_t a_t a_tᵀ + η I` with `a_tᵀ x` the
/// residual at time `t`.
pub fn ar_hessian_oracle(lags: &[usize], w: &[f64], eta: f64, t_count: usize) -> DMatrix<f64> {
    let l_max = *lags.iter().max().unwrap();
    let mut h = DMatrix::identity(t_count, t_count) * eta;
    for t in l_max..t_count {
        let mut a = DVector::zeros(t_count);
        a[t] = 1.0;
        for (&l, &wl) in lags.iter().zip(w) {
            a[t - l] -= wl;
        }
        h += &a * a.transpose();
    }
    h
}

/// Dense system matrix and right-hand side of the `X` subproblem,
/// unknowns ordered `r·T + t`.
pub fn x_system_oracle(
    data: &ObservedSeries,
    f: &DenseMatrix,
    lags: &[usize],
    w: &DenseMatrix,
    lambda_x: f64,
    eta: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let (k, t_count) = (f.cols(), data.t_count());
    let dim = k * t_count;
    let mut a = DMatrix::zeros(dim, dim);
    let mut b = DVector::zeros(dim);
    for (i, t, y) in data.iter_observed() {
        for r in 0..k {
            b[r * t_count + t] += f[(i, r)] * y;
            for c in 0..k {
                a[(r * t_count + t, c * t_count + t)] += f[(i, r)] * f[(i, c)];
            }
        }
    }
    for r in 0..k {
        let h = ar_hessian_oracle(lags, w.row(r), eta, t_count);
        for s in 0..t_count {
            for u in 0..t_count {
                a[(r * t_count + s, r * t_count + u)] += 0.5 * lambda_x * h[(s, u)];
            }
        }
    }
    (a, b)
}

/// `(ZᵀZ + λI)⁻¹ Zᵀ y` via an explicit inverse.
pub fn ridge_oracle(z: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let p = z.ncols();
    let gram = z.transpose() * z + DMatrix::identity(p, p) * lambda;
    gram.try_inverse().expect("invertible") * z.transpose() * y
}

/// Random series with roughly `frac` of the cells observed.
pub fn random_observed<R: Rng>(rng: &mut R, n: usize, t_count: usize, frac: f64) -> ObservedSeries {
    let cells: Vec<Option<f64>> = (0..n * t_count)
        .map(|_| {
            let v: f64 = rng.random_range(-2.0..2.0);
            rng.random_bool(frac).then_some(v)
        })
        .collect();
    ObservedSeries::from_cells(n, t_count, &cells).unwrap()
}

/// Brute-force update of row `i` of `F`: ridge regression of the observed
/// `Y_i·` on the matching columns of `X`.
pub fn f_row_oracle(data: &ObservedSeries, x: &DenseMatrix, i: usize, lambda_f: f64) -> DVector<f64> {
    let obs: Vec<usize> = (0..data.t_count()).filter(|&t| data.is_observed(i, t)).collect();
    let z = DMatrix::from_fn(obs.len(), x.rows(), |j, r| x[(r, obs[j])]);
    let y = DVector::from_iterator(obs.len(), obs.iter().map(|&t| data.get(i, t).unwrap()));
    ridge_oracle(&z, &y, lambda_f)
}

/// Brute-force lag-weight regression for one latent row.
pub fn w_row_oracle(x: &[f64], lags: &[usize], ridge: f64) -> DVector<f64> {
    let l_max = *lags.iter().max().unwrap();
    let rows = x.len() - l_max;
    let z = DMatrix::from_fn(rows, lags.len(), |j, c| x[j + l_max - lags[c]]);
    let y = DVector::from_iterator(rows, x[l_max..].iter().copied());
    ridge_oracle(&z, &y, ridge)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
