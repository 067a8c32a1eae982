//! TRMF-AR: matrix factorization `Y ≈ F X` with an autoregressive regularizer
//! on every latent row of `X`, fitted by alternating minimization over `F`,
//! `X` and the lag weights.
//!
//! The objective is
//!
//! ```text
//! Σ_{(i,t)∈Ω} (Y_it − f_iᵀ x_t)² + λ_f ‖F‖² + λ_x Σ_r TR(x̄_r) + (λ_w/2) ‖W‖²
//! ```
//!
//! The weight penalty carries a ½ so that the per-row weight update
//! (ridge ratio `λ_w/λ_x`) is the exact block minimizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::{ar_hessian_apply_scaled, ar_reg_value, LagSet};
use crate::linalg::{conjugate_gradient, Cholesky, DenseMatrix, FnOperator};
use crate::par;
use crate::series::ObservedSeries;

/// Solver and regularization settings.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams {
    pub k: usize,
    pub lambda_f: f64,
    pub lambda_x: f64,
    pub lambda_w: f64,
    /// Strong-convexity term inside each temporal regularizer. Not given a
    /// value in the literature; 1.0 by default.
    pub eta: f64,
    pub max_outer_iters: usize,
    pub rel_tol: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            k: 4,
            lambda_f: 0.5,
            lambda_x: 0.5,
            lambda_w: 0.5,
            eta: 1.0,
            max_outer_iters: 40,
            rel_tol: 1e-4,
            cg_tol: 1e-8,
            cg_max_iter: 1000,
            seed: 0,
        }
    }
}

impl Hyperparams {
    /// Sets `λ_f = λ_x = λ_w = lambda`.
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda_f = lambda;
        self.lambda_x = lambda;
        self.lambda_w = lambda;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.k == 0 {
            return bad("latent rank k must be at least 1".into());
        }
        if !(self.eta > 0.0) {
            return bad(format!("eta = {} must be positive", self.eta));
        }
        if !(self.rel_tol > 0.0) || !(self.cg_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        for (name, v) in [
            ("lambda_f", self.lambda_f),
            ("lambda_x", self.lambda_x),
            ("lambda_w", self.lambda_w),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} = {v} must be a nonnegative number"));
            }
        }
        Ok(())
    }
}

/// Diagonal lag-weight matrices, stored as a `k × |L|` matrix whose row `r`
/// holds the weights of latent dimension `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct ARWeights {
    pub lag_set: LagSet,
    pub w: DenseMatrix,
}

impl ARWeights {
    pub fn new(lag_set: LagSet, w: DenseMatrix) -> Result<Self> {
        if w.cols() != lag_set.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weight columns for {} lags",
                w.cols(),
                lag_set.len()
            )));
        }
        Ok(ARWeights { lag_set, w })
    }

    pub fn zeros(lag_set: LagSet, k: usize) -> Self {
        let w = DenseMatrix::zeros(k, lag_set.len());
        ARWeights { lag_set, w }
    }

    /// Every latent dimension gets the same weight vector.
    pub fn uniform(lag_set: LagSet, k: usize, weights: &[f64]) -> Result<Self> {
        lag_set.check_weights(weights)?;
        let w = DenseMatrix::from_fn(k, lag_set.len(), |_, j| weights[j]);
        Ok(ARWeights { lag_set, w })
    }

    pub fn k(&self) -> usize {
        self.w.rows()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        self.w.row(r)
    }
}

/// A fitted (or initialized) factorization.
#[derive(Clone, Debug, PartialEq)]
pub struct TrmfModel {
    pub f_mat: DenseMatrix,
    pub x_mat: DenseMatrix,
    pub ar: ARWeights,
    pub hyper: Hyperparams,
    /// `(sweep, objective)`; sweep 0 is the initialization.
    pub fit_trace: Vec<(usize, f64)>,
}

impl TrmfModel {
    pub fn n(&self) -> usize {
        self.f_mat.rows()
    }

    pub fn k(&self) -> usize {
        self.f_mat.cols()
    }

    pub fn t_count(&self) -> usize {
        self.x_mat.cols()
    }

    pub fn lag_set(&self) -> &LagSet {
        &self.ar.lag_set
    }

    /// In-sample reconstruction `F X`.
    pub fn reconstruct(&self) -> DenseMatrix {
        self.f_mat.matmul(&self.x_mat).expect("consistent model dimensions")
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.fit_trace.last().map(|p| p.1)
    }

    fn check_against(&self, data: &ObservedSeries) -> Result<()> {
        let k = self.k();
        if self.n() != data.n()
            || self.x_mat.rows() != k
            || self.t_count() != data.t_count()
            || self.ar.k() != k
        {
            return Err(Error::DimensionMismatch(format!(
                "model F {:?}, X {:?}, W {:?} for data {}x{}",
                self.f_mat.shape(),
                self.x_mat.shape(),
                self.ar.w.shape(),
                data.n(),
                data.t_count()
            )));
        }
        Ok(())
    }
}

/// Squared error of `F X` on the observed entries.
pub fn data_residual(data: &ObservedSeries, f_mat: &DenseMatrix, x_mat: &DenseMatrix) -> f64 {
    let k = f_mat.cols();
    data.iter_observed()
        .map(|(i, t, y)| {
            let fit: f64 = (0..k).map(|r| f_mat[(i, r)] * x_mat[(r, t)]).sum();
            (y - fit).powi(2)
        })
        .sum()
}

/// Full TRMF-AR objective of `model` on `data`.
pub fn objective(data: &ObservedSeries, model: &TrmfModel) -> Result<f64> {
    model.check_against(data)?;
    let h = &model.hyper;
    let mut reg = 0.0;
    for r in 0..model.k() {
        reg += ar_reg_value(model.x_mat.row(r), &model.ar.lag_set, model.ar.row(r), h.eta)?;
    }
    let value = data_residual(data, &model.f_mat, &model.x_mat)
        + h.lambda_f * model.f_mat.frobenius_sq()
        + h.lambda_x * reg
        + 0.5 * h.lambda_w * model.ar.w.frobenius_sq();
    if !value.is_finite() {
        return Err(Error::NonFiniteEncountered("objective"));
    }
    Ok(value)
}

/// Exact ridge update of every row of `F` with `X` held fixed.
///
/// Row `i` minimizes `Σ_{t:(i,t)∈Ω} (Y_it − f_iᵀx_t)² + λ_f ‖f_i‖²`; rows with
/// no observations are set to zero.
pub fn update_f(data: &ObservedSeries, x_mat: &DenseMatrix, lambda_f: f64) -> Result<DenseMatrix> {
    if x_mat.cols() != data.t_count() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} columns, data has {} time points",
            x_mat.cols(),
            data.t_count()
        )));
    }
    let k = x_mat.rows();
    let xt = x_mat.transpose();
    let by_row = data.observed_by_row();
    let values = data.values();

    let rows = par::try_map_range(data.n(), |i| -> Result<Vec<f64>> {
        let obs = &by_row[i];
        if obs.is_empty() {
            return Ok(vec![0.0; k]);
        }
        let mut gram = vec![0.0; k * k];
        let mut rhs = vec![0.0; k];
        for &t in obs {
            let xc = xt.row(t);
            let y = values[(i, t)];
            for a in 0..k {
                rhs[a] += y * xc[a];
                for b in 0..=a {
                    gram[a * k + b] += xc[a] * xc[b];
                }
            }
        }
        for a in 0..k {
            gram[a * k + a] += lambda_f;
            for b in 0..a {
                gram[b * k + a] = gram[a * k + b];
            }
        }
        let chol = Cholesky::factor_lower(k, &gram).map_err(|_| {
            Error::DegenerateRidge(format!("row {i} of F: singular normal equations"))
        })?;
        chol.solve(&rhs)
    })?;
    DenseMatrix::from_vec(data.n(), k, rows.concat())
}

/// Graph-regularized least-squares update of `X` with `F` and the lag
/// weights held fixed, solved jointly over all `k·T` unknowns by conjugate
/// gradient warm-started at `x_init`.
#[allow(clippy::too_many_arguments)]
pub fn update_x(
    data: &ObservedSeries,
    f_mat: &DenseMatrix,
    ar: &ARWeights,
    lambda_x: f64,
    eta: f64,
    x_init: &DenseMatrix,
    cg_tol: f64,
    cg_max_iter: usize,
) -> Result<DenseMatrix> {
    let k = f_mat.cols();
    let t_count = data.t_count();
    if f_mat.rows() != data.n() || x_init.shape() != (k, t_count) || ar.k() != k {
        return Err(Error::DimensionMismatch(format!(
            "F {:?}, X {:?}, W {:?} for data {}x{}",
            f_mat.shape(),
            x_init.shape(),
            ar.w.shape(),
            data.n(),
            t_count
        )));
    }
    ar.lag_set.check_len(t_count)?;
    let system = XSystem::assemble(data, f_mat, ar, lambda_x, eta);
    let op = FnOperator::new(k * t_count, |x: &[f64], out: &mut [f64]| system.apply(x, out));
    let outcome = conjugate_gradient(&op, &system.rhs, x_init.as_slice(), cg_tol, cg_max_iter)?;
    DenseMatrix::from_vec(k, t_count, outcome.x)
}

/// Normal equations of the `X` subproblem (halved):
/// `(blockdiag_t Σ_{i∈Ω_t} f_i f_iᵀ + (λ_x/2) ⊕_r H_r) vec(X) = Σ_{(i,t)∈Ω} f_i Y_it`,
/// with `vec(X)` laid out row-major (`r·T + t`).
pub(crate) struct XSystem<'a> {
    k: usize,
    t_count: usize,
    /// `T` blocks of `k×k`.
    blocks: Vec<f64>,
    lags: &'a [usize],
    weights: &'a DenseMatrix,
    eta: f64,
    scale: f64,
    pub(crate) rhs: Vec<f64>,
}

impl<'a> XSystem<'a> {
    pub(crate) fn assemble(
        data: &ObservedSeries,
        f_mat: &DenseMatrix,
        ar: &'a ARWeights,
        lambda_x: f64,
        eta: f64,
    ) -> Self {
        let k = f_mat.cols();
        let t_count = data.t_count();
        let by_col = data.observed_by_col();
        let values = data.values();
        let per_t: Vec<(Vec<f64>, Vec<f64>)> = par::map_range(t_count, |t| {
            let mut block = vec![0.0; k * k];
            let mut b = vec![0.0; k];
            for &i in &by_col[t] {
                let f = f_mat.row(i);
                let y = values[(i, t)];
                for a in 0..k {
                    b[a] += f[a] * y;
                    for c in 0..k {
                        block[a * k + c] += f[a] * f[c];
                    }
                }
            }
            (block, b)
        });
        let mut blocks = Vec::with_capacity(t_count * k * k);
        let mut rhs = vec![0.0; k * t_count];
        for (t, (block, b)) in per_t.into_iter().enumerate() {
            blocks.extend_from_slice(&block);
            for r in 0..k {
                rhs[r * t_count + t] = b[r];
            }
        }
        XSystem {
            k,
            t_count,
            blocks,
            lags: ar.lag_set.lags(),
            weights: &ar.w,
            eta,
            scale: 0.5 * lambda_x,
            rhs,
        }
    }

    pub(crate) fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (k, t_count) = (self.k, self.t_count);
        par::for_each_chunk_mut(out, t_count, |r, out_row| {
            let x_row = &x[r * t_count..(r + 1) * t_count];
            ar_hessian_apply_scaled(self.lags, self.weights.row(r), self.eta, self.scale, x_row, out_row);
            for (t, o) in out_row.iter_mut().enumerate() {
                let block_row = &self.blocks[t * k * k + r * k..t * k * k + (r + 1) * k];
                let mut s = 0.0;
                for (c, &bv) in block_row.iter().enumerate() {
                    s += bv * x[c * t_count + t];
                }
                *o += s;
            }
        });
    }
}

/// Value of the `X` subproblem: data residual plus `λ_x Σ_r TR(x̄_r)`.
pub fn x_subproblem_value(
    data: &ObservedSeries,
    f_mat: &DenseMatrix,
    x_mat: &DenseMatrix,
    ar: &ARWeights,
    lambda_x: f64,
    eta: f64,
) -> Result<f64> {
    let mut reg = 0.0;
    for r in 0..x_mat.rows() {
        reg += ar_reg_value(x_mat.row(r), &ar.lag_set, ar.row(r), eta)?;
    }
    Ok(data_residual(data, f_mat, x_mat) + lambda_x * reg)
}

/// Per-row ridge regression for the lag weights with `X` held fixed.
///
/// Row `r` minimizes `Σ_{t=m}^{T} (x_t − Σ_l w_l x_{t−l})² + (λ_w/λ_x) ‖w̄‖²`.
/// With `λ_x = 0` the penalty dominates and the weights are zero.
pub fn update_w(x_mat: &DenseMatrix, lag_set: &LagSet, lambda_x: f64, lambda_w: f64) -> Result<ARWeights> {
    lag_set.check_len(x_mat.cols())?;
    if !(lambda_x >= 0.0 && lambda_w >= 0.0) || lambda_x + lambda_w <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "weight update needs lambda_x + lambda_w > 0 (got {lambda_x}, {lambda_w})"
        )));
    }
    let k = x_mat.rows();
    if lambda_x == 0.0 {
        return Ok(ARWeights::zeros(lag_set.clone(), k));
    }
    let ridge = lambda_w / lambda_x;
    let lags = lag_set.lags();
    let p = lags.len();
    let l_max = lag_set.l_max();
    let t_count = x_mat.cols();

    let rows = par::try_map_range(k, |r| -> Result<Vec<f64>> {
        let x = x_mat.row(r);
        let mut gram = vec![0.0; p * p];
        let mut rhs = vec![0.0; p];
        let mut z = vec![0.0; p];
        for t in l_max..t_count {
            for (zj, &l) in z.iter_mut().zip(lags) {
                *zj = x[t - l];
            }
            for a in 0..p {
                rhs[a] += z[a] * x[t];
                for b in 0..=a {
                    gram[a * p + b] += z[a] * z[b];
                }
            }
        }
        for a in 0..p {
            gram[a * p + a] += ridge;
            for b in 0..a {
                gram[b * p + a] = gram[a * p + b];
            }
        }
        let chol = Cholesky::factor_lower(p, &gram).map_err(|_| {
            Error::DegenerateRidge(format!("latent row {r}: lagged design is rank deficient"))
        })?;
        chol.solve(&rhs)
    })?;
    ARWeights::new(lag_set.clone(), DenseMatrix::from_vec(k, p, rows.concat())?)
}

/// How the fit treats the lag weights.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightMode {
    /// Re-estimate the weights after every `X` update.
    Learn,
    /// Keep these `k × |L|` weights fixed throughout.
    Pinned(DenseMatrix),
}

/// Fits TRMF-AR by alternating exact `F` updates, CG `X` updates and ridge
/// weight updates until the relative objective change drops below
/// `hyper.rel_tol`.
pub fn fit(data: &ObservedSeries, hyper: &Hyperparams, lag_set: &LagSet) -> Result<TrmfModel> {
    fit_with(data, hyper, lag_set, &WeightMode::Learn)
}

pub fn fit_with(
    data: &ObservedSeries,
    hyper: &Hyperparams,
    lag_set: &LagSet,
    weights: &WeightMode,
) -> Result<TrmfModel> {
    hyper.validate()?;
    lag_set.check_len(data.t_count())?;
    if data.observed_count() == 0 {
        return Err(Error::EmptyMask);
    }
    let k = hyper.k;
    let ar = match weights {
        WeightMode::Learn => ARWeights::zeros(lag_set.clone(), k),
        WeightMode::Pinned(w) => {
            if w.shape() != (k, lag_set.len()) {
                return Err(Error::DimensionMismatch(format!(
                    "pinned weights {:?}, expected {k}x{}",
                    w.shape(),
                    lag_set.len()
                )));
            }
            ARWeights::new(lag_set.clone(), w.clone())?
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let init = Normal::new(0.0, 0.1).expect("valid normal");
    let f_mat = DenseMatrix::from_fn(data.n(), k, |_, _| init.sample(&mut rng));
    let x_mat = DenseMatrix::from_fn(k, data.t_count(), |_, _| init.sample(&mut rng));

    let mut model = TrmfModel {
        f_mat,
        x_mat,
        ar,
        hyper: hyper.clone(),
        fit_trace: Vec::new(),
    };
    let mut prev = objective(data, &model)?;
    model.fit_trace.push((0, prev));

    for sweep in 1..=hyper.max_outer_iters {
        model.f_mat = update_f(data, &model.x_mat, hyper.lambda_f)?;
        model.x_mat = update_x(
            data,
            &model.f_mat,
            &model.ar,
            hyper.lambda_x,
            hyper.eta,
            &model.x_mat,
            hyper.cg_tol,
            hyper.cg_max_iter,
        )?;
        if matches!(weights, WeightMode::Learn) {
            model.ar = update_w(&model.x_mat, lag_set, hyper.lambda_x, hyper.lambda_w)?;
        }
        let obj = objective(data, &model)?;
        model.fit_trace.push((sweep, obj));
        let converged = (prev - obj).abs() / (1.0 + obj.abs()) < hyper.rel_tol;
        prev = obj;
        if converged {
            break;
        }
    }
    Ok(model)
}

/// Constraint set for [`naive_graph_weights`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NaiveConstraint {
    Nonneg,
    Simplex,
}

/// `Σ_{t>l} ‖x_t − x_{t−l}‖²` for every lag, in lag order.
pub fn lag_difference_costs(x_mat: &DenseMatrix, lag_set: &LagSet) -> Result<Vec<f64>> {
    let t_count = x_mat.cols();
    if t_count <= lag_set.l_max() {
        return Err(Error::SeriesTooShort {
            needed: lag_set.l_max() + 1,
            got: t_count,
        });
    }
    Ok(lag_set
        .lags()
        .iter()
        .map(|&l| {
            (0..x_mat.rows())
                .map(|r| {
                    let x = x_mat.row(r);
                    (l..t_count).map(|t| (x[t] - x[t - l]).powi(2)).sum::<f64>()
                })
                .sum()
        })
        .collect())
}

/// Minimizes the plain temporal graph regularizer `Σ_l w_l Σ_{t>l} ‖x_t − x_{t−l}‖²`
/// over the lag weights alone. The objective is linear in `w` with
/// nonnegative costs, so a nonnegativity constraint yields the all-zero
/// vector and a simplex constraint yields a 1-sparse indicator at the
/// cheapest lag (smallest lag on ties).
pub fn naive_graph_weights(x_mat: &DenseMatrix, lag_set: &LagSet, constraint: NaiveConstraint) -> Result<Vec<f64>> {
    let costs = lag_difference_costs(x_mat, lag_set)?;
    let mut w = vec![0.0; costs.len()];
    if constraint == NaiveConstraint::Simplex {
        let mut best = 0;
        for (j, &c) in costs.iter().enumerate() {
            if c < costs[best] {
                best = j;
            }
        }
        w[best] = 1.0;
    }
    Ok(w)
}
