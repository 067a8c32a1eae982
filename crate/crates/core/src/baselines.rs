//! Comparison methods: global mean, full n-dimensional AR(1), SVD followed
//! by a latent AR(1), and matrix factorization with a unit-weight chain
//! regularizer (TCF).
//!
//! Plain matrix factorization is not a separate method here: it is
//! [`crate::model::fit_with`] with the lag set `{1}` and weights pinned to
//! zero, which leaves a pure ridge penalty on `X` (see [`fit_plain_mf`]).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::forecast::forecast_series;
use crate::graph::LagSet;
use crate::linalg::{thin_svd, Cholesky, DenseMatrix};
use crate::model::{fit_with, Hyperparams, TrmfModel, WeightMode};
use crate::par;
use crate::series::ObservedSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaselineKind {
    Mean,
    Ar1,
    SvdAr1,
    Tcf,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::Mean => "mean",
            BaselineKind::Ar1 => "ar1",
            BaselineKind::SvdAr1 => "svd_ar1",
            BaselineKind::Tcf => "tcf",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mean" => Ok(BaselineKind::Mean),
            "ar1" => Ok(BaselineKind::Ar1),
            "svd_ar1" => Ok(BaselineKind::SvdAr1),
            "tcf" => Ok(BaselineKind::Tcf),
            other => Err(Error::InvalidArgument(format!("unknown baseline {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BaselineModel {
    Mean {
        mean: f64,
        n: usize,
        t_count: usize,
    },
    Ar1 {
        /// `n × n`, `y_t ≈ A y_{t−1}`.
        transition: DenseMatrix,
        /// Last training column.
        last: Vec<f64>,
    },
    SvdAr1 {
        /// `U_k S_k`, `n × k`.
        f_mat: DenseMatrix,
        /// `V_kᵀ`, `k × T`.
        x_mat: DenseMatrix,
        /// `k × k`.
        transition: DenseMatrix,
    },
    Tcf(TrmfModel),
}

impl BaselineModel {
    pub fn kind(&self) -> BaselineKind {
        match self {
            BaselineModel::Mean { .. } => BaselineKind::Mean,
            BaselineModel::Ar1 { .. } => BaselineKind::Ar1,
            BaselineModel::SvdAr1 { .. } => BaselineKind::SvdAr1,
            BaselineModel::Tcf(_) => BaselineKind::Tcf,
        }
    }

    /// `n × horizon` point forecasts following the training window.
    pub fn forecast(&self, horizon: usize) -> Result<DenseMatrix> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("forecast horizon must be at least 1".into()));
        }
        match self {
            BaselineModel::Mean { mean, n, .. } => Ok(DenseMatrix::from_fn(*n, horizon, |_, _| *mean)),
            BaselineModel::Ar1 { transition, last } => roll_transition(transition, last, horizon),
            BaselineModel::SvdAr1 {
                f_mat,
                x_mat,
                transition,
            } => {
                let last = x_mat.col(x_mat.cols() - 1);
                f_mat.matmul(&roll_transition(transition, &last, horizon)?)
            }
            BaselineModel::Tcf(model) => Ok(forecast_series(model, horizon)?.y_new),
        }
    }

    /// In-sample fitted values, where the method defines them.
    pub fn reconstruct(&self) -> Option<DenseMatrix> {
        match self {
            BaselineModel::Mean { mean, n, t_count } => Some(DenseMatrix::from_fn(*n, *t_count, |_, _| *mean)),
            BaselineModel::Ar1 { .. } => None,
            BaselineModel::SvdAr1 { f_mat, x_mat, .. } => f_mat.matmul(x_mat).ok(),
            BaselineModel::Tcf(model) => Some(model.reconstruct()),
        }
    }
}

fn roll_transition(transition: &DenseMatrix, last: &[f64], horizon: usize) -> Result<DenseMatrix> {
    let d = transition.rows();
    let mut out = DenseMatrix::zeros(d, horizon);
    let mut state = last.to_vec();
    for j in 0..horizon {
        state = transition.matvec(&state)?;
        for (i, &v) in state.iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// Predicts the mean of the observed entries everywhere.
pub fn fit_mean(data: &ObservedSeries) -> Result<BaselineModel> {
    Ok(BaselineModel::Mean {
        mean: data.observed_mean()?,
        n: data.n(),
        t_count: data.t_count(),
    })
}

/// Ridge estimate of `A` in `z_t ≈ A z_{t−1}` from the columns of `z`
/// (`d × T`), one row of `A` per solve against a shared Gram matrix.
fn ridge_transition(z: &DenseMatrix, lambda: f64) -> Result<DenseMatrix> {
    let (d, t_count) = z.shape();
    if t_count < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: t_count,
        });
    }
    let zt = z.transpose();
    let mut gram = vec![0.0; d * d];
    for t in 0..t_count - 1 {
        let prev = zt.row(t);
        for a in 0..d {
            for b in 0..=a {
                gram[a * d + b] += prev[a] * prev[b];
            }
        }
    }
    for a in 0..d {
        gram[a * d + a] += lambda;
        for b in 0..a {
            gram[b * d + a] = gram[a * d + b];
        }
    }
    let chol = Cholesky::factor_lower(d, &gram)
        .map_err(|_| Error::DegenerateRidge("AR(1) lagged design is rank deficient; use lambda > 0".into()))?;
    let rows = par::try_map_range(d, |i| {
        let target = z.row(i);
        let mut rhs = vec![0.0; d];
        for (t, &y) in target.iter().enumerate().skip(1) {
            for (r, &p) in rhs.iter_mut().zip(zt.row(t - 1)) {
                *r += y * p;
            }
        }
        chol.solve(&rhs)
    })?;
    DenseMatrix::from_vec(d, d, rows.concat())
}

/// n-dimensional AR(1) with a row-wise ridge penalty `λ ‖A‖²`.
pub fn fit_ar1_full(data: &ObservedSeries, lambda: f64) -> Result<BaselineModel> {
    if !data.is_fully_observed() {
        return Err(Error::MissingValuesUnsupported("AR(1)"));
    }
    let y = data.values();
    let transition = ridge_transition(y, lambda)?;
    Ok(BaselineModel::Ar1 {
        transition,
        last: y.col(y.cols() - 1),
    })
}

/// Rank-`k` SVD `Y ≈ U S Vᵀ`, `F = U S`, `X = Vᵀ`, then a ridge AR(1) with a
/// full `k × k` transition on the columns of `X`.
pub fn fit_svd_ar1(data: &ObservedSeries, k: usize, lambda: f64) -> Result<BaselineModel> {
    if !data.is_fully_observed() {
        return Err(Error::MissingValuesUnsupported("SVD-AR(1)"));
    }
    let svd = thin_svd(data.values(), k)?;
    let f_mat = DenseMatrix::from_fn(data.n(), k, |i, c| svd.u[(i, c)] * svd.s[c]);
    let x_mat = svd.vt;
    let transition = ridge_transition(&x_mat, lambda)?;
    Ok(BaselineModel::SvdAr1 {
        f_mat,
        x_mat,
        transition,
    })
}

/// The TRMF-AR solver with lag set `{1}` and every weight pinned to 1.
pub fn fit_tcf(data: &ObservedSeries, hyper: &Hyperparams) -> Result<BaselineModel> {
    let lags = LagSet::new(vec![1])?;
    let ones = DenseMatrix::from_fn(hyper.k, 1, |_, _| 1.0);
    Ok(BaselineModel::Tcf(fit_with(data, hyper, &lags, &WeightMode::Pinned(ones))?))
}

/// Matrix factorization with a ridge penalty on `X`: the TRMF-AR solver with
/// lag set `{1}` and weights pinned to zero.
pub fn fit_plain_mf(data: &ObservedSeries, hyper: &Hyperparams) -> Result<TrmfModel> {
    let lags = LagSet::new(vec![1])?;
    fit_with(data, hyper, &lags, &WeightMode::Pinned(DenseMatrix::zeros(hyper.k, 1)))
}
