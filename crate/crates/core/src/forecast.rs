//! Out-of-sample forecasting by rolling the latent AR recursion forward, and
//! in-sample imputation from the fitted factors.

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix};
use crate::model::{ARWeights, TrmfModel};

#[derive(Clone, Debug, PartialEq)]
pub struct ForecastResult {
    /// `k × h` latent forecasts.
    pub x_new: DenseMatrix,
    /// `n × h` series forecasts, `F · x_new`.
    pub y_new: DenseMatrix,
    pub horizon: usize,
}

/// Noise-free recursion `x_{T+j} = Σ_l W^(l) x_{T+j−l}`, feeding earlier
/// forecasts back in once the lag reaches past `T`.
pub fn forecast_latent(x_mat: &DenseMatrix, ar: &ARWeights, horizon: usize) -> Result<DenseMatrix> {
    let (k, t_count) = x_mat.shape();
    let l_max = ar.lag_set.l_max();
    if t_count < l_max {
        return Err(Error::SeriesTooShort {
            needed: l_max,
            got: t_count,
        });
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument("forecast horizon must be at least 1".into()));
    }
    if ar.k() != k {
        return Err(Error::DimensionMismatch(format!(
            "{} weight rows for {k} latent rows",
            ar.k()
        )));
    }
    let lags = ar.lag_set.lags();
    let mut out = DenseMatrix::zeros(k, horizon);
    for r in 0..k {
        let hist = x_mat.row(r);
        let w = ar.row(r);
        // trailing window followed by the forecasts
        let mut series: Vec<f64> = hist[t_count - l_max..].to_vec();
        for _ in 0..horizon {
            let s = series.len();
            let next: f64 = lags.iter().zip(w).map(|(&l, &wl)| wl * series[s - l]).sum();
            series.push(next);
        }
        out.row_mut(r).copy_from_slice(&series[l_max..]);
    }
    Ok(out)
}

pub fn forecast_series(model: &TrmfModel, horizon: usize) -> Result<ForecastResult> {
    let x_new = forecast_latent(&model.x_mat, &model.ar, horizon)?;
    let y_new = model.f_mat.matmul(&x_new)?;
    Ok(ForecastResult { x_new, y_new, horizon })
}

/// `f_iᵀ x_t` for each requested `(i, t)`.
pub fn impute(model: &TrmfModel, targets: &[(usize, usize)]) -> Result<Vec<(usize, usize, f64)>> {
    let (n, t_count) = (model.n(), model.t_count());
    let xt = model.x_mat.transpose();
    targets
        .iter()
        .map(|&(i, t)| {
            if i >= n || t >= t_count {
                return Err(Error::IndexOutOfBounds {
                    row: i,
                    col: t,
                    rows: n,
                    cols: t_count,
                });
            }
            Ok((i, t, dot(model.f_mat.row(i), xt.row(t))))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LagSet;
    use crate::model::Hyperparams;

    #[test]
    fn geometric_recursion() {
        let ar = ARWeights::uniform(LagSet::new(vec![1]).unwrap(), 1, &[0.5]).unwrap();
        let x = DenseMatrix::from_vec(1, 3, vec![7.0, 3.0, 2.0]).unwrap();
        let f = forecast_latent(&x, &ar, 3).unwrap();
        assert_eq!(f.row(0), &[1.0, 0.5, 0.25]);
    }

    #[test]
    fn zero_weights_forecast_zero() {
        let ar = ARWeights::zeros(LagSet::new(vec![1, 3]).unwrap(), 2);
        let x = DenseMatrix::from_fn(2, 6, |r, t| (r + t) as f64);
        let f = forecast_latent(&x, &ar, 4).unwrap();
        assert!(f.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_short_history() {
        let ar = ARWeights::zeros(LagSet::new(vec![4]).unwrap(), 1);
        let x = DenseMatrix::zeros(1, 3);
        assert!(matches!(forecast_latent(&x, &ar, 1), Err(Error::SeriesTooShort { .. })));
    }

    fn tiny_model() -> TrmfModel {
        TrmfModel {
            f_mat: DenseMatrix::identity(2),
            x_mat: DenseMatrix::from_fn(2, 4, |r, t| (r * 4 + t) as f64),
            ar: ARWeights::uniform(LagSet::new(vec![1]).unwrap(), 2, &[0.9]).unwrap(),
            hyper: Hyperparams::default().with_k(2),
            fit_trace: vec![],
        }
    }

    #[test]
    fn identity_loadings_forecast_latent_directly() {
        let fr = forecast_series(&tiny_model(), 3).unwrap();
        assert_eq!(fr.x_new, fr.y_new);
    }

    #[test]
    fn impute_bounds_and_values() {
        let m = tiny_model();
        let v = impute(&m, &[(1, 2)]).unwrap();
        assert_eq!(v, vec![(1, 2, 6.0)]);
        assert!(matches!(impute(&m, &[(2, 0)]), Err(Error::IndexOutOfBounds { .. })));
    }
}
