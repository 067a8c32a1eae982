//! Evaluation protocols: rolling-window forecasting and block-occlusion
//! imputation, each with a grid search per method reporting the best ND and
//! the best NRMSE separately.
//!
//! Every (method, grid point, window) fit is an independent job; jobs run
//! through [`crate::par`] and results are merged in job order, so reports do
//! not depend on the thread count.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::baselines::{fit_ar1_full, fit_mean, fit_plain_mf, fit_svd_ar1, fit_tcf, BaselineModel};
use crate::data::SplitSpec;
use crate::error::{Error, Result};
use crate::forecast::forecast_series;
use crate::graph::LagSet;
use crate::linalg::DenseMatrix;
use crate::metrics::{nd, nrmse};
use crate::model::{fit, Hyperparams};
use crate::par;
use crate::series::ObservedSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    TrmfAr,
    Tcf,
    Mf,
    SvdAr1,
    Ar1,
    Mean,
    /// Listed for completeness; always reported as unsupported.
    Dlm,
}

impl Method {
    pub const FORECAST_DEFAULT: [Method; 5] = [Method::TrmfAr, Method::SvdAr1, Method::Tcf, Method::Ar1, Method::Mean];
    pub const IMPUTE_DEFAULT: [Method; 4] = [Method::TrmfAr, Method::Tcf, Method::Mf, Method::Mean];

    fn uses_k(self) -> bool {
        matches!(self, Method::TrmfAr | Method::Tcf | Method::Mf | Method::SvdAr1)
    }

    fn uses_lambda(self) -> bool {
        !matches!(self, Method::Mean | Method::Dlm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::TrmfAr => "trmf_ar",
            Method::Tcf => "tcf",
            Method::Mf => "mf",
            Method::SvdAr1 => "svd_ar1",
            Method::Ar1 => "ar1",
            Method::Mean => "mean",
            Method::Dlm => "dlm",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "trmf" | "trmf_ar" => Ok(Method::TrmfAr),
            "tcf" => Ok(Method::Tcf),
            "mf" => Ok(Method::Mf),
            "svd_ar1" => Ok(Method::SvdAr1),
            "ar1" => Ok(Method::Ar1),
            "mean" => Ok(Method::Mean),
            "dlm" => Ok(Method::Dlm),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// Values searched for the latent rank and the (tied) regularization weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub ks: Vec<usize>,
    pub lambdas: Vec<f64>,
}

impl Grid {
    pub const LAMBDAS: [f64; 4] = [50.0, 5.0, 0.5, 0.05];

    /// `k ∈ {2, 4, 8}`, `λ ∈ {50, 5, 0.5, 0.05}`.
    pub fn synthetic() -> Self {
        Grid {
            ks: vec![2, 4, 8],
            lambdas: Self::LAMBDAS.to_vec(),
        }
    }

    /// `k ∈ {20, 40}`, `λ ∈ {50, 5, 0.5, 0.05}`.
    pub fn large() -> Self {
        Grid {
            ks: vec![20, 40],
            lambdas: Self::LAMBDAS.to_vec(),
        }
    }

    fn points(&self, method: Method) -> Vec<GridPoint> {
        let ks: Vec<Option<usize>> = if method.uses_k() {
            self.ks.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let lambdas: Vec<Option<f64>> = if method.uses_lambda() {
            self.lambdas.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        ks.iter()
            .flat_map(|&k| lambdas.iter().map(move |&lambda| GridPoint { k, lambda }))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub k: Option<usize>,
    pub lambda: Option<f64>,
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.k {
            Some(k) => write!(f, "{k},")?,
            None => write!(f, ",")?,
        }
        match self.lambda {
            Some(l) => write!(f, "{l}"),
            None => Ok(()),
        }
    }
}

/// Shared settings for a protocol run.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub lags: LagSet,
    pub grid: Grid,
    /// Solver settings; `k` and the λ's are overridden per grid point.
    pub base: Hyperparams,
}

impl ExperimentConfig {
    fn hyper_at(&self, point: GridPoint) -> Hyperparams {
        let mut h = self.base.clone();
        if let Some(k) = point.k {
            h.k = k;
        }
        if let Some(l) = point.lambda {
            h = h.with_lambda(l);
        }
        h
    }
}

/// Score of one method at one grid point over all test entries.
#[derive(Clone, Debug, PartialEq)]
pub struct GridRow {
    pub method: Method,
    pub point: GridPoint,
    pub outcome: std::result::Result<Scores, String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scores {
    pub nd: f64,
    pub nrmse: f64,
    pub n_test: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MethodSummary {
    Scored {
        method: Method,
        best_nd: f64,
        best_nd_at: GridPoint,
        best_nrmse: f64,
        best_nrmse_at: GridPoint,
        n_test: usize,
    },
    Unsupported {
        method: Method,
        reason: String,
    },
}

impl MethodSummary {
    pub fn method(&self) -> Method {
        match self {
            MethodSummary::Scored { method, .. } | MethodSummary::Unsupported { method, .. } => *method,
        }
    }

    pub fn best_nd(&self) -> Option<f64> {
        match self {
            MethodSummary::Scored { best_nd, .. } => Some(*best_nd),
            MethodSummary::Unsupported { .. } => None,
        }
    }

    pub fn best_nrmse(&self) -> Option<f64> {
        match self {
            MethodSummary::Scored { best_nrmse, .. } => Some(*best_nrmse),
            MethodSummary::Unsupported { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub summaries: Vec<MethodSummary>,
    pub rows: Vec<GridRow>,
}

impl ExperimentReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method() == method)
    }

    pub const CSV_HEADER: &'static str =
        "method,nd,nrmse,nd_k,nd_lambda,nrmse_k,nrmse_lambda,n_test,status";

    /// One line per method with the best ND and the best NRMSE over the grid.
    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for s in &self.summaries {
            match s {
                MethodSummary::Scored {
                    method,
                    best_nd,
                    best_nd_at,
                    best_nrmse,
                    best_nrmse_at,
                    n_test,
                } => writeln!(
                    out,
                    "{method},{best_nd:.6},{best_nrmse:.6},{best_nd_at},{best_nrmse_at},{n_test},ok"
                )?,
                MethodSummary::Unsupported { method, reason } => {
                    writeln!(out, "{method},,,,,,,0,unsupported: {}", reason.replace(',', ";"))?
                }
            }
        }
        Ok(())
    }

    /// Every grid point of every method.
    pub fn write_grid_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "method,k,lambda,nd,nrmse,n_test,status")?;
        for row in &self.rows {
            match &row.outcome {
                Ok(s) => writeln!(
                    out,
                    "{},{},{:.6},{:.6},{},ok",
                    row.method, row.point, s.nd, s.nrmse, s.n_test
                )?,
                Err(e) => writeln!(out, "{},{},,,0,error: {}", row.method, row.point, e.replace(',', ";"))?,
            }
        }
        Ok(())
    }
}

fn summarize(method: Method, rows: &[GridRow]) -> MethodSummary {
    let scored: Vec<(GridPoint, Scores)> = rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|s| (r.point, *s)))
        .collect();
    if scored.is_empty() {
        let reason = rows
            .iter()
            .find_map(|r| r.outcome.as_ref().err().cloned())
            .unwrap_or_else(|| "no grid points".into());
        return MethodSummary::Unsupported { method, reason };
    }
    // first point wins ties, so grid order decides
    let best_by = |key: fn(&Scores) -> f64| {
        scored
            .iter()
            .fold(None::<&(GridPoint, Scores)>, |best, cand| match best {
                Some(b) if key(&b.1) <= key(&cand.1) => Some(b),
                _ => Some(cand),
            })
            .expect("nonempty")
    };
    let nd_best = best_by(|s| s.nd);
    let nrmse_best = best_by(|s| s.nrmse);
    MethodSummary::Scored {
        method,
        best_nd: nd_best.1.nd,
        best_nd_at: nd_best.0,
        best_nrmse: nrmse_best.1.nrmse,
        best_nrmse_at: nrmse_best.0,
        n_test: nd_best.1.n_test,
    }
}

enum Fitted {
    Factor(crate::model::TrmfModel),
    Baseline(BaselineModel),
}

fn fit_method(method: Method, train: &ObservedSeries, cfg: &ExperimentConfig, point: GridPoint) -> Result<Fitted> {
    let hyper = cfg.hyper_at(point);
    let lambda = point.lambda.unwrap_or(0.0);
    Ok(match method {
        Method::TrmfAr => Fitted::Factor(fit(train, &hyper, &cfg.lags)?),
        Method::Tcf => Fitted::Baseline(fit_tcf(train, &hyper)?),
        Method::Mf => Fitted::Factor(fit_plain_mf(train, &hyper)?),
        Method::SvdAr1 => Fitted::Baseline(fit_svd_ar1(train, hyper.k.min(train.n()).min(train.t_count()), lambda)?),
        Method::Ar1 => Fitted::Baseline(fit_ar1_full(train, lambda)?),
        Method::Mean => Fitted::Baseline(fit_mean(train)?),
        Method::Dlm => {
            return Err(Error::InvalidArgument(
                "DLM baselines are not implemented".into(),
            ))
        }
    })
}

impl Fitted {
    fn forecast(&self, horizon: usize) -> Result<DenseMatrix> {
        match self {
            Fitted::Factor(m) => Ok(forecast_series(m, horizon)?.y_new),
            Fitted::Baseline(b) => b.forecast(horizon),
        }
    }

    fn reconstruct(&self) -> Result<DenseMatrix> {
        match self {
            Fitted::Factor(m) => Ok(m.reconstruct()),
            Fitted::Baseline(b) => b
                .reconstruct()
                .ok_or_else(|| Error::InvalidArgument(format!("{} has no in-sample fit", b.kind()))),
        }
    }
}

type Pairs = (Vec<f64>, Vec<f64>);

fn score(pairs: &[Pairs]) -> Result<Scores> {
    let pred: Vec<f64> = pairs.iter().flat_map(|p| p.0.iter().copied()).collect();
    let truth: Vec<f64> = pairs.iter().flat_map(|p| p.1.iter().copied()).collect();
    Ok(Scores {
        nd: nd(&pred, &truth)?,
        nrmse: nrmse(&pred, &truth)?,
        n_test: truth.len(),
    })
}

fn run_jobs<F>(cfg: &ExperimentConfig, units: usize, job: F) -> ExperimentReport
where
    F: Fn(Method, GridPoint, usize) -> Result<Pairs> + Sync + Send,
{
    let mut plan = Vec::new();
    for &method in &cfg.methods {
        for point in cfg.grid.points(method) {
            plan.push((method, point));
        }
    }
    let jobs: Vec<(usize, usize)> = (0..plan.len()).flat_map(|p| (0..units).map(move |u| (p, u))).collect();
    let results = par::map_range(jobs.len(), |j| {
        let (p, unit) = jobs[j];
        let (method, point) = plan[p];
        job(method, point, unit).map_err(|e| e.to_string())
    });

    let mut rows = Vec::with_capacity(plan.len());
    for (p, &(method, point)) in plan.iter().enumerate() {
        let chunk = &results[p * units..(p + 1) * units];
        let outcome = chunk
            .iter()
            .cloned()
            .collect::<std::result::Result<Vec<Pairs>, String>>()
            .and_then(|pairs| score(&pairs).map_err(|e| e.to_string()));
        rows.push(GridRow { method, point, outcome });
    }
    let summaries = cfg
        .methods
        .iter()
        .map(|&m| {
            let mine: Vec<GridRow> = rows.iter().filter(|r| r.method == m).cloned().collect();
            summarize(m, &mine)
        })
        .collect();
    ExperimentReport { summaries, rows }
}

/// Refits every method on each window's training prefix and scores the
/// `horizon`-step forecasts against the observed entries of the test range.
pub fn run_forecast(data: &ObservedSeries, split: &SplitSpec, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    for w in &split.windows {
        if w.train_end + w.horizon > data.t_count() {
            return Err(Error::TooManyWindows {
                windows: split.windows.len(),
                horizon: w.horizon,
                t_count: data.t_count(),
            });
        }
    }
    let trains = split
        .windows
        .iter()
        .map(|w| data.time_slice(0, w.train_end))
        .collect::<Result<Vec<_>>>()?;
    Ok(run_jobs(cfg, split.windows.len(), |method, point, wi| {
        let window = split.windows[wi];
        let model = fit_method(method, &trains[wi], cfg, point)?;
        let pred = model.forecast(window.horizon)?;
        let mut p = Vec::new();
        let mut y = Vec::new();
        for i in 0..data.n() {
            for (j, t) in window.test_range().enumerate() {
                if let Some(v) = data.get(i, t) {
                    p.push(pred[(i, j)]);
                    y.push(v);
                }
            }
        }
        Ok((p, y))
    }))
}

/// Fits on `observed` and scores the reconstruction on entries present in
/// `truth` but hidden in `observed`.
pub fn run_imputation(truth: &ObservedSeries, observed: &ObservedSeries, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if truth.n() != observed.n() || truth.t_count() != observed.t_count() {
        return Err(Error::DimensionMismatch("truth and observed shapes differ".into()));
    }
    let targets: Vec<(usize, usize, f64)> = truth
        .iter_observed()
        .filter(|&(i, t, _)| !observed.is_observed(i, t))
        .collect();
    if targets.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(run_jobs(cfg, 1, |method, point, _| {
        let model = fit_method(method, observed, cfg, point)?;
        let rec = model.reconstruct()?;
        Ok(targets.iter().map(|&(i, t, y)| (rec[(i, t)], y)).unzip())
    }))
}
