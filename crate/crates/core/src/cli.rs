//! Command-line front end: `synth`, `fit`, `forecast`, `impute`, `eval`,
//! `bench`.
//!
//! Exit codes: 0 on success, 2 for usage, input or configuration errors,
//! 3 when a numerical solver fails.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::baselines::{fit_ar1_full, fit_mean, fit_plain_mf, fit_svd_ar1, fit_tcf, BaselineModel};
use crate::data::{
    gen_synthetic, load_csv, load_saved, occlude_blocks, rolling_splits, save_csv, save_saved, write_csv, Aggregate,
    SavedModel, SyntheticConfig,
};
use crate::error::{Error, Result};
use crate::experiment::{run_forecast, run_imputation, ExperimentConfig, Grid, Method};
use crate::forecast::forecast_series;
use crate::graph::LagSet;
use crate::linalg::DenseMatrix;
use crate::metrics::{write_reports, EvalReport};
use crate::model::{fit, Hyperparams};
use crate::series::ObservedSeries;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "trmf", version, about = "Temporal regularized matrix factorization for multivariate time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset and its ground truth.
    Synth(SynthArgs),
    /// Fit a model to a CSV and write a model file.
    Fit(FitArgs),
    /// Forecast from a saved model.
    Forecast(ForecastArgs),
    /// Fill the missing cells of a CSV from a saved model.
    Impute(ImputeArgs),
    /// Score predictions against a truth CSV.
    Eval(EvalArgs),
    /// Grid-searched forecasting or imputation benchmark.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
struct SynthShape {
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long = "t", default_value_t = 128)]
    t_count: usize,
    #[arg(long, default_value_t = 4)]
    rank: usize,
    /// Lags of the generating process.
    #[arg(long = "gen-lags", default_value = "1,8")]
    gen_lags: LagSet,
    /// Observation noise standard deviation.
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    latent_sigma: f64,
}

impl SynthShape {
    fn config(&self, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            seed,
            n: self.n,
            t_count: self.t_count,
            k: self.rank,
            lags: self.gen_lags.clone(),
            sigma: self.sigma,
            latent_sigma: self.latent_sigma,
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    shape: SynthShape,
    /// Output CSV; the ground truth goes to `<out>.truth.json` unless
    /// `--truth` is given.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AggregateArg {
    None,
    Sum,
    Mean,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Input CSV: one series per row, empty or NaN cells are missing.
    #[arg(long)]
    data: PathBuf,
    /// Combine blocks of `--block` consecutive columns.
    #[arg(long, value_enum, default_value_t = AggregateArg::None)]
    aggregate: AggregateArg,
    #[arg(long, default_value_t = 4)]
    block: usize,
}

impl DataArgs {
    fn load(&self) -> Result<crate::data::CsvData> {
        let agg = match self.aggregate {
            AggregateArg::None => Aggregate::None,
            AggregateArg::Sum => Aggregate::Sum(self.block),
            AggregateArg::Mean => Aggregate::Mean(self.block),
        };
        load_csv(&self.data, agg)
    }
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// Lag set, e.g. `1:8`, `1:24,168:191`, or a preset name.
    #[arg(long, default_value = "synthetic")]
    lags: LagSet,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 40)]
    iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    cg_tol: f64,
    #[arg(long, default_value_t = 1000)]
    cg_max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn base(&self) -> Hyperparams {
        Hyperparams {
            eta: self.eta,
            max_outer_iters: self.iters,
            rel_tol: self.rel_tol,
            cg_tol: self.cg_tol,
            cg_max_iter: self.cg_max_iter,
            seed: self.seed,
            ..Hyperparams::default()
        }
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "trmf_ar")]
    method: Method,
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Sets λ_f, λ_x and λ_w together; the specific flags override it.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long)]
    lambda_f: Option<f64>,
    #[arg(long)]
    lambda_x: Option<f64>,
    #[arg(long)]
    lambda_w: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ForecastArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ImputeArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV whose missing cells are imputed; must match the model's shape.
    #[command(flatten)]
    data: DataArgs,
    /// Output CSV of `series,time,value` rows (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Predictions: a matrix CSV, or `series,time,value` rows with `--triples`.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    triples: bool,
    #[arg(long)]
    truth: PathBuf,
    /// Score only cells missing from this CSV (imputation scoring).
    #[arg(long)]
    observed: Option<PathBuf>,
    /// First time index of the prediction matrix within the truth.
    #[arg(long, default_value_t = 0)]
    offset: usize,
    #[arg(long, default_value = "model")]
    method: String,
    #[arg(long, default_value = "0")]
    split_id: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Task {
    Forecast,
    Impute,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Benchmark on generated data instead of `--data`.
    #[arg(long, conflicts_with = "data")]
    synth: bool,
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    shape: SynthShape,
    #[arg(long, value_enum, default_value_t = Task::Forecast)]
    task: Task,
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    #[arg(long, default_value_t = 10)]
    windows: usize,
    /// Comma-separated methods; defaults depend on the task.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 4, 8])]
    ks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = Grid::LAMBDAS.to_vec())]
    lambdas: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    observed_fraction: f64,
    #[arg(long, default_value_t = 2)]
    block_len: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Summary CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write every grid point's scores here.
    #[arg(long)]
    grid_out: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code. Errors are reported on stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_solver_failure() {
                EXIT_SOLVER
            } else {
                EXIT_CONFIG
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Forecast(a) => forecast_cmd(a),
        Command::Impute(a) => impute_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Bench(a) => bench_cmd(a),
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn finish(out: &mut dyn Write, path: Option<&Path>) -> Result<()> {
    out.flush()
        .map_err(|e| Error::io(path.unwrap_or_else(|| Path::new("<stdout>")), e))
}

fn write_err(path: Option<&Path>) -> impl Fn(io::Error) -> Error + '_ {
    move |e| Error::io(path.unwrap_or_else(|| Path::new("<stdout>")), e)
}

#[derive(Serialize)]
struct TruthSidecar {
    seed: u64,
    n: usize,
    t_count: usize,
    k: usize,
    lags: Vec<usize>,
    sigma: f64,
    latent_sigma: f64,
    f_true: Vec<Vec<f64>>,
    x_true: Vec<Vec<f64>>,
    w_true: Vec<Vec<f64>>,
}

fn rows_of(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = a.shape.config(a.seed);
    let truth = gen_synthetic(&cfg)?;
    save_csv(&a.out, &truth.y, None)?;
    let sidecar = TruthSidecar {
        seed: a.seed,
        n: cfg.n,
        t_count: cfg.t_count,
        k: cfg.k,
        lags: cfg.lags.lags().to_vec(),
        sigma: cfg.sigma,
        latent_sigma: cfg.latent_sigma,
        f_true: rows_of(&truth.f_true),
        x_true: rows_of(&truth.x_true),
        w_true: rows_of(&truth.w_true.w),
    };
    let path = a.truth.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".truth.json");
        p.into()
    });
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

fn fit_cmd(a: FitArgs) -> Result<()> {
    let series = a.data.load()?.series;
    let mut hyper = a.solver.base().with_k(a.k).with_lambda(a.lambda);
    hyper.lambda_f = a.lambda_f.unwrap_or(hyper.lambda_f);
    hyper.lambda_x = a.lambda_x.unwrap_or(hyper.lambda_x);
    hyper.lambda_w = a.lambda_w.unwrap_or(hyper.lambda_w);
    let saved = match a.method {
        Method::TrmfAr => SavedModel::Trmf(fit(&series, &hyper, &a.solver.lags)?),
        Method::Mf => SavedModel::Trmf(fit_plain_mf(&series, &hyper)?),
        Method::Tcf => SavedModel::Baseline(fit_tcf(&series, &hyper)?),
        Method::SvdAr1 => SavedModel::Baseline(fit_svd_ar1(&series, a.k, a.lambda)?),
        Method::Ar1 => SavedModel::Baseline(fit_ar1_full(&series, a.lambda)?),
        Method::Mean => SavedModel::Baseline(fit_mean(&series)?),
        Method::Dlm => return Err(Error::InvalidArgument("DLM baselines are not implemented".into())),
    };
    save_saved(&saved, &a.out)
}

fn forecast_cmd(a: ForecastArgs) -> Result<()> {
    let pred = match load_saved(&a.model)? {
        SavedModel::Trmf(m) => forecast_series(&m, a.horizon)?.y_new,
        SavedModel::Baseline(b) => b.forecast(a.horizon)?,
    };
    let mut out = open_out(a.out.as_deref())?;
    write_csv(&mut out, &ObservedSeries::fully_observed(pred), None).map_err(write_err(a.out.as_deref()))?;
    finish(&mut out, a.out.as_deref())
}

fn impute_cmd(a: ImputeArgs) -> Result<()> {
    let series = a.data.load()?.series;
    let rec = match load_saved(&a.model)? {
        SavedModel::Trmf(m) | SavedModel::Baseline(BaselineModel::Tcf(m)) => m.reconstruct(),
        SavedModel::Baseline(b) => b
            .reconstruct()
            .ok_or_else(|| Error::InvalidArgument(format!("a {} model cannot impute", b.kind())))?,
    };
    if rec.shape() != (series.n(), series.t_count()) {
        return Err(Error::DimensionMismatch(format!(
            "model is {}x{}, data is {}x{}",
            rec.rows(),
            rec.cols(),
            series.n(),
            series.t_count()
        )));
    }
    let mut out = open_out(a.out.as_deref())?;
    let err = write_err(a.out.as_deref());
    writeln!(out, "series,time,value").map_err(&err)?;
    for i in 0..series.n() {
        for t in 0..series.t_count() {
            if !series.is_observed(i, t) {
                writeln!(out, "{i},{t},{}", rec[(i, t)]).map_err(&err)?;
            }
        }
    }
    finish(&mut out, a.out.as_deref())
}

fn read_triples(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: r + 2,
            col: 1,
            msg: e.to_string(),
        })?;
        let field = |c: usize| -> Result<&str> {
            rec.get(c).ok_or_else(|| Error::Parse {
                row: r + 2,
                col: c + 1,
                msg: "missing field".into(),
            })
        };
        let parse_err = |c: usize, msg: String| Error::Parse { row: r + 2, col: c + 1, msg };
        let i = field(0)?.parse().map_err(|e: std::num::ParseIntError| parse_err(0, e.to_string()))?;
        let t = field(1)?.parse().map_err(|e: std::num::ParseIntError| parse_err(1, e.to_string()))?;
        let v = field(2)?.parse().map_err(|e: std::num::ParseFloatError| parse_err(2, e.to_string()))?;
        rows.push((i, t, v));
    }
    Ok(rows)
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let truth = load_csv(&a.truth, Aggregate::None)?.series;
    let observed = match &a.observed {
        Some(p) => Some(load_csv(p, Aggregate::None)?.series),
        None => None,
    };
    let hidden = |i: usize, t: usize| observed.as_ref().is_none_or(|o| !o.is_observed(i, t));

    let mut pred = Vec::new();
    let mut y = Vec::new();
    let mut take = |i: usize, t: usize, p: f64| -> Result<()> {
        if i >= truth.n() || t >= truth.t_count() {
            return Err(Error::IndexOutOfBounds {
                row: i,
                col: t,
                rows: truth.n(),
                cols: truth.t_count(),
            });
        }
        if let Some(v) = truth.get(i, t) {
            if hidden(i, t) {
                pred.push(p);
                y.push(v);
            }
        }
        Ok(())
    };
    if a.triples {
        for (i, t, v) in read_triples(&a.pred)? {
            take(i, t, v)?;
        }
    } else {
        let p = load_csv(&a.pred, Aggregate::None)?.series;
        if p.n() != truth.n() {
            return Err(Error::DimensionMismatch(format!("{} prediction rows for {} series", p.n(), truth.n())));
        }
        for (i, t, v) in p.iter_observed() {
            take(i, t + a.offset, v)?;
        }
    }
    let report = EvalReport::evaluate(&a.method, &a.split_id, &pred, &y)?;
    let mut out = open_out(a.out.as_deref())?;
    write_reports(&mut out, &[report]).map_err(write_err(a.out.as_deref()))?;
    finish(&mut out, a.out.as_deref())
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    if a.ks.is_empty() || a.lambdas.is_empty() {
        return Err(Error::InvalidArgument("grid values must be nonempty".into()));
    }
    let data = match (&a.data, a.synth) {
        (Some(p), false) => load_csv(p, Aggregate::None)?.series,
        (None, true) => gen_synthetic(&a.shape.config(a.solver.seed))?.y,
        _ => return Err(Error::InvalidArgument("give exactly one of --synth or --data".into())),
    };
    let methods = if a.methods.is_empty() {
        match a.task {
            Task::Forecast => Method::FORECAST_DEFAULT.to_vec(),
            Task::Impute => Method::IMPUTE_DEFAULT.to_vec(),
        }
    } else {
        a.methods.clone()
    };
    let cfg = ExperimentConfig {
        methods,
        lags: a.solver.lags.clone(),
        grid: Grid {
            ks: a.ks.clone(),
            lambdas: a.lambdas.clone(),
        },
        base: a.solver.base(),
    };
    let report = match a.task {
        Task::Forecast => {
            let split = rolling_splits(data.t_count(), a.horizon, a.windows)?;
            run_forecast(&data, &split, &cfg)?
        }
        Task::Impute => {
            let observed = occlude_blocks(&data, a.observed_fraction, a.block_len, a.solver.seed)?;
            run_imputation(&data, &observed, &cfg)?
        }
    };
    let mut out = open_out(a.out.as_deref())?;
    report.write_summary_csv(&mut out).map_err(write_err(a.out.as_deref()))?;
    finish(&mut out, a.out.as_deref())?;
    if let Some(p) = &a.grid_out {
        let mut g = open_out(Some(p))?;
        report.write_grid_csv(&mut g).map_err(write_err(Some(p)))?;
        finish(&mut g, Some(p))?;
    }
    Ok(())
}
