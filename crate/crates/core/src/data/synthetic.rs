use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::LagSet;
use crate::linalg::DenseMatrix;
use crate::model::ARWeights;
use crate::series::ObservedSeries;

/// Settings for the small synthetic benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n: usize,
    pub t_count: usize,
    pub k: usize,
    pub lags: LagSet,
    /// Observation noise standard deviation.
    pub sigma: f64,
    /// Innovation standard deviation of the latent AR process.
    pub latent_sigma: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 0,
            n: 16,
            t_count: 128,
            k: 4,
            lags: LagSet::new(vec![1, 8]).expect("static lag set"),
            sigma: 0.1,
            latent_sigma: 0.1,
        }
    }
}

impl SyntheticConfig {
    pub fn with_seed(seed: u64) -> Self {
        SyntheticConfig {
            seed,
            ..Self::default()
        }
    }
}

/// Generated data with everything that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTruth {
    pub y: ObservedSeries,
    pub f_true: DenseMatrix,
    pub x_true: DenseMatrix,
    pub w_true: ARWeights,
    pub sigma: f64,
}

const WEIGHT_RANGE: f64 = 0.8;
const MAX_WEIGHT_DRAWS: usize = 100_000;

/// Whether `x_t = Σ_l w_l x_{t−l}` is stable, i.e. every root of
/// `z^p − Σ_l w_l z^{p−l}` lies strictly inside the unit circle.
///
/// Uses the Schur–Cohn step-down recursion: the monic polynomial is reduced
/// one degree at a time and is stable iff every reflection coefficient has
/// magnitude below one.
pub fn is_stable(lags: &LagSet, weights: &[f64]) -> bool {
    let p = lags.l_max();
    let mut a = vec![0.0; p + 1];
    a[0] = 1.0;
    for (&l, &w) in lags.lags().iter().zip(weights) {
        a[l] = -w;
    }
    for i in (1..=p).rev() {
        let k = a[i];
        if !(k.abs() < 1.0) {
            return false;
        }
        let denom = 1.0 - k * k;
        let prev = a.clone();
        for j in 1..i {
            a[j] = (prev[j] - k * prev[i - j]) / denom;
        }
    }
    true
}

/// Draws stable diagonal lag weights (uniform in `[−0.8, 0.8]`, resampled
/// until stable), loadings `F` with i.i.d. standard normal entries, a latent
/// AR trajectory with `4·l_max` burn-in steps discarded, and
/// `Y = F X + noise`.
pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticTruth> {
    if cfg.t_count <= cfg.lags.l_max() {
        return Err(Error::SeriesTooShort {
            needed: cfg.lags.l_max() + 1,
            got: cfg.t_count,
        });
    }
    if cfg.n == 0 || cfg.k == 0 {
        return Err(Error::InvalidArgument("n and k must be positive".into()));
    }
    let obs_noise = Normal::new(0.0, cfg.sigma)
        .map_err(|e| Error::InvalidArgument(format!("sigma {}: {e}", cfg.sigma)))?;
    let latent_noise = Normal::new(0.0, cfg.latent_sigma)
        .map_err(|e| Error::InvalidArgument(format!("latent sigma {}: {e}", cfg.latent_sigma)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let p = cfg.lags.len();

    let mut w = DenseMatrix::zeros(cfg.k, p);
    for r in 0..cfg.k {
        let mut draws = 0;
        loop {
            let cand: Vec<f64> = (0..p).map(|_| rng.random_range(-WEIGHT_RANGE..WEIGHT_RANGE)).collect();
            if is_stable(&cfg.lags, &cand) {
                w.row_mut(r).copy_from_slice(&cand);
                break;
            }
            draws += 1;
            if draws >= MAX_WEIGHT_DRAWS {
                return Err(Error::InvalidArgument(format!(
                    "no stable weights found for lags {}",
                    cfg.lags
                )));
            }
        }
    }
    let w_true = ARWeights::new(cfg.lags.clone(), w)?;

    let f_true = DenseMatrix::from_fn(cfg.n, cfg.k, |_, _| StandardNormal.sample(&mut rng));

    let l_max = cfg.lags.l_max();
    let burn_in = 4 * l_max;
    let total = l_max + burn_in + cfg.t_count;
    let mut x_true = DenseMatrix::zeros(cfg.k, cfg.t_count);
    for r in 0..cfg.k {
        let weights = w_true.row(r);
        let mut path = vec![0.0; total];
        for t in l_max..total {
            let ar: f64 = cfg.lags.lags().iter().zip(weights).map(|(&l, &wl)| wl * path[t - l]).sum();
            path[t] = ar + latent_noise.sample(&mut rng);
        }
        x_true.row_mut(r).copy_from_slice(&path[total - cfg.t_count..]);
    }

    let mut y = f_true.matmul(&x_true)?;
    for v in y.as_mut_slice() {
        *v += obs_noise.sample(&mut rng);
    }

    Ok(SyntheticTruth {
        y: ObservedSeries::fully_observed(y),
        f_true,
        x_true,
        w_true,
        sigma: cfg.sigma,
    })
}
