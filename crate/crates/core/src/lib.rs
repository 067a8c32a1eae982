//! Temporal regularized matrix factorization with autoregressive latent
//! dynamics, plus baselines, data handling and evaluation protocols.
//!
//! `Y ≈ F X` where each row of `X` follows a learned AR model over a lag set.
//! Fitting alternates ridge updates of `F`, a conjugate-gradient solve for
//! `X`, and ridge updates of the AR weights.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod data;
pub mod error;
pub mod experiment;
pub mod forecast;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod par;
pub mod series;

pub use error::{Error, Result};
pub use forecast::{forecast_latent, forecast_series, impute, ForecastResult};
pub use graph::{build_ar_graph, LagSet, TemporalGraph};
pub use linalg::DenseMatrix;
pub use model::{fit, fit_with, ARWeights, Hyperparams, TrmfModel, WeightMode};
pub use series::ObservedSeries;
