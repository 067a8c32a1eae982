//! Autoregressive temporal regularizer and its signed-graph form.
//!
//! For a latent series `x̄ ∈ R^T`, lag set `L` and lag weights `w̄`, the
//! regularizer is
//!
//! ```text
//! TR(x̄) = ½ Σ_{t=m}^{T} (x_t − Σ_{l∈L} w_l x_{t−l})² + (η/2)‖x̄‖²
//! ```
//!
//! with `m = 1 + max(L)`. Writing `L̄ = L ∪ {0}` and `w_0 = −1`, the same value
//! equals a graph regularizer over a signed weighted graph on the `T` time
//! points plus a diagonal correction `½ x̄ᵀ D x̄`. [`build_ar_graph`] constructs
//! that graph edge by edge, including the boundary terms near both ends of the
//! series.
//!
//! Time indices in this module are zero-based: the residual sum runs over
//! `t = l_max ..= T−1`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Sorted, distinct, positive lag indices.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LagSet {
    lags: Vec<usize>,
}

impl LagSet {
    /// Sorts and deduplicates `lags`; rejects an empty set or a zero lag.
    pub fn new(mut lags: Vec<usize>) -> Result<Self> {
        lags.sort_unstable();
        lags.dedup();
        if lags.is_empty() {
            return Err(Error::InvalidArgument("lag set is empty".into()));
        }
        if lags[0] == 0 {
            return Err(Error::InvalidArgument("lags must be positive".into()));
        }
        Ok(LagSet { lags })
    }

    /// `{lo, lo+1, …, hi}`.
    pub fn range(lo: usize, hi: usize) -> Result<Self> {
        Self::new((lo..=hi).collect())
    }

    /// `{1, …, 8}`, used for the small synthetic benchmark.
    pub fn synthetic_preset() -> Self {
        Self::range(1, 8).expect("static lag set")
    }

    /// `{1, …, 24} ∪ {168, …, 191}`: one day plus one week of hourly lags.
    pub fn hourly_preset() -> Self {
        Self::new((1..=24).chain(168..=191).collect()).expect("static lag set")
    }

    /// `{1, …, 10} ∪ {50, …, 56}` for weekly data with yearly seasonality.
    pub fn weekly_preset() -> Self {
        Self::new((1..=10).chain(50..=56).collect()).expect("static lag set")
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn l_max(&self) -> usize {
        *self.lags.last().expect("nonempty")
    }

    /// `1 + l_max`: the shortest series with at least one full residual term.
    pub fn m(&self) -> usize {
        1 + self.l_max()
    }

    pub fn contains(&self, lag: usize) -> bool {
        self.lags.binary_search(&lag).is_ok()
    }

    /// Lags of `L̄ = L ∪ {0}` paired with their weights, `w_0 = −1` first.
    pub fn augmented(&self, weights: &[f64]) -> Result<Vec<(usize, f64)>> {
        self.check_weights(weights)?;
        Ok(std::iter::once((0, -1.0))
            .chain(self.lags.iter().copied().zip(weights.iter().copied()))
            .collect())
    }

    pub(crate) fn check_weights(&self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.lags.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} lags",
                weights.len(),
                self.lags.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_len(&self, t_count: usize) -> Result<()> {
        if t_count < self.m() {
            return Err(Error::SeriesTooShort {
                needed: self.m(),
                got: t_count,
            });
        }
        Ok(())
    }
}

impl fmt::Debug for LagSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LagSet{:?}", self.lags)
    }
}

impl fmt::Display for LagSet {
    /// Compact form that [`FromStr`] parses back: runs become `a:b`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        let mut i = 0;
        while i < self.lags.len() {
            let start = self.lags[i];
            let mut j = i;
            while j + 1 < self.lags.len() && self.lags[j + 1] == self.lags[j] + 1 {
                j += 1;
            }
            if j > i {
                parts.push(format!("{start}:{}", self.lags[j]));
            } else {
                parts.push(start.to_string());
            }
            i = j + 1;
        }
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for LagSet {
    type Err = Error;

    /// Comma-separated items, each a lag `l` or an inclusive range `a:b`.
    /// The names `synthetic`, `hourly` and `weekly` select presets.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "synthetic" => return Ok(Self::synthetic_preset()),
            "hourly" => return Ok(Self::hourly_preset()),
            "weekly" => return Ok(Self::weekly_preset()),
            _ => {}
        }
        let bad = |item: &str| Error::InvalidArgument(format!("bad lag item {item:?}"));
        let mut lags = Vec::new();
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            if let Some((a, b)) = item.split_once(':') {
                let a: usize = a.trim().parse().map_err(|_| bad(item))?;
                let b: usize = b.trim().parse().map_err(|_| bad(item))?;
                if a > b {
                    return Err(bad(item));
                }
                lags.extend(a..=b);
            } else {
                lags.push(item.parse().map_err(|_| bad(item))?);
            }
        }
        Self::new(lags)
    }
}

/// `δ(d) = {l ∈ L̄ : l − d ∈ L̄}`, ascending.
pub fn delta_set(lag_set: &LagSet, d: usize) -> Vec<usize> {
    let in_bar = |l: usize| l == 0 || lag_set.contains(l);
    lag_set
        .lags()
        .iter()
        .copied()
        .filter(|&l| l >= d && in_bar(l - d))
        .collect()
}

/// Signed weighted graph over time points plus a diagonal correction.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalGraph {
    t_count: usize,
    l_max: usize,
    /// Keyed by `(t, d)` for the edge between `t` and `t + d`.
    edges: BTreeMap<(usize, usize), f64>,
    diag: Vec<f64>,
}

impl TemporalGraph {
    pub fn t_count(&self) -> usize {
        self.t_count
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn edges(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.edges
    }

    pub fn edge(&self, t: usize, d: usize) -> Option<f64> {
        self.edges.get(&(t, d)).copied()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// A graph with explicit edges and no diagonal correction.
    pub fn from_edges(
        t_count: usize,
        edges: impl IntoIterator<Item = ((usize, usize), f64)>,
    ) -> Result<Self> {
        let edges: BTreeMap<_, _> = edges.into_iter().collect();
        let mut l_max = 0;
        for &(t, d) in edges.keys() {
            if d == 0 || t + d >= t_count {
                return Err(Error::InvalidArgument(format!(
                    "edge ({t}, {t}+{d}) outside a graph of {t_count} nodes"
                )));
            }
            l_max = l_max.max(d);
        }
        Ok(TemporalGraph {
            t_count,
            l_max,
            edges,
            diag: vec![0.0; t_count],
        })
    }

    /// `½ x̄ᵀ D x̄`.
    pub fn diag_quadratic(&self, xbar: &[f64]) -> Result<f64> {
        self.check(xbar)?;
        Ok(0.5 * self.diag.iter().zip(xbar).map(|(d, x)| d * x * x).sum::<f64>())
    }

    fn check(&self, xbar: &[f64]) -> Result<()> {
        if xbar.len() != self.t_count {
            return Err(Error::DimensionMismatch(format!(
                "series of length {} for a graph over {} time points",
                xbar.len(),
                self.t_count
            )));
        }
        Ok(())
    }
}

/// Builds the signed graph and diagonal correction of the AR regularizer.
///
/// The edge between `t` and `t+d` collects `−w_l w_{l−d}` over `l ∈ δ(d)`
/// whose residual term (at time `t+l`) lies in the summation window; an edge
/// is stored whenever at least one such term exists. The diagonal is the sum
/// of the three contributions (squared terms, and cross terms charged to
/// each endpoint) with their own window indicators.
pub fn build_ar_graph(lag_set: &LagSet, weights: &[f64], t_count: usize) -> Result<TemporalGraph> {
    lag_set.check_len(t_count)?;
    let aug = lag_set.augmented(weights)?;
    let weight_of = |l: usize| -> f64 { aug.iter().find(|&&(lag, _)| lag == l).map_or(0.0, |p| p.1) };
    let l_max = lag_set.l_max();
    // residual term for time s exists iff l_max ≤ s ≤ T−1
    let in_window = |s: usize| s >= l_max && s < t_count;

    let mut edges = BTreeMap::new();
    let mut diag = vec![0.0; t_count];

    for &(l, wl) in &aug {
        for (t, dt) in diag.iter_mut().enumerate() {
            if in_window(t + l) {
                *dt += wl * wl;
            }
        }
    }

    for d in 1..=l_max {
        let delta = delta_set(lag_set, d);
        if delta.is_empty() {
            continue;
        }
        for t in 0..t_count - d {
            let mut weight = 0.0;
            let mut present = false;
            for &l in &delta {
                if in_window(t + l) {
                    weight -= weight_of(l) * weight_of(l - d);
                    present = true;
                }
            }
            if present {
                edges.insert((t, d), weight);
            }
        }
        for &l in &delta {
            let prod = weight_of(l) * weight_of(l - d);
            for (t, dt) in diag.iter_mut().enumerate() {
                if in_window(t + l) {
                    *dt += prod;
                }
                if t + l >= d && in_window(t + l - d) {
                    *dt += prod;
                }
            }
        }
    }

    Ok(TemporalGraph {
        t_count,
        l_max,
        edges,
        diag,
    })
}

/// Value of the AR regularizer `TR(x̄)`.
pub fn ar_reg_value(xbar: &[f64], lag_set: &LagSet, weights: &[f64], eta: f64) -> Result<f64> {
    lag_set.check_len(xbar.len())?;
    lag_set.check_weights(weights)?;
    let l_max = lag_set.l_max();
    let mut sum = 0.0;
    for t in l_max..xbar.len() {
        let r = ar_residual(xbar, lag_set.lags(), weights, t);
        sum += r * r;
    }
    let norm_sq: f64 = xbar.iter().map(|x| x * x).sum();
    Ok(0.5 * sum + 0.5 * eta * norm_sq)
}

#[inline]
pub(crate) fn ar_residual(xbar: &[f64], lags: &[usize], weights: &[f64], t: usize) -> f64 {
    let mut r = xbar[t];
    for (&l, &w) in lags.iter().zip(weights) {
        r -= w * xbar[t - l];
    }
    r
}

/// `½ Σ_edges G_{t,t+d} (x_t − x_{t+d})² + (η/2)‖x̄‖²`.
pub fn laplacian_quadratic(graph: &TemporalGraph, xbar: &[f64], eta: f64) -> Result<f64> {
    graph.check(xbar)?;
    let edge_sum: f64 = graph
        .edges
        .iter()
        .map(|(&(t, d), &g)| {
            let diff = xbar[t] - xbar[t + d];
            g * diff * diff
        })
        .sum();
    let norm_sq: f64 = xbar.iter().map(|x| x * x).sum();
    Ok(0.5 * edge_sum + 0.5 * eta * norm_sq)
}

/// `H v` for the constant Hessian `H` of [`ar_reg_value`], in `O(T·|L|)`.
pub fn ar_hessian_matvec(lag_set: &LagSet, weights: &[f64], eta: f64, v: &[f64]) -> Result<Vec<f64>> {
    lag_set.check_len(v.len())?;
    lag_set.check_weights(weights)?;
    let mut out = vec![0.0; v.len()];
    ar_hessian_apply(lag_set.lags(), weights, eta, v, &mut out);
    Ok(out)
}

/// Writes `scale · H v` without validation; `out` is overwritten.
pub(crate) fn ar_hessian_apply_scaled(
    lags: &[usize],
    weights: &[f64],
    eta: f64,
    scale: f64,
    v: &[f64],
    out: &mut [f64],
) {
    let l_max = *lags.last().expect("nonempty lag set");
    for (o, &x) in out.iter_mut().zip(v) {
        *o = scale * eta * x;
    }
    for t in l_max..v.len() {
        let r = scale * ar_residual(v, lags, weights, t);
        out[t] += r;
        for (&l, &w) in lags.iter().zip(weights) {
            out[t - l] -= w * r;
        }
    }
}

fn ar_hessian_apply(lags: &[usize], weights: &[f64], eta: f64, v: &[f64], out: &mut [f64]) {
    ar_hessian_apply_scaled(lags, weights, eta, 1.0, v, out)
}

/// Symmetric boolean pattern over `T×T` positions.
#[derive(Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    bits: Vec<bool>,
}

impl SparsityPattern {
    pub fn new(n: usize) -> Self {
        SparsityPattern {
            n,
            bits: vec![false; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: usize, t: usize) -> bool {
        self.bits[s * self.n + t]
    }

    pub fn set(&mut self, s: usize, t: usize) {
        self.bits[s * self.n + t] = true;
        self.bits[t * self.n + s] = true;
    }

    /// Distinct `|s − t|` over set off-diagonal entries.
    pub fn distances(&self) -> Vec<usize> {
        let mut ds: Vec<usize> = (0..self.n)
            .flat_map(|s| (s + 1..self.n).filter(move |&t| self.get(s, t)).map(move |t| t - s))
            .collect();
        ds.sort_unstable();
        ds.dedup();
        ds
    }
}

impl fmt::Debug for SparsityPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SparsityPattern {}x{}", self.n, self.n)?;
        for s in 0..self.n {
            let row: String = (0..self.n).map(|t| if self.get(s, t) { '#' } else { '.' }).collect();
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

/// Off-diagonal nonzero pattern of the regularizer's Hessian, read from the
/// edges of [`build_ar_graph`]. Diagonal positions are always set.
pub fn hessian_sparsity_pattern(lag_set: &LagSet, weights: &[f64], t_count: usize) -> Result<SparsityPattern> {
    let graph = build_ar_graph(lag_set, weights, t_count)?;
    let mut pattern = SparsityPattern::new(t_count);
    for t in 0..t_count {
        pattern.set(t, t);
    }
    for &(t, d) in graph.edges().keys() {
        pattern.set(t, t + d);
    }
    Ok(pattern)
}
