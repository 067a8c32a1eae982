use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// An `n × T` data matrix together with its observation mask `Ω`.
///
/// Unobserved cells are stored as `0.0` and must never be read as data.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedSeries {
    values: DenseMatrix,
    mask: Vec<bool>,
}

impl ObservedSeries {
    pub fn new(values: DenseMatrix, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != values.rows() * values.cols() {
            return Err(Error::DimensionMismatch(format!(
                "mask of length {} for a {}x{} matrix",
                mask.len(),
                values.rows(),
                values.cols()
            )));
        }
        let mut values = values;
        for (v, &seen) in values.as_mut_slice().iter_mut().zip(&mask) {
            if !seen {
                *v = 0.0;
            }
        }
        Ok(ObservedSeries { values, mask })
    }

    pub fn fully_observed(values: DenseMatrix) -> Self {
        let mask = vec![true; values.rows() * values.cols()];
        ObservedSeries { values, mask }
    }

    /// Builds from row-major cells where `None` (or a NaN) marks a missing entry.
    pub fn from_cells(n: usize, t_count: usize, cells: &[Option<f64>]) -> Result<Self> {
        if cells.len() != n * t_count {
            return Err(Error::DimensionMismatch(format!(
                "{} cells for a {n}x{t_count} matrix",
                cells.len()
            )));
        }
        let mut data = Vec::with_capacity(cells.len());
        let mut mask = Vec::with_capacity(cells.len());
        for c in cells {
            match c {
                Some(v) if v.is_finite() => {
                    data.push(*v);
                    mask.push(true);
                }
                Some(v) if !v.is_nan() => return Err(Error::NonFiniteEncountered("observed value")),
                _ => {
                    data.push(0.0);
                    mask.push(false);
                }
            }
        }
        Ok(ObservedSeries {
            values: DenseMatrix::from_vec(n, t_count, data)?,
            mask,
        })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn t_count(&self) -> usize {
        self.values.cols()
    }

    /// Raw values; unobserved cells read as zero.
    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn is_observed(&self, i: usize, t: usize) -> bool {
        self.mask[i * self.t_count() + t]
    }

    pub fn get(&self, i: usize, t: usize) -> Option<f64> {
        self.is_observed(i, t).then(|| self.values[(i, t)])
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn observed_fraction(&self) -> f64 {
        self.observed_count() as f64 / self.mask.len().max(1) as f64
    }

    /// Observed `(i, t, y)` triples in row-major order.
    pub fn iter_observed(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let t_count = self.t_count();
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(move |(idx, _)| (idx / t_count, idx % t_count, self.values.as_slice()[idx]))
    }

    /// Observed time indices of each row.
    pub fn observed_by_row(&self) -> Vec<Vec<usize>> {
        (0..self.n())
            .map(|i| (0..self.t_count()).filter(|&t| self.is_observed(i, t)).collect())
            .collect()
    }

    /// Observed series indices of each time point.
    pub fn observed_by_col(&self) -> Vec<Vec<usize>> {
        let mut cols = vec![Vec::new(); self.t_count()];
        for (i, t, _) in self.iter_observed() {
            cols[t].push(i);
        }
        cols
    }

    /// Time points `start..end`.
    pub fn time_slice(&self, start: usize, end: usize) -> Result<ObservedSeries> {
        if start > end || end > self.t_count() {
            return Err(Error::InvalidArgument(format!(
                "time slice {start}..{end} of {} points",
                self.t_count()
            )));
        }
        let t = self.t_count();
        let mask = (0..self.n())
            .flat_map(|i| self.mask[i * t + start..i * t + end].iter().copied())
            .collect();
        Ok(ObservedSeries {
            values: self.values.col_range(start, end),
            mask,
        })
    }

    /// Same values, different mask. Cells newly marked observed must have
    /// been observed here already.
    pub fn restrict(&self, mask: Vec<bool>) -> Result<ObservedSeries> {
        if mask.len() != self.mask.len() {
            return Err(Error::DimensionMismatch("mask length".into()));
        }
        if mask.iter().zip(&self.mask).any(|(&new, &old)| new && !old) {
            return Err(Error::InvalidArgument("mask exposes unobserved cells".into()));
        }
        ObservedSeries::new(self.values.clone(), mask)
    }

    pub fn observed_mean(&self) -> Result<f64> {
        let count = self.observed_count();
        if count == 0 {
            return Err(Error::EmptyMask);
        }
        Ok(self.iter_observed().map(|(_, _, y)| y).sum::<f64>() / count as f64)
    }
}
