use crate::error::{Error, Result};

/// One forecasting window: train on columns `0..train_end`, predict
/// `train_end..train_end + horizon`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub train_end: usize,
    pub horizon: usize,
}

impl Window {
    pub fn test_range(&self) -> std::ops::Range<usize> {
        self.train_end..self.train_end + self.horizon
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub windows: Vec<Window>,
}

/// Back-to-back windows covering the last `n_windows · horizon` time points.
pub fn rolling_splits(t_count: usize, horizon: usize, n_windows: usize) -> Result<SplitSpec> {
    if horizon == 0 || n_windows == 0 {
        return Err(Error::InvalidArgument("horizon and window count must be positive".into()));
    }
    let span = horizon
        .checked_mul(n_windows)
        .filter(|&s| s <= t_count)
        .ok_or(Error::TooManyWindows {
            windows: n_windows,
            horizon,
            t_count,
        })?;
    let start = t_count - span;
    Ok(SplitSpec {
        windows: (0..n_windows)
            .map(|j| Window {
                train_end: start + j * horizon,
                horizon,
            })
            .collect(),
    })
}
