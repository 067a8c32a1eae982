//! Normalized deviation and normalized RMSE.
//!
//! Both divide by the mean absolute truth over the evaluation entries.

use std::io::Write;

use crate::error::{Error, Result};

fn check(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} truth values",
            pred.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::EmptyMask);
    }
    let denom = truth.iter().map(|y| y.abs()).sum::<f64>() / truth.len() as f64;
    if denom == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(denom)
}

/// `mean |ŷ − y| / mean |y|`.
pub fn nd(pred: &[f64], truth: &[f64]) -> Result<f64> {
    let denom = check(pred, truth)?;
    let mae = pred.iter().zip(truth).map(|(p, y)| (p - y).abs()).sum::<f64>() / truth.len() as f64;
    Ok(mae / denom)
}

/// `sqrt(mean (ŷ − y)²) / mean |y|`.
pub fn nrmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    let denom = check(pred, truth)?;
    let mse = pred.iter().zip(truth).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / truth.len() as f64;
    Ok(mse.sqrt() / denom)
}

/// One evaluation row.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub split_id: String,
    pub nd: f64,
    pub nrmse: f64,
    pub n_test: usize,
}

impl EvalReport {
    pub fn evaluate(method: &str, split_id: &str, pred: &[f64], truth: &[f64]) -> Result<Self> {
        Ok(EvalReport {
            method: method.to_string(),
            split_id: split_id.to_string(),
            nd: nd(pred, truth)?,
            nrmse: nrmse(pred, truth)?,
            n_test: truth.len(),
        })
    }

    pub const CSV_HEADER: &'static str = "method,split_id,nd,nrmse,n_test";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{}",
            self.method, self.split_id, self.nd, self.nrmse, self.n_test
        )
    }
}

/// Writes a header line followed by one line per report.
pub fn write_reports<W: Write>(mut out: W, reports: &[EvalReport]) -> std::io::Result<()> {
    writeln!(out, "{}", EvalReport::CSV_HEADER)?;
    for r in reports {
        writeln!(out, "{}", r.to_csv_row())?;
    }
    Ok(())
}
