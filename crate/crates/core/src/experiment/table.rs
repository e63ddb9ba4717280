use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// QoS audit tolerance for emitted rates.
pub const AUDIT_TOL: f64 = 1e-6;

/// One user of one solved (or infeasible) instance. Rate fields are empty
/// for infeasible instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    /// `gp` for the gradient-projection solvers, `oracle` for the grid search.
    pub solver: &'static str,
    pub trial: usize,
    pub tsnr_db: f64,
    pub epsilon: f64,
    pub k: usize,
    /// 1-based, weakest user first.
    pub user_index: usize,
    /// Gain as used by the rate model (after gain scaling).
    pub gain: f64,
    pub target: f64,
    pub rate: Option<f64>,
    pub sum_rate: Option<f64>,
    pub min_rate: Option<f64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Every emitted rate meets its target within [`AUDIT_TOL`].
    pub fn audit(&self) -> Result<()> {
        for (i, r) in self.rows.iter().enumerate() {
            if let Some(rate) = r.rate {
                if rate < r.target - AUDIT_TOL {
                    return Err(Error::Domain(format!(
                        "row {i}: rate {rate} below target {} (trial {}, user {})",
                        r.target, r.trial, r.user_index
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(path, &self.rows)
    }
}

/// Statistics of one sweep point over its feasible trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub solver: &'static str,
    pub tsnr_db: f64,
    pub epsilon: f64,
    pub k: usize,
    pub qos: String,
    /// `sum_rate` or `min_rate`.
    pub statistic: &'static str,
    pub trials: usize,
    pub feasible: usize,
    pub infeasible: usize,
    pub mean: Option<f64>,
    /// Unbiased sample variance; empty below two feasible trials.
    pub variance: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramRow {
    pub experiment: String,
    pub tsnr_db: f64,
    pub epsilon: f64,
    pub k: usize,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub experiment: String,
    pub trial: usize,
    pub tsnr_db: f64,
    pub epsilon: f64,
    pub k: usize,
    pub qos: String,
    pub beta: Option<f64>,
    pub iteration: usize,
    pub objective: f64,
    pub step: f64,
    pub min_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub experiment: String,
    pub solver: &'static str,
    pub trial: usize,
    pub tsnr_db: f64,
    pub epsilon: f64,
    pub k: usize,
    pub qos: String,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentRow {
    pub trial: usize,
    pub user_id: usize,
    pub x: f64,
    pub y: f64,
    pub class: String,
    pub vap_id: Option<usize>,
    pub dedicated: bool,
    pub status: String,
    pub bandwidth_hz: f64,
    pub spectral_efficiency: Option<f64>,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSummaryRow {
    pub trial: usize,
    pub metric: String,
    pub value: f64,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean, unbiased variance, min and max; `None` fields when undefined.
pub fn describe(values: &[f64]) -> (Option<f64>, Option<f64>, Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None, None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = (values.len() > 1)
        .then(|| values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0));
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (Some(mean), variance, Some(min), Some(max))
}

/// Fixed-width bins aligned to multiples of `width`, covering all values.
/// Returns `(lo, hi, count)` per bin.
pub fn histogram(values: &[f64], width: f64) -> Vec<(f64, f64, usize)> {
    if values.is_empty() {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first = (lo / width).floor() as i64;
    let last = ((hi / width).floor() as i64).max(first);
    let mut counts = vec![0usize; (last - first + 1) as usize];
    for v in values {
        let idx = ((v / width).floor() as i64 - first).clamp(0, last - first) as usize;
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let b = first + i as i64;
            (edge(b, width), edge(b + 1, width), c)
        })
        .collect()
}

/// `b·width` rounded to 12 decimals so edges print as written.
fn edge(b: i64, width: f64) -> f64 {
    (b as f64 * width * 1e12).round() / 1e12
}
