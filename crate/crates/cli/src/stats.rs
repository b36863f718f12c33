//! Summary statistics for evaluation and training-curve reports.

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Box-plot summary. Quartiles interpolate linearly between order
/// statistics (position `p (n - 1)` in the sorted sample).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_stats(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(CliError::Config("no values to summarize".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(CliError::Config("NaN in values to summarize".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(BoxStats {
        count: sorted.len(),
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        mean: mean(&sorted),
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean and population standard deviation, two-pass.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    (m, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    /// Consecutive non-overlapping windows; a trailing partial window is
    /// dropped.
    #[default]
    Disjoint,
    /// Every window of the given size, advanced by the stride.
    Sliding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub window_start: u64,
    pub window_end: u64,
    pub mean_infidelity: f64,
    pub std_infidelity: f64,
}

/// Windowed mean and std of `values`, labelled with the first and last
/// episode numbers of each window.
pub fn windowed_curve(
    episodes: &[u64],
    values: &[f64],
    window: usize,
    mode: WindowMode,
    stride: usize,
) -> Result<Vec<CurvePoint>> {
    if window == 0 || stride == 0 {
        return Err(CliError::Config("window and stride must be positive".into()));
    }
    if episodes.len() != values.len() {
        return Err(CliError::Config("episode and value columns differ in length".into()));
    }
    let step = match mode {
        WindowMode::Disjoint => window,
        WindowMode::Sliding => stride,
    };
    let mut out = Vec::new();
    let mut start = 0;
    while start + window <= values.len() {
        let (m, s) = mean_std(&values[start..start + window]);
        out.push(CurvePoint {
            window_start: episodes[start],
            window_end: episodes[start + window - 1],
            mean_infidelity: m,
            std_infidelity: s,
        });
        start += step;
    }
    Ok(out)
}
