//! Rank tests, curve fitting and resampling used by the analysis pipeline.

mod bootstrap;
mod mann_whitney;
mod power_law;
mod sensitivity;

use alloc::vec::Vec;

pub use bootstrap::bootstrap_median_ci;
pub use mann_whitney::{exact_u_distribution, mann_whitney, RankTestMethod, RankTestResult, EXACT_LIMIT};
pub use power_law::{fit_power_law, PowerLawFit};
pub use sensitivity::{
    sensitivity, Condition, FactorComparison, SensitivityReport, TreatmentTable, DEFAULT_ALPHA,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("power-law fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("power-law fit needs positive, finite x and y (point {0})")]
    NonPositive(usize),
    #[error("confidence level must lie in (0, 1)")]
    InvalidLevel,
    #[error("treatment {0} has no observations")]
    MissingTreatment(u8),
}

/// Median of the values; averages the two middle values for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(median_sorted(&sorted))
}

pub(crate) fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Population standard deviation (divides by n).
pub fn population_std(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    Some(libm::sqrt(var))
}

/// Least-squares line `y = intercept + slope · x`; `None` when x is constant.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let mx = mean(x)?;
    let my = mean(y)?;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

pub(crate) fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}
