use serde::{Deserialize, Serialize};

use super::{linear_fit, StatsError};

/// `f(t) = a · t^(−k)` fitted on the log-log scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub k: f64,
    /// Coefficient of determination of the log-log line.
    pub r2: f64,
}

impl PowerLawFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.a * libm::pow(t, -self.k)
    }
}

/// Least squares on `(ln t, ln y)`; `a = exp(intercept)`, `k = −slope`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit, StatsError> {
    if points.len() < 3 {
        return Err(StatsError::TooFewPoints(points.len()));
    }
    if let Some(i) = points
        .iter()
        .position(|&(t, y)| !(t > 0.0 && y > 0.0 && t.is_finite() && y.is_finite()))
    {
        return Err(StatsError::NonPositive(i));
    }
    let lx: alloc::vec::Vec<f64> = points.iter().map(|p| libm::log(p.0)).collect();
    let ly: alloc::vec::Vec<f64> = points.iter().map(|p| libm::log(p.1)).collect();
    let (intercept, slope) = linear_fit(&lx, &ly).ok_or(StatsError::TooFewPoints(1))?;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let ss_tot: f64 = ly.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(PowerLawFit { a: libm::exp(intercept), k: -slope, r2 })
}
