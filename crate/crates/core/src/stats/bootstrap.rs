use alloc::vec::Vec;

use rand::Rng;

use super::{median_sorted, sorted_copy, StatsError};
use crate::rng::{rng_for, Stream};

/// Percentile-bootstrap confidence interval of the median.
///
/// Resample `b` draws from its own derived stream, so the result depends only
/// on `(values, level, resamples, seed)`. The interval is widened if needed
/// to contain the sample median.
pub fn bootstrap_median_ci(values: &[f64], level: f64, resamples: usize, seed: u64) -> Result<(f64, f64), StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if !(level > 0.0 && level < 1.0) || resamples == 0 {
        return Err(StatsError::InvalidLevel);
    }
    let n = values.len();
    let mut scratch = Vec::with_capacity(n);
    let mut medians: Vec<f64> = (0..resamples)
        .map(|b| {
            let mut rng = rng_for(seed, Stream::Bootstrap, b as u64);
            scratch.clear();
            scratch.extend((0..n).map(|_| values[rng.random_range(0..n)]));
            scratch.sort_by(f64::total_cmp);
            median_sorted(&scratch)
        })
        .collect();
    medians.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    let b = resamples as f64;
    let lo_idx = (libm::floor(alpha / 2.0 * b) as usize).min(resamples - 1);
    let hi_idx = (libm::ceil((1.0 - alpha / 2.0) * b) as usize).clamp(1, resamples) - 1;
    let center = median_sorted(&sorted_copy(values));
    Ok((medians[lo_idx].min(center), medians[hi_idx].max(center)))
}
