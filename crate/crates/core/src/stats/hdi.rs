use alloc::vec::Vec;

use super::StatsError;

pub const MIN_HDI_SAMPLES: usize = 100;

/// Highest density interval: the narrowest window over the sorted samples
/// that holds `ceil(mass * n)` of them.
pub fn hdi(samples: &[f64], mass: f64) -> Result<(f64, f64), StatsError> {
    if !(mass > 0.0 && mass < 1.0) {
        return Err(StatsError::InvalidMass);
    }
    if samples.len() < MIN_HDI_SAMPLES {
        return Err(StatsError::TooFewSamples { n: samples.len(), min: MIN_HDI_SAMPLES });
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let keep = (libm::ceil(mass * n as f64) as usize).clamp(1, n);
    let mut best = 0;
    let mut best_width = f64::INFINITY;
    for i in 0..=n - keep {
        let width = sorted[i + keep - 1] - sorted[i];
        if width < best_width {
            best_width = width;
            best = i;
        }
    }
    Ok((sorted[best], sorted[best + keep - 1]))
}
