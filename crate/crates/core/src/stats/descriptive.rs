use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_values, StatsError};

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased (n - 1) sample variance, two-pass.
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

/// Standard error of the mean, s / sqrt(n).
pub fn sem(values: &[f64]) -> Result<f64, StatsError> {
    check_values(values, 2)?;
    Ok(libm::sqrt(sample_variance(values) / values.len() as f64))
}

/// Quantile of already sorted data by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Tukey boxplot statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSummary {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Most extreme data points within 1.5 IQR of the quartiles.
    pub whisker_low: f64,
    pub whisker_high: f64,
    /// Data beyond the whiskers, ascending.
    pub outliers: Vec<f64>,
}

pub fn boxplot_summary(values: &[f64]) -> Result<BoxplotSummary, StatsError> {
    check_values(values, 1)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 0.25);
    let median = quantile(&sorted, 0.5);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = || sorted.iter().copied().filter(|&v| v >= lo_fence && v <= hi_fence);
    // The quartiles always lie inside the fences, so `inside` is never empty.
    let whisker_low = inside().next().unwrap_or(q1);
    let whisker_high = inside().next_back().unwrap_or(q3);
    let outliers = sorted.iter().copied().filter(|&v| v < lo_fence || v > hi_fence).collect();
    Ok(BoxplotSummary { n: values.len(), median, q1, q3, whisker_low, whisker_high, outliers })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sem_of_constant_is_zero() {
        assert_eq!(sem(&[3.0; 10]).unwrap(), 0.0);
    }

    #[test]
    fn sem_closed_form() {
        // Alternating 10 ± c with n = 50 has sd 4 when c² · 50/49 = 16.
        let c = (16.0f64 * 49.0 / 50.0).sqrt();
        let v: Vec<f64> = (0..50).map(|i| if i % 2 == 0 { 10.0 + c } else { 10.0 - c }).collect();
        assert!((sample_variance(&v).sqrt() - 4.0).abs() < 1e-12);
        assert!((sem(&v).unwrap() - 4.0 / 50f64.sqrt()).abs() < 1e-12);
        assert!((sem(&v).unwrap() - 0.5657).abs() < 1e-4);
    }

    #[test]
    fn sem_needs_two_values() {
        assert!(matches!(sem(&[1.0]), Err(StatsError::DegenerateSample(_))));
        assert_eq!(sem(&[1.0, f64::NAN]), Err(StatsError::NonFinite));
    }

    #[test]
    fn boxplot_of_one_to_five() {
        let b = boxplot_summary(&[5.0, 3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!((b.median, b.q1, b.q3), (3.0, 2.0, 4.0));
        assert_eq!((b.whisker_low, b.whisker_high), (1.0, 5.0));
        assert!(b.outliers.is_empty());
    }

    #[test]
    fn boxplot_flags_far_point() {
        // q1 = 2, q3 = 4, IQR = 2, upper fence 7.
        let b = boxplot_summary(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!(b.outliers, vec![100.0]);
        assert_eq!(b.whisker_high, 4.0);
        assert_eq!(b.whisker_low, 1.0);
    }

    #[test]
    fn boxplot_of_singleton() {
        let b = boxplot_summary(&[7.0]).unwrap();
        assert_eq!((b.median, b.q1, b.q3, b.whisker_low, b.whisker_high), (7.0, 7.0, 7.0, 7.0, 7.0));
        assert!(b.outliers.is_empty());
    }

    #[test]
    fn quantile_interpolates() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&s, 0.5), 2.5);
        assert_eq!(quantile(&s, 0.25), 1.75);
        assert_eq!(quantile(&s, 1.0), 4.0);
    }
}
