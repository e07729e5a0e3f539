use serde::{Deserialize, Serialize};

use super::descriptive::{mean, sample_variance};
use super::special::{normal_quantile, p_from_t, p_from_z};
use super::{ScoreSample, StatsError};

/// Below this many values per group the normal approximation is questionable.
pub const LARGE_SAMPLE: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZTestResult {
    pub z: f64,
    pub p: f64,
    pub alpha: f64,
    /// Critical values ±Φ⁻¹(1 − α/2).
    pub accepted_range: (f64, f64),
    pub reject_null: bool,
    pub mean_a: f64,
    pub mean_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    /// Either group has fewer than 30 values.
    pub small_sample: bool,
}

/// Two-sample z-test on the difference of means (unpooled variances).
pub fn z_test(a: &ScoreSample, b: &ScoreSample, alpha: f64) -> Result<ZTestResult, StatsError> {
    a.check()?;
    b.check()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha);
    }
    let (ma, mb) = (mean(&a.values), mean(&b.values));
    let se = libm::sqrt(sample_variance(&a.values) / a.n() as f64 + sample_variance(&b.values) / b.n() as f64);
    let z = if se > 0.0 {
        (ma - mb) / se
    } else if ma == mb {
        0.0
    } else {
        return Err(StatsError::DegenerateSample("zero variance with unequal means (z is infinite)"));
    };
    let crit = normal_quantile(1.0 - 0.5 * alpha);
    let p = p_from_z(z);
    Ok(ZTestResult {
        z,
        p,
        alpha,
        accepted_range: (-crit, crit),
        // p < α and |z| > crit agree except within rounding of the boundary.
        reject_null: p < alpha,
        mean_a: ma,
        mean_b: mb,
        n_a: a.n(),
        n_b: b.n(),
        small_sample: a.n() < LARGE_SAMPLE || b.n() < LARGE_SAMPLE,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub df: f64,
    pub p: f64,
    pub mean_diff: f64,
}

/// Two-tailed Welch t-test.
pub fn t_test(a: &ScoreSample, b: &ScoreSample) -> Result<TTestResult, StatsError> {
    a.check()?;
    b.check()?;
    let (na, nb) = (a.n() as f64, b.n() as f64);
    let (ma, mb) = (mean(&a.values), mean(&b.values));
    let (qa, qb) = (sample_variance(&a.values) / na, sample_variance(&b.values) / nb);
    let se2 = qa + qb;
    if se2 <= 0.0 {
        if ma == mb {
            return Ok(TTestResult { t: 0.0, df: na + nb - 2.0, p: 1.0, mean_diff: 0.0 });
        }
        return Err(StatsError::DegenerateSample("zero variance with unequal means (t is infinite)"));
    }
    let t = (ma - mb) / libm::sqrt(se2);
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    Ok(TTestResult { t, df, p: p_from_t(t, df), mean_diff: ma - mb })
}
