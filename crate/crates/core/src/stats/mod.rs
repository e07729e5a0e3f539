//! Cohort score comparison: SEM, boxplots, two-sample z- and Welch t-tests,
//! highest density intervals and Bayesian estimation of the mean difference
//! (BEST) with a Metropolis-within-Gibbs sampler.

mod best;
mod descriptive;
mod diagnostics;
mod hdi;
mod hypothesis;
pub mod special;

pub use best::{best_compare, BestModel, BestResult, BestWarning, ChainDraws, McmcConfig, ParamDiagnostic, PosteriorDraws};
pub use descriptive::{boxplot_summary, mean, quantile, sample_variance, sem, BoxplotSummary};
pub use diagnostics::{effective_sample_size, split_rhat};
pub use hdi::hdi;
pub use hypothesis::{t_test, z_test, TTestResult, ZTestResult};
pub use special::{normal_cdf, normal_quantile, p_from_t, p_from_z};

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),
    #[error("sample contains non-finite values")]
    NonFinite,
    #[error("need at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },
    #[error("mass must lie strictly between 0 and 1")]
    InvalidMass,
    #[error("alpha must lie strictly between 0 and 1")]
    InvalidAlpha,
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Scores of one cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSample {
    #[serde(default)]
    pub label: String,
    pub values: Vec<f64>,
}

impl ScoreSample {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        Self { label: label.into(), values }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Checks the sample is usable for a two-sample test.
    pub fn check(&self) -> Result<(), StatsError> {
        check_values(&self.values, 2)
    }
}

pub(crate) fn check_values(values: &[f64], min: usize) -> Result<(), StatsError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    if values.len() < min {
        return Err(StatsError::DegenerateSample("too few values"));
    }
    Ok(())
}
