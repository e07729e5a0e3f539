//! Cohort comparisons over completed quiz scores.

use lipread_core::quiz::ScoreSummary;
use lipread_core::stats::{self, BestModel, BestResult, McmcConfig, ScoreSample, StatsError, TTestResult, ZTestResult};
use lipread_core::{DatasetTag, Protocol};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cohort {protocol}/{dataset_tag} has {sessions} completed sessions, at least 2 are needed")]
    InsufficientData { protocol: Protocol, dataset_tag: DatasetTag, sessions: usize },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Z,
    T,
    Best,
}

impl std::str::FromStr for TestKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "z" => Ok(Self::Z),
            "t" => Ok(Self::T),
            "best" => Ok(Self::Best),
            other => Err(format!("unknown test {other:?}, expected z, t or best")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cohort {
    pub protocol: Protocol,
    pub dataset_tag: DatasetTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub protocol: Protocol,
    pub dataset_tag: DatasetTag,
    pub n: usize,
    pub mean: f64,
    pub sem: f64,
    pub scores: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TestOutcome {
    Z(ZTestResult),
    T(TTestResult),
    Best(Box<BestResult>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub test: TestKind,
    pub a: CohortSummary,
    pub b: CohortSummary,
    pub result: TestOutcome,
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub test: TestKind,
    pub alpha: f64,
    pub mcmc: McmcConfig,
}

impl CompareOptions {
    pub fn new(test: TestKind) -> Self {
        Self { test, alpha: 0.1, mcmc: McmcConfig::new(0) }
    }
}

fn cohort(summaries: &[ScoreSummary], c: Cohort) -> Result<(CohortSummary, ScoreSample), ReportError> {
    let scores: Vec<u32> =
        summaries.iter().filter(|s| s.protocol == c.protocol && s.dataset_tag == c.dataset_tag).map(|s| s.score).collect();
    if scores.len() < 2 {
        return Err(ReportError::InsufficientData { protocol: c.protocol, dataset_tag: c.dataset_tag, sessions: scores.len() });
    }
    let values: Vec<f64> = scores.iter().map(|&s| f64::from(s)).collect();
    let summary = CohortSummary {
        protocol: c.protocol,
        dataset_tag: c.dataset_tag,
        n: scores.len(),
        mean: stats::mean(&values),
        sem: stats::sem(&values)?,
        scores,
    };
    Ok((summary, ScoreSample::new(format!("{}/{}", c.protocol, c.dataset_tag), values)))
}

/// Compares two cohorts of completed sessions with the chosen test.
pub fn stats_report(summaries: &[ScoreSummary], a: Cohort, b: Cohort, opts: &CompareOptions) -> Result<CompareReport, ReportError> {
    let (sa, xa) = cohort(summaries, a)?;
    let (sb, xb) = cohort(summaries, b)?;
    let result = compare_samples(&xa, &xb, opts)?;
    Ok(CompareReport { test: opts.test, a: sa, b: sb, result })
}

pub fn compare_samples(a: &ScoreSample, b: &ScoreSample, opts: &CompareOptions) -> Result<TestOutcome, StatsError> {
    Ok(match opts.test {
        TestKind::Z => TestOutcome::Z(stats::z_test(a, b, opts.alpha)?),
        TestKind::T => TestOutcome::T(stats::t_test(a, b)?),
        TestKind::Best => TestOutcome::Best(Box::new(best_parallel(a, b, opts.mcmc.clone())?)),
    })
}

/// BEST with one thread per chain. Same result as the sequential run.
pub fn best_parallel(a: &ScoreSample, b: &ScoreSample, config: McmcConfig) -> Result<BestResult, StatsError> {
    let model = BestModel::new(a, b, config)?;
    let chains = std::thread::scope(|s| {
        let handles: Vec<_> = (0..model.config().chains)
            .map(|c| {
                s.spawn({
                    let model = &model;
                    move || model.run_chain(c)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread")).collect()
    });
    BestResult::from_chains(model.config(), chains)
}
