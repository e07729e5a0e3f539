use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::levenshtein;

/// How many spelling mistakes a free-text answer may contain.
///
/// The allowance is `len(truth) / divisor` edits (integer division), raised to
/// `min_allowance` once the truth has at least `min_allowance_len` characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradingConfig {
    pub divisor: usize,
    pub min_allowance_len: usize,
    pub min_allowance: usize,
}

impl Default for GradingConfig {
    fn default() -> Self {
        Self { divisor: 5, min_allowance_len: 4, min_allowance: 1 }
    }
}

impl GradingConfig {
    pub fn allowance(&self, truth_len: usize) -> usize {
        let base = truth_len.checked_div(self.divisor).unwrap_or(0);
        if truth_len >= self.min_allowance_len {
            base.max(self.min_allowance)
        } else {
            base
        }
    }
}

/// Case-insensitive, whitespace-trimmed comparison tolerant of minor misspellings.
pub fn grade_free_text(submitted: &str, truth: &str, cfg: &GradingConfig) -> bool {
    let s: Vec<char> = submitted.trim().to_lowercase().chars().collect();
    let t: Vec<char> = truth.trim().to_lowercase().chars().collect();
    levenshtein(&s, &t) <= cfg.allowance(t.len())
}
