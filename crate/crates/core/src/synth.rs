//! Dataset manifests, adapter specifications and per-entry generation state.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::VocabEntry;
use crate::rng::{sample_indices, seeded_rng};
use crate::Protocol;

/// TTS speaking-rate multipliers a voice may be rendered at.
pub const ALLOWED_SPEEDS: [f64; 4] = [1.0, 1.5, 1.7, 2.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("no driving videos given")]
    NoDrivingVideos,
    #[error("variations per label must be at least 1")]
    ZeroVariations,
    #[error("vocabulary mixes protocols {0} and {1}")]
    MixedProtocols(Protocol, Protocol),
    #[error("label {0} appears more than once")]
    DuplicateLabel(String),
    #[error("duplicate entry ({label_id}, {variation_id})")]
    DuplicateEntry { label_id: String, variation_id: u32 },
    #[error("manifest has {actual} entries, expected {expected}")]
    EntryCountMismatch { expected: usize, actual: usize },
    #[error("speed {0} is not one of 1.0, 1.5, 1.7, 2.0")]
    InvalidSpeed(f64),
    #[error("timeout must be positive and finite")]
    InvalidTimeout,
    #[error("command template lacks placeholder {0}")]
    MissingPlaceholder(&'static str),
    #[error("command template is empty")]
    EmptyCommand,
    #[error("unknown placeholder {{{0}}} in command template")]
    UnknownPlaceholder(String),
    #[error("entry ({label_id}, {variation_id}) cannot go from {from:?} to {to:?}")]
    InvalidTransition { label_id: String, variation_id: u32, from: EntryStatus, to: EntryStatus },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdapterKind {
    Tts,
    LipSync,
}

impl AdapterKind {
    /// Placeholders a subprocess template for this kind must contain.
    pub fn required_placeholders(self) -> &'static [&'static str] {
        match self {
            AdapterKind::Tts => &["text", "out"],
            AdapterKind::LipSync => &["audio", "video", "out"],
        }
    }
}

const KNOWN_PLACEHOLDERS: [&str; 6] = ["text", "audio", "video", "out", "voice", "speed"];

/// How an adapter is reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Transport {
    /// Whitespace-separated argv; `{name}` placeholders are substituted per
    /// argument, never through a shell.
    Subprocess { command: String },
    /// JSON POST; a 200 response body carries the output path.
    Http { endpoint: String },
    /// Built-in stand-in: a sine tone for TTS, copy-through for lip-sync.
    Mock {
        /// Labels for which the mock reports failure.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        fail_labels: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterSpec {
    pub kind: AdapterKind,
    pub transport: Transport,
    /// Voice or accent tag, e.g. "AE" or "IE".
    #[serde(default)]
    pub voice: String,
    #[serde(default = "default_speed")]
    pub speed: f64,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
}

fn default_speed() -> f64 {
    1.0
}

fn default_timeout() -> f64 {
    120.0
}

impl AdapterSpec {
    pub fn mock(kind: AdapterKind) -> Self {
        Self {
            kind,
            transport: Transport::Mock { fail_labels: Vec::new() },
            voice: String::new(),
            speed: 1.0,
            timeout_s: default_timeout(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !ALLOWED_SPEEDS.contains(&self.speed) {
            return Err(SynthError::InvalidSpeed(self.speed));
        }
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return Err(SynthError::InvalidTimeout);
        }
        if let Transport::Subprocess { command } = &self.transport {
            if command.split_whitespace().next().is_none() {
                return Err(SynthError::EmptyCommand);
            }
            let found = placeholders(command);
            if let Some(unknown) = found.iter().find(|p| !KNOWN_PLACEHOLDERS.contains(&p.as_str())) {
                return Err(SynthError::UnknownPlaceholder(unknown.clone()));
            }
            for &p in self.kind.required_placeholders() {
                if !found.iter().any(|f| f == p) {
                    return Err(SynthError::MissingPlaceholder(p));
                }
            }
        }
        Ok(())
    }
}

fn placeholders(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end) => {
                out.push(after[..end].to_string());
                rest = &after[end + 1..];
            }
            None => break,
        }
    }
    out
}

/// Expands a subprocess template into argv. Each whitespace-separated token
/// is one argument, so substituted values never split or reach a shell.
pub fn render_command(template: &str, values: &[(&str, &str)]) -> Vec<String> {
    template
        .split_whitespace()
        .map(|tok| {
            let mut arg = tok.to_string();
            for (k, v) in values {
                arg = arg.replace(&format!("{{{k}}}"), v);
            }
            arg
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryStatus {
    Pending,
    Done,
    Failed,
}

/// Why an entry failed, as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryError {
    /// Machine-readable code such as `adapter_timeout` or `checksum_mismatch`.
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label_id: String,
    pub variation_id: u32,
    pub driving_video_id: String,
    pub text: String,
    #[serde(default)]
    pub generated_video_path: Option<String>,
    /// Hex SHA-256 of the generated video.
    #[serde(default)]
    pub checksum: Option<String>,
    pub status: EntryStatus,
    /// Attempts spent on the stage that finished the job.
    #[serde(default)]
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<EntryError>,
    /// Unix milliseconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completed_at_ms: Option<u64>,
}

impl ManifestEntry {
    pub fn key(&self) -> (&str, u32) {
        (&self.label_id, self.variation_id)
    }

    fn transition(&mut self, to: EntryStatus) -> Result<(), SynthError> {
        let ok = matches!(
            (self.status, to),
            (EntryStatus::Pending, EntryStatus::Done | EntryStatus::Failed) | (EntryStatus::Failed, EntryStatus::Pending)
        );
        if !ok {
            return Err(SynthError::InvalidTransition {
                label_id: self.label_id.clone(),
                variation_id: self.variation_id,
                from: self.status,
                to,
            });
        }
        self.status = to;
        Ok(())
    }

    pub fn mark_done(&mut self, path: String, checksum: String, attempts: u32, now_ms: u64) -> Result<(), SynthError> {
        self.transition(EntryStatus::Done)?;
        self.generated_video_path = Some(path);
        self.checksum = Some(checksum);
        self.attempts = attempts;
        self.error = None;
        self.completed_at_ms = Some(now_ms);
        Ok(())
    }

    pub fn mark_failed(&mut self, error: EntryError, attempts: u32, now_ms: u64) -> Result<(), SynthError> {
        self.transition(EntryStatus::Failed)?;
        self.error = Some(error);
        self.attempts = attempts;
        self.completed_at_ms = Some(now_ms);
        Ok(())
    }

    /// Puts a failed entry back in the queue; the previous error is kept
    /// until the next outcome overwrites it.
    pub fn requeue(&mut self) -> Result<(), SynthError> {
        self.transition(EntryStatus::Pending)?;
        self.completed_at_ms = None;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub manifest_id: String,
    pub protocol: Protocol,
    pub accent_tag: String,
    pub variations_per_label: u32,
    pub seed: u64,
    /// Set when labels had to reuse driving videos.
    #[serde(default)]
    pub sampled_with_replacement: bool,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub pending: usize,
    pub done: usize,
    pub failed: usize,
}

impl StatusCounts {
    pub fn total(&self) -> usize {
        self.pending + self.done + self.failed
    }
}

impl DatasetManifest {
    pub fn counts(&self) -> StatusCounts {
        let mut c = StatusCounts::default();
        for e in &self.entries {
            match e.status {
                EntryStatus::Pending => c.pending += 1,
                EntryStatus::Done => c.done += 1,
                EntryStatus::Failed => c.failed += 1,
            }
        }
        c
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.label_id.as_str()).collect()
    }

    pub fn entry(&self, label_id: &str, variation_id: u32) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.key() == (label_id, variation_id))
    }

    pub fn entry_mut(&mut self, label_id: &str, variation_id: u32) -> Option<&mut ManifestEntry> {
        self.entries.iter_mut().find(|e| e.key() == (label_id, variation_id))
    }

    /// Re-queues failed entries and returns the indices of everything pending.
    pub fn prepare_run(&mut self) -> Vec<usize> {
        for e in &mut self.entries {
            if e.status == EntryStatus::Failed {
                let _ = e.requeue();
            }
        }
        (0..self.entries.len()).filter(|&i| self.entries[i].status == EntryStatus::Pending).collect()
    }

    /// Checks the structural invariants: unique (label, variation) keys and
    /// exactly `variations_per_label` entries for every label.
    pub fn validate(&self) -> Result<(), SynthError> {
        let mut keys = BTreeSet::new();
        for e in &self.entries {
            if !keys.insert(e.key()) {
                return Err(SynthError::DuplicateEntry { label_id: e.label_id.clone(), variation_id: e.variation_id });
            }
        }
        let labels = self.labels();
        if labels.len() * self.variations_per_label as usize != self.entries.len() {
            return Err(SynthError::EntryCountMismatch {
                expected: labels.len() * self.variations_per_label as usize,
                actual: self.entries.len(),
            });
        }
        Ok(())
    }
}

/// Pairs every label with `variations` driving videos.
///
/// Videos are drawn without replacement when there are enough of them,
/// otherwise with replacement and `sampled_with_replacement` is set.
pub fn build_manifest(
    vocab: &[VocabEntry],
    driving_videos: &[String],
    variations: u32,
    accent_tag: &str,
    seed: u64,
) -> Result<DatasetManifest, SynthError> {
    let first = vocab.first().ok_or(SynthError::EmptyVocabulary)?;
    if driving_videos.is_empty() {
        return Err(SynthError::NoDrivingVideos);
    }
    if variations == 0 {
        return Err(SynthError::ZeroVariations);
    }
    let mut seen = BTreeSet::new();
    for e in vocab {
        if e.protocol != first.protocol {
            return Err(SynthError::MixedProtocols(first.protocol, e.protocol));
        }
        if !seen.insert(e.label_id.as_str()) {
            return Err(SynthError::DuplicateLabel(e.label_id.clone()));
        }
    }

    let k = variations as usize;
    let with_replacement = k > driving_videos.len();
    let mut rng = seeded_rng(seed);
    let mut entries = Vec::with_capacity(vocab.len() * k);
    for e in vocab {
        let picks: Vec<usize> = if with_replacement {
            (0..k).map(|_| rng.random_range(0..driving_videos.len())).collect()
        } else {
            sample_indices(&mut rng, driving_videos.len(), k)
        };
        for (v, idx) in picks.into_iter().enumerate() {
            entries.push(ManifestEntry {
                label_id: e.label_id.clone(),
                variation_id: v as u32,
                driving_video_id: driving_videos[idx].clone(),
                text: e.text.clone(),
                generated_video_path: None,
                checksum: None,
                status: EntryStatus::Pending,
                attempts: 0,
                error: None,
                completed_at_ms: None,
            });
        }
    }
    Ok(DatasetManifest {
        manifest_id: format!("{}-{}-{:016x}", first.protocol.code().to_lowercase(), accent_tag.to_lowercase(), seed),
        protocol: first.protocol,
        accent_tag: accent_tag.to_string(),
        variations_per_label: variations,
        seed,
        sampled_with_replacement: with_replacement,
        entries,
    })
}

/// Pipeline stages of one generation job, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Tts,
    Align,
    LipSync,
    /// Removes the audio track from the generated video.
    Mute,
}

impl Stage {
    pub const ORDER: [Stage; 4] = [Stage::Tts, Stage::Align, Stage::LipSync, Stage::Mute];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff_base_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 1, backoff_base_ms: 2000 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based): base · 2^(retry − 1).
    pub fn backoff_ms(&self, retry: u32) -> u64 {
        self.backoff_base_ms.saturating_mul(1u64 << retry.saturating_sub(1).min(32))
    }
}

/// What the runner should do after a stage attempt failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NextStep {
    RetryAfterMs(u64),
    GiveUp,
}

/// Stage bookkeeping for one manifest entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub manifest_id: String,
    pub label_id: String,
    pub variation_id: u32,
    pub stages: [StageStatus; 4],
    /// Retries used on the current stage.
    pub retry_count: u32,
    policy: RetryPolicy,
}

impl GenerationJob {
    pub fn new(manifest_id: &str, entry: &ManifestEntry, policy: RetryPolicy) -> Self {
        Self {
            manifest_id: manifest_id.to_string(),
            label_id: entry.label_id.clone(),
            variation_id: entry.variation_id,
            stages: [StageStatus::Pending; 4],
            retry_count: 0,
            policy,
        }
    }

    /// The first stage that is not done, or None when the job is finished
    /// or has failed.
    pub fn current(&self) -> Option<Stage> {
        if self.is_failed() {
            return None;
        }
        Stage::ORDER.into_iter().zip(self.stages).find(|(_, s)| *s != StageStatus::Done).map(|(st, _)| st)
    }

    fn index(&self) -> Option<usize> {
        self.stages.iter().position(|s| *s != StageStatus::Done)
    }

    pub fn start(&mut self) -> Option<Stage> {
        let i = self.index()?;
        if self.stages[i] == StageStatus::Failed {
            return None;
        }
        self.stages[i] = StageStatus::Running;
        Some(Stage::ORDER[i])
    }

    pub fn succeed(&mut self) {
        if let Some(i) = self.index() {
            self.stages[i] = StageStatus::Done;
            self.retry_count = 0;
        }
    }

    pub fn fail(&mut self) -> NextStep {
        let Some(i) = self.index() else { return NextStep::GiveUp };
        if self.retry_count < self.policy.max_retries {
            self.retry_count += 1;
            self.stages[i] = StageStatus::Pending;
            NextStep::RetryAfterMs(self.policy.backoff_ms(self.retry_count))
        } else {
            self.stages[i] = StageStatus::Failed;
            NextStep::GiveUp
        }
    }

    /// Fails the current stage without retrying, for errors a retry cannot fix.
    pub fn abort(&mut self) {
        if let Some(i) = self.index() {
            self.stages[i] = StageStatus::Failed;
        }
    }

    /// Attempts spent on the current (or last) stage.
    pub fn attempts(&self) -> u32 {
        self.retry_count + 1
    }

    pub fn is_done(&self) -> bool {
        self.stages.iter().all(|s| *s == StageStatus::Done)
    }

    pub fn is_failed(&self) -> bool {
        self.stages.contains(&StageStatus::Failed)
    }
}
