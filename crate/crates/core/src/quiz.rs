//! Quiz sessions: item sampling, blinded item views, grading and scoring.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{
    generate_distractors, grade_free_text, sentence_distractors, GradingConfig, LexiconError, PronDict, VisemeMap, VocabEntry,
};
use crate::rng::{sample_indices, seeded_rng, shuffle};
use crate::stats::{mean, sem};
use crate::synth::{DatasetManifest, EntryStatus};
use crate::{DatasetTag, Protocol};

pub const ITEMS_PER_SESSION: usize = 20;
pub const OPTIONS_PER_ITEM: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuizError {
    #[error("only {available} fresh labels left, a session needs {required}")]
    InsufficientFreshLabels { available: usize, required: usize },
    #[error("only {ready} fresh labels have generated videos, a session needs {required}")]
    ManifestIncomplete { ready: usize, required: usize },
    #[error("manifest is for {manifest}, session requested {requested}")]
    ProtocolMismatch { manifest: Protocol, requested: Protocol },
    #[error("label {0} is not in the vocabulary")]
    UnknownLabel(String),
    #[error("expected an answer for {expected}, got {got}")]
    OutOfOrderSubmission { expected: String, got: String },
    #[error("{0} was already answered")]
    DuplicateSubmission(String),
    #[error("session is complete")]
    SessionComplete,
    #[error("session is incomplete ({answered} of {total} answered)")]
    SessionIncomplete { answered: usize, total: usize },
    #[error("no item {0} in this session")]
    UnknownItem(String),
    #[error("attempt belongs to session {0}")]
    WrongSession(String),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionState {
    Active,
    Complete,
}

/// One question, including the server-side answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizItem {
    pub item_id: String,
    pub protocol: Protocol,
    pub label_id: String,
    pub variation_id: u32,
    /// Opaque reference to the muted video (the manifest checksum).
    pub video_ref: String,
    /// Five choices for WL and SL, empty for MWIS.
    #[serde(default)]
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masked_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_tag: Option<String>,
    pub answer: String,
}

/// What a learner may see of an item: no answer, no label, no dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizItemView {
    pub item_id: String,
    pub protocol: Protocol,
    pub video_ref: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masked_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_tag: Option<String>,
}

impl QuizItem {
    pub fn view(&self) -> QuizItemView {
        QuizItemView {
            item_id: self.item_id.clone(),
            protocol: self.protocol,
            video_ref: self.video_ref.clone(),
            options: self.options.clone(),
            masked_text: self.masked_text.clone(),
            context_tag: self.context_tag.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub session_id: String,
    pub item_id: String,
    /// Zero-based item position.
    pub position: usize,
    pub submitted: String,
    pub correct: bool,
    pub points: u32,
    /// Unix milliseconds.
    pub answered_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizSession {
    pub session_id: String,
    pub user_id: String,
    pub protocol: Protocol,
    pub dataset_tag: DatasetTag,
    pub manifest_id: String,
    pub seed: u64,
    pub items: Vec<QuizItem>,
    pub cursor: usize,
    pub attempts: Vec<AttemptRecord>,
    pub state: SessionState,
    pub created_at_ms: u64,
    pub updated_at_ms: u64,
}

/// Learner-facing session summary. Carries neither answers nor the dataset tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub user_id: String,
    pub protocol: Protocol,
    pub cursor: usize,
    pub total: usize,
    pub state: SessionState,
    pub created_at_ms: u64,
    pub updated_at_ms: u64,
    pub attempts: Vec<AttemptRecord>,
}

/// Everything the sampler needs besides the manifest.
#[derive(Clone, Copy)]
pub struct QuizLexicon<'a> {
    pub vocab: &'a [VocabEntry],
    pub dict: &'a PronDict,
    pub map: &'a VisemeMap,
}

pub struct SessionRequest<'a> {
    pub session_id: String,
    pub user_id: String,
    pub protocol: Protocol,
    pub dataset_tag: DatasetTag,
    pub manifest: &'a DatasetManifest,
    pub lexicon: QuizLexicon<'a>,
    /// Labels this user already saw in sessions that count against reuse.
    pub used_labels: &'a BTreeSet<String>,
    pub seed: u64,
    pub now_ms: u64,
}

/// Samples 20 fresh labels from the manifest, one generated variation each,
/// and builds the items. Deterministic in `seed` and the inputs.
pub fn create_session(req: SessionRequest<'_>) -> Result<QuizSession, QuizError> {
    let manifest = req.manifest;
    if manifest.protocol != req.protocol {
        return Err(QuizError::ProtocolMismatch { manifest: manifest.protocol, requested: req.protocol });
    }
    let fresh: BTreeSet<&str> = manifest.labels().into_iter().filter(|l| !req.used_labels.contains(*l)).collect();
    if fresh.len() < ITEMS_PER_SESSION {
        return Err(QuizError::InsufficientFreshLabels { available: fresh.len(), required: ITEMS_PER_SESSION });
    }
    let mut ready: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        if e.status == EntryStatus::Done && e.checksum.is_some() && fresh.contains(e.label_id.as_str()) {
            ready.entry(e.label_id.as_str()).or_default().push(i);
        }
    }
    if ready.len() < ITEMS_PER_SESSION {
        return Err(QuizError::ManifestIncomplete { ready: ready.len(), required: ITEMS_PER_SESSION });
    }

    let labels: Vec<(&str, Vec<usize>)> = ready.into_iter().collect();
    let mut rng = seeded_rng(req.seed);
    let picks = sample_indices(&mut rng, labels.len(), ITEMS_PER_SESSION);
    let vocab: BTreeMap<&str, &VocabEntry> = req.lexicon.vocab.iter().map(|v| (v.label_id.as_str(), v)).collect();

    let mut items = Vec::with_capacity(ITEMS_PER_SESSION);
    for (pos, &pick) in picks.iter().enumerate() {
        let (label, entries) = &labels[pick];
        let entry = &manifest.entries[entries[sample_indices(&mut rng, entries.len(), 1)[0]]];
        let vocab_entry = *vocab.get(label).ok_or_else(|| QuizError::UnknownLabel(label.to_string()))?;
        let answer = vocab_entry.answer();
        let option_seed = rand::Rng::random::<u64>(&mut rng);
        let options = match req.protocol {
            Protocol::WordLevel => {
                let pool = req.lexicon.vocab.iter().filter(|v| v.protocol == Protocol::WordLevel).map(|v| v.text.as_str());
                let mut opts = generate_distractors(&answer, OPTIONS_PER_ITEM - 1, pool, req.lexicon.dict, req.lexicon.map, option_seed)?;
                opts.push(answer.clone());
                opts
            }
            Protocol::SentenceLevel => {
                let pool = req.lexicon.vocab.iter().filter(|v| v.protocol == Protocol::SentenceLevel);
                let mut opts = sentence_distractors(vocab_entry, OPTIONS_PER_ITEM - 1, pool, option_seed)?;
                opts.push(answer.clone());
                opts
            }
            Protocol::MissingWord => Vec::new(),
        };
        let mut options = options;
        shuffle(&mut rng, &mut options);
        items.push(QuizItem {
            item_id: format!("item-{:02}", pos + 1),
            protocol: req.protocol,
            label_id: label.to_string(),
            variation_id: entry.variation_id,
            video_ref: entry.checksum.clone().unwrap_or_default(),
            options,
            masked_text: vocab_entry.masked_text().filter(|_| req.protocol == Protocol::MissingWord),
            context_tag: vocab_entry.context_tag.clone().filter(|_| req.protocol == Protocol::SentenceLevel),
            answer,
        });
    }

    Ok(QuizSession {
        session_id: req.session_id,
        user_id: req.user_id,
        protocol: req.protocol,
        dataset_tag: req.dataset_tag,
        manifest_id: manifest.manifest_id.clone(),
        seed: req.seed,
        items,
        cursor: 0,
        attempts: Vec::new(),
        state: SessionState::Active,
        created_at_ms: req.now_ms,
        updated_at_ms: req.now_ms,
    })
}

impl QuizSession {
    pub fn is_complete(&self) -> bool {
        self.state == SessionState::Complete
    }

    pub fn current_item(&self) -> Option<&QuizItem> {
        if self.is_complete() {
            None
        } else {
            self.items.get(self.cursor)
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.label_id.as_str())
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            session_id: self.session_id.clone(),
            user_id: self.user_id.clone(),
            protocol: self.protocol,
            cursor: self.cursor,
            total: self.items.len(),
            state: self.state,
            created_at_ms: self.created_at_ms,
            updated_at_ms: self.updated_at_ms,
            attempts: self.attempts.clone(),
        }
    }

    fn check_turn(&self, item_id: &str) -> Result<usize, QuizError> {
        if self.is_complete() {
            return Err(QuizError::SessionComplete);
        }
        let pos = self.items.iter().position(|i| i.item_id == item_id).ok_or_else(|| QuizError::UnknownItem(item_id.to_string()))?;
        if pos < self.cursor {
            return Err(QuizError::DuplicateSubmission(item_id.to_string()));
        }
        if pos > self.cursor {
            return Err(QuizError::OutOfOrderSubmission { expected: self.items[self.cursor].item_id.clone(), got: item_id.to_string() });
        }
        Ok(pos)
    }

    /// Grades an answer for the cursor item without changing the session,
    /// so the record can be made durable before it is applied.
    pub fn grade(&self, item_id: &str, answer: &str, grading: &GradingConfig, now_ms: u64) -> Result<AttemptRecord, QuizError> {
        let pos = self.check_turn(item_id)?;
        let item = &self.items[pos];
        let correct =
            if self.protocol.is_multiple_choice() { answer.trim() == item.answer } else { grade_free_text(answer, &item.answer, grading) };
        Ok(AttemptRecord {
            session_id: self.session_id.clone(),
            item_id: item_id.to_string(),
            position: pos,
            submitted: answer.to_string(),
            correct,
            points: u32::from(correct),
            answered_at_ms: now_ms,
        })
    }

    /// Appends a graded record and advances the cursor.
    pub fn apply(&mut self, record: AttemptRecord) -> Result<(), QuizError> {
        if record.session_id != self.session_id {
            return Err(QuizError::WrongSession(record.session_id));
        }
        self.check_turn(&record.item_id)?;
        self.updated_at_ms = self.updated_at_ms.max(record.answered_at_ms);
        self.attempts.push(record);
        self.cursor += 1;
        if self.cursor == self.items.len() {
            self.state = SessionState::Complete;
        }
        Ok(())
    }

    pub fn submit_answer(&mut self, item_id: &str, answer: &str, grading: &GradingConfig, now_ms: u64) -> Result<AttemptRecord, QuizError> {
        let record = self.grade(item_id, answer, grading, now_ms)?;
        self.apply(record.clone())?;
        Ok(record)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub session_id: String,
    pub user_id: String,
    pub protocol: Protocol,
    pub dataset_tag: DatasetTag,
    pub score: u32,
    pub total: u32,
}

pub fn score_session(session: &QuizSession) -> Result<ScoreSummary, QuizError> {
    if !session.is_complete() {
        return Err(QuizError::SessionIncomplete { answered: session.cursor, total: session.items.len() });
    }
    Ok(ScoreSummary {
        session_id: session.session_id.clone(),
        user_id: session.user_id.clone(),
        protocol: session.protocol,
        dataset_tag: session.dataset_tag,
        score: session.attempts.iter().map(|a| a.points).sum(),
        total: session.items.len() as u32,
    })
}

/// Scores of every session with a full set of attempts, computed from
/// attempt records alone.
pub fn scores_from_log<'a, I>(records: I) -> BTreeMap<String, u32>
where
    I: IntoIterator<Item = &'a AttemptRecord>,
{
    let mut per: BTreeMap<&str, BTreeMap<usize, u32>> = BTreeMap::new();
    for r in records {
        per.entry(r.session_id.as_str()).or_default().entry(r.position).or_insert(r.points);
    }
    per.into_iter().filter(|(_, p)| p.len() == ITEMS_PER_SESSION).map(|(s, p)| (s.to_string(), p.values().sum())).collect()
}

/// Labels a user has already been shown in a protocol, optionally only
/// within one dataset.
pub fn used_labels<'a, I>(sessions: I, user_id: &str, protocol: Protocol, dataset: Option<DatasetTag>) -> BTreeSet<String>
where
    I: IntoIterator<Item = &'a QuizSession>,
{
    sessions
        .into_iter()
        .filter(|s| s.user_id == user_id && s.protocol == protocol && dataset.is_none_or(|d| d == s.dataset_tag))
        .flat_map(|s| s.labels().map(str::to_string))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortAggregate {
    pub protocol: Protocol,
    pub dataset_tag: DatasetTag,
    pub sessions: usize,
    pub mean_score: f64,
    /// None with fewer than two sessions.
    pub sem: Option<f64>,
    pub scores: Vec<u32>,
}

/// Groups completed-session scores by (protocol, dataset).
pub fn aggregate_scores<'a, I>(summaries: I) -> Vec<CohortAggregate>
where
    I: IntoIterator<Item = &'a ScoreSummary>,
{
    let mut groups: BTreeMap<(Protocol, DatasetTag), Vec<u32>> = BTreeMap::new();
    for s in summaries {
        groups.entry((s.protocol, s.dataset_tag)).or_default().push(s.score);
    }
    groups
        .into_iter()
        .map(|((protocol, dataset_tag), scores)| {
            let values: Vec<f64> = scores.iter().map(|&s| f64::from(s)).collect();
            CohortAggregate { protocol, dataset_tag, sessions: scores.len(), mean_score: mean(&values), sem: sem(&values).ok(), scores }
        })
        .collect()
}
