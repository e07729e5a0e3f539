//! Vocabulary, visemes and answer checking.
//!
//! Words that look the same on the lips (homophenes such as "mat", "bat" and
//! "pat") are found by mapping pronunciations to viseme classes and comparing
//! the resulting sequences.

mod distance;
mod distractors;
mod grading;
mod viseme;

pub use distance::levenshtein;
pub use distractors::{generate_distractors, sentence_distractors};
pub use grading::{grade_free_text, GradingConfig};
pub use viseme::{
    cluster_homophenes, viseme_sequence, Clustering, HomopheneCluster, PronDict, VisemeMap, VisemeSequence, DEFAULT_VISEME_TABLE,
};

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Protocol;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexiconError {
    #[error("'{0}' is not in the pronunciation dictionary")]
    OutOfVocabulary(String),
    #[error("phoneme '{phoneme}' in '{word}' has no viseme class")]
    UnmappedPhoneme { word: String, phoneme: String },
    #[error("pool has {available} usable words, {requested} requested")]
    InsufficientPool { requested: usize, available: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("vocabulary entry '{label_id}': {message}")]
    InvalidEntry { label_id: String, message: String },
}

/// One label of a protocol's vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub label_id: String,
    /// The word (WL) or sentence (SL, MWIS).
    pub text: String,
    pub protocol: Protocol,
    /// Conversation context, required for SL ("introduction", "restaurant", ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_tag: Option<String>,
    /// Word position hidden from the learner, required for MWIS.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masked_index: Option<usize>,
}

impl VocabEntry {
    pub fn validate(&self) -> Result<(), LexiconError> {
        let err = |message: &str| LexiconError::InvalidEntry { label_id: self.label_id.clone(), message: message.into() };
        if self.text.trim().is_empty() {
            return Err(err("empty text"));
        }
        match self.protocol {
            Protocol::SentenceLevel if self.context_tag.as_deref().is_none_or(|c| c.trim().is_empty()) => {
                Err(err("sentence entries need a context_tag"))
            }
            Protocol::MissingWord => match self.masked_index {
                None => Err(err("missing-word entries need a masked_index")),
                Some(i) if i >= self.words().count() => Err(err("masked_index is past the end of the sentence")),
                Some(i) => {
                    let answer = self.answer().to_lowercase();
                    let repeated = self.words().enumerate().any(|(j, w)| j != i && strip_punctuation(w).to_lowercase() == answer);
                    if repeated {
                        Err(err("masked word appears elsewhere in the sentence"))
                    } else {
                        Ok(())
                    }
                }
            },
            _ => Ok(()),
        }
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.text.split_whitespace()
    }

    /// The string a learner has to produce or pick.
    pub fn answer(&self) -> String {
        match (self.protocol, self.masked_index) {
            (Protocol::MissingWord, Some(i)) => self.words().nth(i).map(strip_punctuation).unwrap_or_default().to_string(),
            _ => self.text.trim().to_string(),
        }
    }

    /// The sentence with the masked word replaced by a blank, keeping surrounding punctuation.
    pub fn masked_text(&self) -> Option<String> {
        let idx = self.masked_index?;
        let words: Vec<String> = self
            .words()
            .enumerate()
            .map(|(i, w)| {
                if i == idx {
                    let core = strip_punctuation(w);
                    w.replacen(core, "___", 1)
                } else {
                    w.to_string()
                }
            })
            .collect();
        Some(words.join(" "))
    }
}

fn strip_punctuation(word: &str) -> &str {
    word.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'' && c != '-')
}
