//! Core algorithms for building lipreading training platforms.
//!
//! Everything in this crate is pure computation over in-memory data and runs
//! without `std` (an allocator is required). File formats, adapters, storage
//! and the HTTP service live in the `lipread` crate.
//!
//! - [`landmark`]: facial landmark tracks and the video validity gate.
//! - [`alignment`]: mouth-activity detection and silence-padded speech placement.
//! - [`lexicon`]: viseme sequences, homophene clusters, distractors, free-text grading.
//! - [`synth`]: dataset manifests, adapter specs and generation job bookkeeping.
//! - [`quiz`]: quiz sessions, answer grading and scoring.
//! - [`stats`]: SEM, boxplots, z-/t-tests, HDI and the BEST sampler.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod alignment;
pub mod landmark;
pub mod lexicon;
pub mod quiz;
pub mod stats;
pub mod synth;

mod rng;

pub use rng::seeded_rng;

use core::fmt;

use serde::{Deserialize, Serialize};

/// The three lipreading exercise protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Protocol {
    /// Isolated words with five answer options.
    #[serde(rename = "WL")]
    WordLevel,
    /// Sentences with a context banner and five answer options.
    #[serde(rename = "SL")]
    SentenceLevel,
    /// Missing word in a sentence, answered as free text.
    #[serde(rename = "MWIS")]
    MissingWord,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::WordLevel, Protocol::SentenceLevel, Protocol::MissingWord];

    pub fn code(self) -> &'static str {
        match self {
            Protocol::WordLevel => "WL",
            Protocol::SentenceLevel => "SL",
            Protocol::MissingWord => "MWIS",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.code().eq_ignore_ascii_case(code))
    }

    /// Whether items of this protocol are answered by picking one of several options.
    pub fn is_multiple_choice(self) -> bool {
        !matches!(self, Protocol::MissingWord)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Which dataset a quiz draws its videos from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DatasetTag {
    RealAE,
    SynthAE,
    SynthIE,
}

impl DatasetTag {
    pub const ALL: [DatasetTag; 3] = [DatasetTag::RealAE, DatasetTag::SynthAE, DatasetTag::SynthIE];

    pub fn code(self) -> &'static str {
        match self {
            DatasetTag::RealAE => "RealAE",
            DatasetTag::SynthAE => "SynthAE",
            DatasetTag::SynthIE => "SynthIE",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.code().eq_ignore_ascii_case(code))
    }
}

impl fmt::Display for DatasetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_codes_round_trip() {
        for p in Protocol::ALL {
            assert_eq!(Protocol::from_code(p.code()), Some(p));
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, alloc::format!("\"{}\"", p.code()));
        }
        assert_eq!(Protocol::from_code("mwis"), Some(Protocol::MissingWord));
        assert_eq!(Protocol::from_code("XL"), None);
    }

    #[test]
    fn dataset_tags_parse_case_insensitively() {
        assert_eq!(DatasetTag::from_code("synthie"), Some(DatasetTag::SynthIE));
        assert_eq!(DatasetTag::from_code("RealAE"), Some(DatasetTag::RealAE));
        assert_eq!(DatasetTag::from_code("fake"), None);
    }
}
