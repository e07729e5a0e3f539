//! Loading pronunciation dictionaries, viseme tables and vocabulary lists,
//! plus the small bundled demo set.

use std::path::Path;

use lipread_core::lexicon::{LexiconError, PronDict, VisemeMap, VocabEntry};
use lipread_core::Protocol;
use thiserror::Error;

pub const DEMO_DICT: &str = include_str!("../data/cmudict-1000.dict");
pub const DEMO_WL: &str = include_str!("../data/vocab_wl.json");
pub const DEMO_SL: &str = include_str!("../data/vocab_sl.json");
pub const DEMO_MWIS: &str = include_str!("../data/vocab_mwis.json");

#[derive(Debug, Error)]
pub enum LexFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Lexicon { path: String, source: LexiconError },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

fn read(path: &Path) -> Result<String, LexFileError> {
    std::fs::read_to_string(path).map_err(|source| LexFileError::Io { path: path.display().to_string(), source })
}

pub fn load_dict(path: &Path) -> Result<PronDict, LexFileError> {
    PronDict::parse(&read(path)?).map_err(|source| LexFileError::Lexicon { path: path.display().to_string(), source })
}

pub fn load_viseme_map(path: &Path) -> Result<VisemeMap, LexFileError> {
    VisemeMap::parse(&read(path)?).map_err(|source| LexFileError::Lexicon { path: path.display().to_string(), source })
}

/// Reads a JSON array of vocabulary entries and validates each.
pub fn load_vocab(path: &Path) -> Result<Vec<VocabEntry>, LexFileError> {
    let p = path.display().to_string();
    let vocab = parse_vocab(&read(path)?).map_err(|e| match e {
        VocabParseError::Json(source) => LexFileError::Json { path: p.clone(), source },
        VocabParseError::Invalid(source) => LexFileError::Lexicon { path: p.clone(), source },
    })?;
    Ok(vocab)
}

#[derive(Debug)]
pub enum VocabParseError {
    Json(serde_json::Error),
    Invalid(LexiconError),
}

pub fn parse_vocab(text: &str) -> Result<Vec<VocabEntry>, VocabParseError> {
    let vocab: Vec<VocabEntry> = serde_json::from_str(text).map_err(VocabParseError::Json)?;
    for e in &vocab {
        e.validate().map_err(VocabParseError::Invalid)?;
    }
    Ok(vocab)
}

pub fn demo_dict() -> PronDict {
    PronDict::parse(DEMO_DICT).expect("bundled dictionary parses")
}

pub fn demo_vocab(protocol: Protocol) -> Vec<VocabEntry> {
    let text = match protocol {
        Protocol::WordLevel => DEMO_WL,
        Protocol::SentenceLevel => DEMO_SL,
        Protocol::MissingWord => DEMO_MWIS,
    };
    parse_vocab(text).unwrap_or_else(|_| panic!("bundled {protocol} vocabulary is valid"))
}

/// All demo vocabularies concatenated.
pub fn demo_vocab_all() -> Vec<VocabEntry> {
    Protocol::ALL.into_iter().flat_map(demo_vocab).collect()
}
