use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::LexiconError;

/// The shipped phoneme-to-viseme table (TSV, ARPABET phonemes).
pub const DEFAULT_VISEME_TABLE: &str = include_str!("../../data/visemes.tsv");

/// Phoneme to viseme-class lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisemeMap {
    classes: BTreeMap<String, String>,
}

impl VisemeMap {
    /// Parses `phoneme<TAB>class` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut classes = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let (Some(ph), Some(class), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(LexiconError::Parse { line: n + 1, message: "expected `phoneme<TAB>class`".into() });
            };
            let ph = normalize_phoneme(ph);
            if classes.insert(ph.clone(), class.to_string()).is_some() {
                return Err(LexiconError::Parse { line: n + 1, message: alloc::format!("duplicate phoneme {ph}") });
            }
        }
        Ok(Self { classes })
    }

    pub fn default_table() -> Self {
        Self::parse(DEFAULT_VISEME_TABLE).expect("shipped viseme table parses")
    }

    pub fn class_of(&self, phoneme: &str) -> Option<&str> {
        self.classes.get(normalize_phoneme(phoneme).as_str()).map(String::as_str)
    }

    /// Distinct class names.
    pub fn classes(&self) -> BTreeSet<&str> {
        self.classes.values().map(String::as_str).collect()
    }
}

fn normalize_phoneme(ph: &str) -> String {
    ph.trim_end_matches(|c: char| c.is_ascii_digit()).to_ascii_uppercase()
}

/// Pronunciation dictionary keyed by lower-cased word.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PronDict {
    entries: BTreeMap<String, Vec<Vec<String>>>,
}

impl PronDict {
    /// Parses `WORD PH1 PH2 ...` lines (CMUdict style). Alternate pronunciations
    /// are written `WORD(2) ...`; `;;;` and `#` start comments.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut dict = PronDict::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || line.starts_with(";;;") {
                continue;
            }
            let mut cols = line.split_whitespace();
            let head = cols.next().expect("non-empty line");
            let phones: Vec<String> = cols.map(|p| p.to_string()).collect();
            if phones.is_empty() {
                return Err(LexiconError::Parse { line: n + 1, message: alloc::format!("'{head}' has no phonemes") });
            }
            let word = match head.find('(') {
                Some(i) if head.ends_with(')') => &head[..i],
                _ => head,
            };
            dict.insert(word, phones);
        }
        Ok(dict)
    }

    /// Adds a pronunciation; the first one added for a word is the one used.
    pub fn insert(&mut self, word: &str, phonemes: Vec<String>) {
        self.entries.entry(fold(word)).or_default().push(phonemes);
    }

    pub fn pronunciations(&self, word: &str) -> Option<&[Vec<String>]> {
        self.entries.get(&fold(word)).map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(&fold(word))
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub(crate) fn fold(word: &str) -> String {
    word.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisemeSequence {
    pub word: String,
    pub phonemes: Vec<String>,
    pub visemes: Vec<String>,
}

impl VisemeSequence {
    /// Canonical string form of the viseme classes, e.g. `bilabial vowel_spread alveolar_stop`.
    pub fn key(&self) -> String {
        self.visemes.join(" ")
    }

    /// Whether the two words look identical on the lips.
    pub fn looks_like(&self, other: &VisemeSequence) -> bool {
        self.visemes == other.visemes
    }
}

/// Looks the word up (case-folded) and maps its first pronunciation to viseme classes.
pub fn viseme_sequence(word: &str, dict: &PronDict, map: &VisemeMap) -> Result<VisemeSequence, LexiconError> {
    let prons = dict.pronunciations(word).ok_or_else(|| LexiconError::OutOfVocabulary(word.to_string()))?;
    let phonemes = prons[0].clone();
    let visemes = phonemes
        .iter()
        .map(|ph| {
            map.class_of(ph)
                .map(str::to_string)
                .ok_or_else(|| LexiconError::UnmappedPhoneme { word: word.to_string(), phoneme: ph.clone() })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VisemeSequence { word: fold(word), phonemes, visemes })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomopheneCluster {
    pub viseme_key: String,
    pub members: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub clusters: Vec<HomopheneCluster>,
    /// Input words that could not be mapped (out of vocabulary or unmapped phonemes).
    pub skipped: Vec<String>,
}

/// Partitions `words` by exact viseme-sequence equality.
pub fn cluster_homophenes<'a, I>(words: I, dict: &PronDict, map: &VisemeMap) -> Clustering
where
    I: IntoIterator<Item = &'a str>,
{
    let mut by_key: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut skipped = BTreeSet::new();
    for word in words {
        match viseme_sequence(word, dict, map) {
            Ok(seq) => {
                by_key.entry(seq.key()).or_default().insert(seq.word);
            }
            Err(_) => {
                skipped.insert(fold(word));
            }
        }
    }
    Clustering {
        clusters: by_key.into_iter().map(|(viseme_key, members)| HomopheneCluster { viseme_key, members }).collect(),
        skipped: skipped.into_iter().collect(),
    }
}
