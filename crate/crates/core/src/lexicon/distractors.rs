use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::viseme::fold;
use super::{levenshtein, viseme_sequence, LexiconError, PronDict, VisemeMap, VocabEntry};
use crate::rng::{seeded_rng, shuffle};

/// Picks `k` wrong options for a word-level item, hardest first.
///
/// Exact homophenes of the answer come first, then words by increasing
/// viseme edit distance, then words the dictionary cannot map. Ties are
/// broken by a shuffle seeded with `seed`. The answer itself and repeated
/// pool words are never returned.
pub fn generate_distractors<'a, I>(
    answer: &str,
    k: usize,
    pool: I,
    dict: &PronDict,
    map: &VisemeMap,
    seed: u64,
) -> Result<Vec<String>, LexiconError>
where
    I: IntoIterator<Item = &'a str>,
{
    if k == 0 {
        return Ok(Vec::new());
    }
    let answer_key = fold(answer);
    let mut seen = BTreeSet::new();
    let mut candidates: Vec<&str> = pool
        .into_iter()
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .filter(|w| {
            let f = fold(w);
            f != answer_key && seen.insert(f)
        })
        .collect();
    if candidates.len() < k {
        return Err(LexiconError::InsufficientPool { requested: k, available: candidates.len() });
    }

    let mut rng = seeded_rng(seed);
    shuffle(&mut rng, &mut candidates);

    let target = viseme_sequence(answer, dict, map).ok();
    let mut ranked: Vec<(usize, &str)> = candidates
        .into_iter()
        .map(|w| {
            let rank = match (&target, viseme_sequence(w, dict, map)) {
                (Some(t), Ok(seq)) => levenshtein(&t.visemes, &seq.visemes),
                _ => usize::MAX,
            };
            (rank, w)
        })
        .collect();
    ranked.sort_by_key(|&(rank, _)| rank);
    Ok(ranked.into_iter().take(k).map(|(_, w)| w.to_string()).collect())
}

/// Picks `k` other sentences sharing the answer's context tag.
pub fn sentence_distractors<'a, I>(answer: &VocabEntry, k: usize, pool: I, seed: u64) -> Result<Vec<String>, LexiconError>
where
    I: IntoIterator<Item = &'a VocabEntry>,
{
    if k == 0 {
        return Ok(Vec::new());
    }
    let answer_key = fold(&answer.text);
    let mut seen = BTreeSet::new();
    let mut candidates: Vec<&str> = pool
        .into_iter()
        .filter(|e| e.context_tag == answer.context_tag)
        .map(|e| e.text.trim())
        .filter(|t| {
            let f = fold(t);
            f != answer_key && seen.insert(f)
        })
        .collect();
    if candidates.len() < k {
        return Err(LexiconError::InsufficientPool { requested: k, available: candidates.len() });
    }
    let mut rng = seeded_rng(seed);
    shuffle(&mut rng, &mut candidates);
    Ok(candidates.into_iter().take(k).map(str::to_string).collect())
}
