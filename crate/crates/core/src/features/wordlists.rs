//! Bundled word lists, one lowercase token per line.

use std::collections::HashSet;
use std::sync::LazyLock;

fn load(raw: &'static str) -> HashSet<&'static str> {
    raw.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

/// Dale-Chall list of words familiar to most fourth-grade readers.
pub static DALE_CHALL_EASY: LazyLock<HashSet<&'static str>> =
    LazyLock::new(|| load(include_str!("../../resources/dale_chall_easy.txt")));

/// The 50,000 most frequent English word forms; anything else is jargon.
pub static FREQUENT_WORDS: LazyLock<HashSet<&'static str>> =
    LazyLock::new(|| load(include_str!("../../resources/frequent_50k.txt")));

/// Spelling dictionary; words outside it count as misspelled.
pub static DICTIONARY: LazyLock<HashSet<&'static str>> =
    LazyLock::new(|| load(include_str!("../../resources/dictionary.txt")));

/// True when every hyphen-separated part of `word` is in `list`.
pub fn known(list: &HashSet<&'static str>, word: &str) -> bool {
    let lower = word.to_lowercase();
    list.contains(lower.as_str()) || (lower.contains('-') && lower.split('-').filter(|p| !p.is_empty()).all(|p| list.contains(p)))
}
