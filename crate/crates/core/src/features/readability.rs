//! Classic readability formulas.

use serde::{Deserialize, Serialize};

use super::syllables::count_syllables;
use super::wordlists::{known, DALE_CHALL_EASY};
use crate::error::{Error, Result};
use crate::text::is_word;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Readability {
    pub flesch: f64,
    pub flesch_kincaid: f64,
    pub gunning_fog: f64,
    pub smog: f64,
    pub dale_chall: f64,
}

/// Raw counts the formulas are built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TextCounts {
    pub sentences: usize,
    pub words: usize,
    pub syllables: usize,
    /// Words with three or more syllables.
    pub polysyllables: usize,
    /// Words outside the Dale-Chall familiar list.
    pub difficult: usize,
}

impl TextCounts {
    /// Count over tokenized sentences. Only tokens with an alphanumeric
    /// character are words; sentences without words are not counted.
    pub fn from_sentences(sentences: &[Vec<String>]) -> TextCounts {
        let mut c = TextCounts { sentences: 0, words: 0, syllables: 0, polysyllables: 0, difficult: 0 };
        for sentence in sentences {
            let mut any = false;
            for w in sentence.iter().filter(|t| is_word(t)) {
                any = true;
                c.words += 1;
                let s = count_syllables(w);
                c.syllables += s;
                if s >= 3 {
                    c.polysyllables += 1;
                }
                if !known(&DALE_CHALL_EASY, w) {
                    c.difficult += 1;
                }
            }
            if any {
                c.sentences += 1;
            }
        }
        c
    }
}

pub fn readability(sentences: &[Vec<String>]) -> Result<Readability> {
    let c = TextCounts::from_sentences(sentences);
    if c.words == 0 || c.sentences == 0 {
        return Err(Error::Degenerate("readability needs at least one sentence with a word".into()));
    }
    let words = c.words as f64;
    let sents = c.sentences as f64;
    let wps = words / sents;
    let spw = c.syllables as f64 / words;

    let flesch = 206.835 - 1.015 * wps - 84.6 * spw;
    let flesch_kincaid = 0.39 * wps + 11.8 * spw - 15.59;
    let gunning_fog = 0.4 * (wps + 100.0 * c.polysyllables as f64 / words);
    let smog = 1.0430 * (c.polysyllables as f64 * 30.0 / sents).sqrt() + 3.1291;
    let difficult_pct = 100.0 * c.difficult as f64 / words;
    let mut dale_chall = 0.1579 * difficult_pct + 0.0496 * wps;
    if difficult_pct > 5.0 {
        dale_chall += 3.6365;
    }
    Ok(Readability { flesch, flesch_kincaid, gunning_fog, smog, dale_chall })
}
