//! Beam-search decoding and the degeneration guard.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::lm::{ToyLM, EOS_ID};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub finished: bool,
}

impl Hypothesis {
    pub fn log_prob(&self) -> f64 {
        self.log_probs.iter().sum()
    }

    /// Length-normalized log probability.
    pub fn score(&self) -> f64 {
        if self.tokens.is_empty() {
            0.0
        } else {
            self.log_prob() / self.tokens.len() as f64
        }
    }
}

fn by_score(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score().total_cmp(&a.score()).then_with(|| a.tokens.cmp(&b.tokens))
}

/// Final beam, best first. Each step keeps the `width` most probable
/// extensions; hypotheses ending in `<eos>` leave the beam as finished.
pub fn beam_search(lm: &ToyLM, prompt: &[usize], width: usize, max_tokens: usize) -> Result<Vec<Hypothesis>> {
    if width == 0 {
        return Err(Error::Config("beam width must be at least 1".into()));
    }
    let mut alive = vec![Hypothesis { tokens: vec![], log_probs: vec![], finished: false }];
    let mut finished = Vec::new();
    for _ in 0..max_tokens {
        let mut candidates = Vec::with_capacity(alive.len() * lm.vocab_size());
        for h in &alive {
            let mut hist = lm.history(prompt);
            hist.extend_from_slice(&h.tokens);
            let lp = lm.log_probs(lm.context(&hist));
            for (tok, &l) in lp.iter().enumerate().skip(1) {
                let mut next = h.clone();
                next.tokens.push(tok);
                next.log_probs.push(l);
                next.finished = tok == EOS_ID;
                candidates.push(next);
            }
        }
        // Equal lengths within a step, so this is also cumulative order.
        candidates.sort_by(by_score);
        candidates.truncate(width);
        alive.clear();
        for c in candidates {
            if c.finished {
                finished.push(c);
            } else {
                alive.push(c);
            }
        }
        if alive.is_empty() {
            break;
        }
    }
    finished.extend(alive);
    finished.sort_by(by_score);
    Ok(finished)
}

/// Best beam hypothesis for `prompt` (tokens); an empty prompt starts from `<bos>`.
pub fn generate(lm: &ToyLM, prompt: &[usize], width: usize, max_tokens: usize) -> Result<Hypothesis> {
    Ok(beam_search(lm, prompt, width, max_tokens)?.into_iter().next().expect("beam is never empty"))
}

/// Arg-max decoding.
pub fn greedy(lm: &ToyLM, prompt: &[usize], max_tokens: usize) -> Vec<usize> {
    let mut hist = lm.history(prompt);
    let mut out = Vec::new();
    while out.len() < max_tokens {
        let lp = lm.log_probs(lm.context(&hist));
        let tok = (1..lp.len()).fold(1, |best, i| if lp[i] > lp[best] { i } else { best });
        out.push(tok);
        hist.push(tok);
        if tok == EOS_ID {
            break;
        }
    }
    out
}

/// Cuts a text at the first 4-token window that is immediately repeated,
/// keeping one copy of the window.
pub fn postprocess(text: &str) -> String {
    const W: usize = 4;
    let toks: Vec<&str> = text.split_whitespace().collect();
    let mut end = toks.len();
    for i in 0..toks.len().saturating_sub(2 * W - 1) {
        if toks[i..i + W] == toks[i + W..i + 2 * W] {
            end = i + W;
            break;
        }
    }
    toks[..end].join(" ")
}
