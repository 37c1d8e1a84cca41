//! Vocabulary richness statistics over lowercased word tokens.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LexicalDiversity {
    pub ttr: f64,
    /// `None` when every type is a hapax legomenon.
    pub honore: Option<f64>,
    pub brunet: f64,
}

pub fn lexical_diversity<S: AsRef<str>>(tokens: &[S]) -> Result<LexicalDiversity> {
    if tokens.is_empty() {
        return Err(Error::Degenerate("lexical diversity needs at least one token".into()));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for t in tokens {
        *counts.entry(t.as_ref().to_lowercase()).or_default() += 1;
    }
    let n = tokens.len() as f64;
    let v = counts.len() as f64;
    let v1 = counts.values().filter(|&&c| c == 1).count() as f64;
    let honore = (v1 < v).then(|| 100.0 * n.ln() / (1.0 - v1 / v));
    Ok(LexicalDiversity { ttr: v / n, honore, brunet: n.powf(v.powf(-0.165)) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aba() {
        let d = lexical_diversity(&["a", "b", "a"]).unwrap();
        assert!((d.ttr - 2.0 / 3.0).abs() < 1e-15);
        let honore = 100.0 * 3f64.ln() / 0.5;
        assert!((d.honore.unwrap() - honore).abs() < 1e-12);
        assert!((d.honore.unwrap() - 219.72).abs() < 5e-3);
        assert!((d.brunet - 2.664).abs() < 5e-4);
    }

    #[test]
    fn all_hapax_has_no_honore() {
        let d = lexical_diversity(&["x", "y", "z"]).unwrap();
        assert_eq!(d.honore, None);
        assert_eq!(d.ttr, 1.0);
        assert!(lexical_diversity::<&str>(&[]).is_err());
    }
}
