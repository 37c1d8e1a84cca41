//! Order-m table language model with a per-context state embedding and a
//! linear baseline head on top of it.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_softmax, log_sum_exp};

pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const BOS_ID: usize = 0;
pub const EOS_ID: usize = 1;

/// Linear map from a context state to a predicted reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl BaselineHead {
    pub fn predict(&self, state: &[f64]) -> f64 {
        crate::math::dot(&self.weights, state) + self.bias
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyLM {
    /// `<bos>`, `<eos>`, then the words.
    pub vocab: Vec<String>,
    pub order: usize,
    /// `contexts × vocab` next-token logits. The `<bos>` column is ignored:
    /// `<bos>` only ever appears as left padding.
    pub logits: Vec<f64>,
    pub state_dim: usize,
    /// `contexts × state_dim`.
    pub states: Vec<f64>,
    pub head: BaselineHead,
}

impl ToyLM {
    /// Zero logits (uniform next-token distribution), small random states.
    pub fn new<S: AsRef<str>>(words: &[S], order: usize, state_dim: usize, rng: &mut ChaCha8Rng) -> Result<ToyLM> {
        if !(1..=2).contains(&order) {
            return Err(Error::Config(format!("order must be 1 or 2, got {order}")));
        }
        let mut vocab = vec![BOS.to_string(), EOS.to_string()];
        for w in words {
            let w = w.as_ref();
            if vocab.iter().any(|v| v == w) {
                return Err(Error::DuplicateId(w.to_string()));
            }
            vocab.push(w.to_string());
        }
        let v = vocab.len();
        let contexts = v.pow(order as u32);
        let normal = Normal::new(0.0, 0.1).expect("valid scale");
        let states = (0..contexts * state_dim).map(|_| normal.sample(rng)).collect();
        Ok(ToyLM {
            vocab,
            order,
            logits: vec![0.0; contexts * v],
            state_dim,
            states,
            head: BaselineHead { weights: vec![0.0; state_dim], bias: 0.0 },
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn contexts(&self) -> usize {
        self.vocab.len().pow(self.order as u32)
    }

    pub fn id(&self, token: &str) -> Result<usize> {
        self.vocab.iter().position(|v| v == token).ok_or_else(|| Error::OutOfVocabulary(token.to_string()))
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<usize>> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.vocab[i].clone()).collect()
    }

    /// Words only: `<bos>`/`<eos>` removed.
    pub fn detokenize(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().filter(|&&i| i != BOS_ID && i != EOS_ID).map(|&i| self.vocab[i].clone()).collect()
    }

    /// History for generation after `prompt`, left-padded with `<bos>`.
    pub fn history(&self, prompt: &[usize]) -> Vec<usize> {
        let mut h = vec![BOS_ID; self.order];
        h.extend_from_slice(prompt);
        h
    }

    /// Context index of the last `order` tokens of `history`.
    pub fn context(&self, history: &[usize]) -> usize {
        let v = self.vocab.len();
        history[history.len() - self.order..].iter().fold(0, |acc, &t| acc * v + t)
    }

    pub fn row(&self, ctx: usize) -> &[f64] {
        let v = self.vocab.len();
        &self.logits[ctx * v..(ctx + 1) * v]
    }

    pub fn state(&self, ctx: usize) -> &[f64] {
        &self.states[ctx * self.state_dim..(ctx + 1) * self.state_dim]
    }

    /// Log next-token distribution; entry 0 (`<bos>`) is −∞.
    pub fn log_probs(&self, ctx: usize) -> Vec<f64> {
        let row = self.row(ctx);
        let mut out = vec![f64::NEG_INFINITY; row.len()];
        let lsm = log_softmax(&row[1..]);
        out[1..].copy_from_slice(&lsm);
        out
    }

    pub fn probs(&self, ctx: usize) -> Vec<f64> {
        self.log_probs(ctx).into_iter().map(f64::exp).collect()
    }

    pub fn log_prob(&self, ctx: usize, token: usize) -> f64 {
        let row = self.row(ctx);
        if token == BOS_ID {
            return f64::NEG_INFINITY;
        }
        row[token] - log_sum_exp(&row[1..])
    }

    /// Contexts visited while emitting `tokens` after `prompt`.
    pub fn contexts_along(&self, prompt: &[usize], tokens: &[usize]) -> Vec<usize> {
        let mut h = self.history(prompt);
        tokens
            .iter()
            .map(|&t| {
                let c = self.context(&h);
                h.push(t);
                c
            })
            .collect()
    }

    /// Teacher-forced log probability of every token of `tokens`.
    pub fn sequence_log_probs(&self, prompt: &[usize], tokens: &[usize]) -> Vec<f64> {
        self.contexts_along(prompt, tokens).iter().zip(tokens).map(|(&c, &t)| self.log_prob(c, t)).collect()
    }

    /// Ancestral sample of up to `max_tokens` tokens (stopping after `<eos>`).
    pub fn sample(&self, prompt: &[usize], max_tokens: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut h = self.history(prompt);
        let mut out = Vec::new();
        while out.len() < max_tokens {
            let p = self.probs(self.context(&h));
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut tok = p.len() - 1;
            for (i, pi) in p.iter().enumerate().skip(1) {
                acc += pi;
                if u < acc {
                    tok = i;
                    break;
                }
            }
            out.push(tok);
            h.push(tok);
            if tok == EOS_ID {
                break;
            }
        }
        out
    }

    /// Adds `weight · ∇ log p(token | ctx)` into `grad`
    /// (dense, `contexts × vocab`).
    pub fn accumulate_log_prob_grad(&self, grad: &mut [f64], ctx: usize, token: usize, weight: f64) {
        let v = self.vocab.len();
        let p = self.probs(ctx);
        let g = &mut grad[ctx * v..(ctx + 1) * v];
        for i in 1..v {
            g[i] += weight * ((i == token) as u8 as f64 - p[i]);
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.logits.iter().chain(&self.states).chain(&self.head.weights).any(|x| !x.is_finite()) || !self.head.bias.is_finite() {
            return Err(Error::NonFinite("language model parameters".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = crate::corpus::create(path)?;
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ToyLM> {
        let path = path.as_ref();
        let lm: ToyLM = serde_json::from_reader(crate::corpus::open(path)?)?;
        let v = lm.vocab.len();
        if v < 2 || lm.vocab[BOS_ID] != BOS || lm.vocab[EOS_ID] != EOS {
            return Err(Error::parse(path, 1, "vocabulary must start with <bos>, <eos>"));
        }
        let contexts = v.pow(lm.order as u32);
        if lm.logits.len() != contexts * v || lm.states.len() != contexts * lm.state_dim || lm.head.weights.len() != lm.state_dim {
            return Err(Error::parse(path, 1, "table sizes do not match vocabulary and order"));
        }
        Ok(lm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn lm(order: usize) -> ToyLM {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        ToyLM::new(&["a", "b", "c"], order, 4, &mut rng).unwrap()
    }

    #[test]
    fn uniform_logits_give_uniform_log_probs() {
        // Four emittable tokens: <eos>, a, b, c.
        let m = lm(1);
        let ids = m.encode(&["a", "c", EOS]).unwrap();
        for lp in m.sequence_log_probs(&[], &ids) {
            assert!((lp - (0.25f64).ln()).abs() < 1e-12);
            assert!((lp + 1.3863).abs() < 1e-4);
        }
    }

    #[test]
    fn dominant_logit_approaches_certainty() {
        let mut m = lm(1);
        let ctx = m.context(&m.history(&[]));
        let v = m.vocab_size();
        m.logits[ctx * v + 2] = 60.0;
        assert!(m.log_prob(ctx, 2).abs() < 1e-20);
    }

    #[test]
    fn order_two_contexts_and_oov() {
        let m = lm(2);
        assert_eq!(m.contexts(), 25);
        let h = m.history(&[2, 3]);
        assert_eq!(m.context(&h), 2 * 5 + 3);
        assert!(m.encode(&["zzz"]).is_err());
        assert!(ToyLM::new(&["a"], 3, 2, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn samples_never_contain_bos() {
        let m = lm(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let s = m.sample(&[], 10, &mut rng);
            assert!(!s.contains(&BOS_ID));
            assert!(s.len() <= 10);
        }
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lm.json");
        let m = lm(2);
        m.save(&p).unwrap();
        assert_eq!(ToyLM::load(&p).unwrap(), m);
    }
}
