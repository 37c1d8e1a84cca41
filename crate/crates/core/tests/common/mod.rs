//! Independent reference implementations shared by the test targets.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use styleinfuse::augment::cosine;
use styleinfuse::features::path::path_length;
use styleinfuse::infuse::{baseline_predictions, policy_gradient, ToyLM, BOS_ID, EOS_ID};

pub fn random_lm(words: &[&str], order: usize, seed: u64) -> ToyLM {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lm = ToyLM::new(words, order, 3, &mut rng).unwrap();
    for l in lm.logits.iter_mut() {
        *l = rng.random_range(-2.0..2.0);
    }
    for w in lm.head.weights.iter_mut() {
        *w = rng.random_range(-1.0..1.0);
    }
    lm.head.bias = 0.3;
    lm
}

pub fn log_softmax_masked(row: &[f64]) -> Vec<f64> {
    // Index 0 is <bos> and never emitted.
    let m = row[1..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = row[1..].iter().map(|l| (l - m).exp()).sum();
    let mut out = vec![f64::NEG_INFINITY; row.len()];
    for i in 1..row.len() {
        out[i] = row[i] - m - z.ln();
    }
    out
}

/// Every sequence the sampler can emit with `max_len` tokens.
pub fn all_sequences(vocab: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut done = Vec::new();
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in frontier {
            for t in 1..vocab {
                let mut s2: Vec<usize> = s.clone();
                s2.push(t);
                if t == EOS_ID {
                    done.push(s2)
                } else {
                    next.push(s2)
                }
            }
        }
        frontier = next;
    }
    done.extend(frontier);
    done
}

/// Order-1 sequence probability and its exact gradient, computed from the
/// table directly.
pub fn seq_prob_and_grad(lm: &ToyLM, y: &[usize]) -> (f64, Vec<f64>) {
    let v = lm.vocab_size();
    let mut prev = BOS_ID;
    let mut logp = 0.0;
    let mut dlogp = vec![0.0; lm.logits.len()];
    for &t in y {
        let lsm = log_softmax_masked(&lm.logits[prev * v..(prev + 1) * v]);
        logp += lsm[t];
        for k in 1..v {
            dlogp[prev * v + k] += (k == t) as u8 as f64 - lsm[k].exp();
        }
        prev = t;
    }
    let p = logp.exp();
    (p, dlogp.into_iter().map(|g| p * g).collect())
}

/// An arbitrary deterministic reward.
pub fn reward_of(y: &[usize]) -> f64 {
    y.iter().enumerate().map(|(i, &t)| ((i + 1) * t) as f64 * 0.37).sum::<f64>().sin()
}

/// Exact ∇E[R] by enumeration, and total probability mass.
pub fn true_reward_gradient(lm: &ToyLM, seqs: &[Vec<usize>]) -> (Vec<f64>, f64) {
    let mut truth = vec![0.0; lm.logits.len()];
    let mut total = 0.0;
    for y in seqs {
        let (p, dp) = seq_prob_and_grad(lm, y);
        total += p;
        for (t, d) in truth.iter_mut().zip(dp) {
            *t += reward_of(y) * d;
        }
    }
    (truth, total)
}

/// Plain per-pair gradient descent on the mean token negative log
/// likelihood of an order-1 table. Returns final logits and epoch means.
pub fn mle_reference(mut logits: Vec<f64>, v: usize, targets: &[Vec<usize>], lr: f64, epochs: usize) -> (Vec<f64>, Vec<f64>) {
    let mut curve = Vec::new();
    for _ in 0..epochs {
        let mut total = 0.0;
        for y in targets {
            let mut grad = vec![0.0; logits.len()];
            let mut prev = BOS_ID;
            let mut nll = 0.0;
            for &t in y {
                let lsm = log_softmax_masked(&logits[prev * v..(prev + 1) * v]);
                nll -= lsm[t];
                for k in 1..v {
                    grad[prev * v + k] -= ((k == t) as u8 as f64 - lsm[k].exp()) / y.len() as f64;
                }
                prev = t;
            }
            total += nll / y.len() as f64;
            for (l, g) in logits.iter_mut().zip(&grad) {
                *l -= lr * g;
            }
        }
        curve.push(total / targets.len() as f64);
    }
    (logits, curve)
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Shortest open path over every visiting order.
pub fn brute_force_path(points: &[Vec<f64>]) -> f64 {
    permutations(points.len()).iter().map(|o| path_length(points, o)).fold(f64::INFINITY, f64::min)
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

/// Top-k ids by full sort: similarity descending, ties by id.
pub fn sort_oracle(query: &[f64], pool: &[(String, Vec<f64>)], k: usize) -> Vec<String> {
    let mut all: Vec<(f64, &String)> = pool.iter().map(|(id, v)| (cosine(query, v), id)).collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    all.into_iter().take(k).map(|(_, id)| id.clone()).collect()
}

/// Largest deviation between the exact ∇E[R] and the enumerated
/// expectation of the per-sample estimator, with and without the learned
/// baseline subtracted. Also returns the total probability mass.
pub fn policy_gradient_bias(lm: &ToyLM, max_len: usize) -> ([f64; 2], f64) {
    let seqs = all_sequences(lm.vocab_size(), max_len);
    let (truth, total) = true_reward_gradient(lm, &seqs);
    let mut worst = [0.0f64; 2];
    for (slot, with_baseline) in [false, true].into_iter().enumerate() {
        let mut expect = vec![0.0; lm.logits.len()];
        for y in &seqs {
            let p: f64 = lm.sequence_log_probs(&[], y).iter().sum::<f64>().exp();
            let ctx = lm.contexts_along(&[], y);
            let b = if with_baseline { baseline_predictions(lm, &ctx) } else { vec![0.0; y.len()] };
            for (e, g) in expect.iter_mut().zip(policy_gradient(lm, &[], y, reward_of(y), &b)) {
                *e += p * g;
            }
        }
        worst[slot] = expect.iter().zip(&truth).map(|(e, t)| (e - t).abs()).fold(0.0, f64::max);
    }
    (worst, total)
}
