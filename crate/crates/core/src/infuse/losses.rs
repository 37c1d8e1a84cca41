//! The training losses and their gradients.

use crate::error::{Error, Result};

use super::lm::ToyLM;

/// `L_R = −(1/N) Σ log p(y_i)` over the N tokens of `target`.
pub fn reconstruction_loss(lm: &ToyLM, prompt: &[usize], target: &[usize]) -> Result<f64> {
    if target.is_empty() {
        return Err(Error::Degenerate("reconstruction target is empty".into()));
    }
    let lps = lm.sequence_log_probs(prompt, target);
    Ok(-lps.iter().sum::<f64>() / target.len() as f64)
}

/// `L_R` and its gradient with respect to the logit table.
pub fn reconstruction_grad(lm: &ToyLM, prompt: &[usize], target: &[usize]) -> Result<(f64, Vec<f64>)> {
    let loss = reconstruction_loss(lm, prompt, target)?;
    let mut grad = vec![0.0; lm.logits.len()];
    let w = -1.0 / target.len() as f64;
    for (c, &t) in lm.contexts_along(prompt, target).iter().zip(target) {
        lm.accumulate_log_prob_grad(&mut grad, *c, t, w);
    }
    Ok((loss, grad))
}

/// `L_D = D(y_s*, y) − (1/N) Σ R̂_i log p(y_i)`, reported as written.
pub fn discriminator_loss(reward: f64, baselines: &[f64], log_probs: &[f64]) -> Result<f64> {
    if baselines.len() != log_probs.len() {
        return Err(Error::DimensionMismatch { context: "baseline per token".into(), expected: log_probs.len(), found: baselines.len() });
    }
    if log_probs.is_empty() {
        return Err(Error::Degenerate("generated sequence is empty".into()));
    }
    let n = log_probs.len() as f64;
    Ok(reward - baselines.iter().zip(log_probs).map(|(b, l)| b * l).sum::<f64>() / n)
}

/// Score-function estimate `Σ_i (R − R̂_i) ∇ log p(y_i)` of the gradient of
/// the expected reward, without any 1/N factor.
pub fn policy_gradient(lm: &ToyLM, prompt: &[usize], y: &[usize], reward: f64, baselines: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), baselines.len());
    let mut grad = vec![0.0; lm.logits.len()];
    for ((c, &t), b) in lm.contexts_along(prompt, y).iter().zip(y).zip(baselines) {
        lm.accumulate_log_prob_grad(&mut grad, *c, t, reward - b);
    }
    grad
}

/// Baseline prediction `R̂_i` at each visited context.
pub fn baseline_predictions(lm: &ToyLM, contexts: &[usize]) -> Vec<f64> {
    contexts.iter().map(|&c| lm.head.predict(lm.state(c))).collect()
}

/// `L_BR = (1/N) Σ (R − R̂_i)²`.
pub fn baseline_loss(reward: f64, predictions: &[f64]) -> f64 {
    predictions.iter().map(|p| (reward - p).powi(2)).sum::<f64>() / predictions.len().max(1) as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineGrad {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Dense, `contexts × state_dim`.
    pub states: Vec<f64>,
}

/// `L_BR` and its gradient with respect to the head and state embeddings.
pub fn baseline_grad(lm: &ToyLM, contexts: &[usize], reward: f64) -> (f64, BaselineGrad) {
    let d = lm.state_dim;
    let mut g = BaselineGrad { weights: vec![0.0; d], bias: 0.0, states: vec![0.0; lm.states.len()] };
    if contexts.is_empty() {
        return (0.0, g);
    }
    let preds = baseline_predictions(lm, contexts);
    let n = contexts.len() as f64;
    for (&c, p) in contexts.iter().zip(&preds) {
        let r = -2.0 * (reward - p) / n;
        let s = lm.state(c);
        for k in 0..d {
            g.weights[k] += r * s[k];
            g.states[c * d + k] += r * lm.head.weights[k];
        }
        g.bias += r;
    }
    (baseline_loss(reward, &preds), g)
}

/// `L_S`: mean discriminator score over the prefixes of a generation.
pub fn supervised_loss(prefix_scores: &[f64]) -> Result<f64> {
    if prefix_scores.is_empty() {
        return Err(Error::Degenerate("no prefixes to score".into()));
    }
    Ok(prefix_scores.iter().sum::<f64>() / prefix_scores.len() as f64)
}

/// `C = β (1 − α_S)`.
pub fn sample_weight(beta: f64, alpha_s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) || !(0.0..=1.0).contains(&alpha_s) {
        return Err(Error::Config(format!("β = {beta} and α_S = {alpha_s} must lie in [0, 1]")));
    }
    Ok(beta * (1.0 - alpha_s))
}

/// `L_SD = C·L_D + (1 − C)·L_R`; returns `(L_SD, C)`.
pub fn combined_loss(l_d: f64, l_r: f64, beta: f64, alpha_s: f64) -> Result<(f64, f64)> {
    let c = sample_weight(beta, alpha_s)?;
    Ok((c * l_d + (1.0 - c) * l_r, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reconstruction_examples() {
        // Vocabulary <eos>, a: every emittable token has probability 0.5.
        let m = ToyLM::new(&["a"], 1, 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let l = reconstruction_loss(&m, &[], &[2, 1]).unwrap();
        assert!((l - 0.6931).abs() < 1e-4);
        assert!(reconstruction_loss(&m, &[], &[]).is_err());
    }

    #[test]
    fn discriminator_loss_examples() {
        assert_eq!(discriminator_loss(0.7, &[0.0, 0.0], &[-1.0, -2.0]).unwrap(), 0.7);
        assert!((discriminator_loss(0.5, &[0.5, 0.5], &[-1.0, -1.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn baseline_loss_examples() {
        assert_eq!(baseline_loss(0.3, &[0.3, 0.3]), 0.0);
        assert_eq!(baseline_loss(1.0, &[0.0, 0.0]), 1.0);
    }

    #[test]
    fn supervised_loss_examples() {
        assert_eq!(supervised_loss(&[0.5, 0.5, 0.5]).unwrap(), 0.5);
        assert_eq!(supervised_loss(&[0.8]).unwrap(), 0.8);
        assert!((supervised_loss(&[0.2, 0.4, 0.6]).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn combined_loss_examples() {
        assert_eq!(combined_loss(3.0, 1.5, 0.7, 1.0).unwrap(), (1.5, 0.0));
        let (l, c) = combined_loss(2.0, 1.0, 0.5, 0.6).unwrap();
        assert!((c - 0.2).abs() < 1e-15 && (l - 1.2).abs() < 1e-15);
        assert_eq!(combined_loss(2.5, 1.0, 1.0, 0.0).unwrap().0, 2.5);
        assert_eq!(combined_loss(2.5, 1.0, 0.0, 0.3).unwrap().0, 1.0);
        assert!(combined_loss(1.0, 1.0, 1.5, 0.0).is_err());
    }
}
