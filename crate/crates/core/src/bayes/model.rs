//! Hierarchical pairwise-outcome model.
//!
//! For observation `n` with texts `a`, `b`, topic `t` and standardized
//! feature difference `d = A_ft - B_ft`:
//!
//! ```text
//! logit p_n = p̄ + (α[a] - β[b]) + γ[t] · d
//! α = ᾱ + α_v · α_σ     (β and γ built the same way)
//! p̄, ᾱ, β̄, γ̄ ~ Normal(0, 0.25)
//! α_v, β_v, γ_v ~ Normal(0, 1)
//! α_σ, β_σ, γ_σ ~ Exponential(1)
//! ```
//!
//! Scales are sampled as `log σ`, so the log density carries the
//! change-of-variables term `log σ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};


/// Observations of one feature across judgments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesData {
    /// 1 when text A won.
    pub outcomes: Vec<u8>,
    pub a_index: Vec<usize>,
    pub b_index: Vec<usize>,
    pub topic_index: Vec<usize>,
    pub feat_diff: Vec<f64>,
    pub n_a: usize,
    pub n_b: usize,
    pub topics: Vec<String>,
}

impl BayesData {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn n_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn layout(&self) -> Layout {
        Layout { n_a: self.n_a, n_b: self.n_b, n_topics: self.topics.len() }
    }

    pub fn check(&self) -> Result<()> {
        let n = self.outcomes.len();
        if [self.a_index.len(), self.b_index.len(), self.topic_index.len(), self.feat_diff.len()].iter().any(|&l| l != n) {
            return Err(Error::Shape("observation arrays differ in length".into()));
        }
        if self.feat_diff.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite("feature differences".into()));
        }
        if self.outcomes.iter().any(|&y| y > 1) {
            return Err(Error::Shape("outcomes must be 0 or 1".into()));
        }
        if self.a_index.iter().any(|&i| i >= self.n_a)
            || self.b_index.iter().any(|&i| i >= self.n_b)
            || self.topic_index.iter().any(|&t| t >= self.topics.len())
        {
            return Err(Error::Shape("index outside its parameter block".into()));
        }
        Ok(())
    }

    /// Swap the roles of A and B: outcomes flip and differences change sign.
    pub fn swapped(&self) -> BayesData {
        BayesData {
            outcomes: self.outcomes.iter().map(|y| 1 - y).collect(),
            a_index: self.b_index.clone(),
            b_index: self.a_index.clone(),
            topic_index: self.topic_index.clone(),
            feat_diff: self.feat_diff.iter().map(|d| -d).collect(),
            n_a: self.n_b,
            n_b: self.n_a,
            topics: self.topics.clone(),
        }
    }
}

/// Sizes of the per-text and per-topic blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub n_a: usize,
    pub n_b: usize,
    pub n_topics: usize,
}

impl Layout {
    pub fn dim(&self) -> usize {
        1 + 3 * 2 + self.n_a + self.n_b + self.n_topics
    }

    pub const P_BAR: usize = 0;
    pub const ALPHA_BAR: usize = 1;
    pub const ALPHA_SIGMA: usize = 2;
    const ALPHA_V: usize = 3;

    pub fn beta_bar(&self) -> usize {
        Self::ALPHA_V + self.n_a
    }
    pub fn beta_sigma(&self) -> usize {
        self.beta_bar() + 1
    }
    fn beta_v(&self) -> usize {
        self.beta_bar() + 2
    }
    pub fn gamma_bar(&self) -> usize {
        self.beta_v() + self.n_b
    }
    pub fn gamma_sigma(&self) -> usize {
        self.gamma_bar() + 1
    }
    pub fn gamma_v(&self) -> usize {
        self.gamma_bar() + 2
    }

    /// γ for topic `t` from a flat parameter vector.
    pub fn gamma(&self, x: &[f64], t: usize) -> f64 {
        x[self.gamma_bar()] + x[self.gamma_v() + t] * x[self.gamma_sigma()].exp()
    }
}

/// Named view of the flat parameter vector; `*_sigma_raw` are log scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesParams {
    pub p_bar: f64,
    pub alpha_bar: f64,
    pub alpha_sigma_raw: f64,
    pub alpha_v: Vec<f64>,
    pub beta_bar: f64,
    pub beta_sigma_raw: f64,
    pub beta_v: Vec<f64>,
    pub gamma_bar: f64,
    pub gamma_sigma_raw: f64,
    pub gamma_v: Vec<f64>,
}

impl BayesParams {
    pub fn zeros(layout: Layout) -> Self {
        Self::from_vec(layout, &vec![0.0; layout.dim()])
    }

    pub fn layout(&self) -> Layout {
        Layout { n_a: self.alpha_v.len(), n_b: self.beta_v.len(), n_topics: self.gamma_v.len() }
    }

    pub fn from_vec(layout: Layout, x: &[f64]) -> Self {
        assert_eq!(x.len(), layout.dim());
        BayesParams {
            p_bar: x[Layout::P_BAR],
            alpha_bar: x[Layout::ALPHA_BAR],
            alpha_sigma_raw: x[Layout::ALPHA_SIGMA],
            alpha_v: x[Layout::ALPHA_V..layout.beta_bar()].to_vec(),
            beta_bar: x[layout.beta_bar()],
            beta_sigma_raw: x[layout.beta_sigma()],
            beta_v: x[layout.beta_v()..layout.gamma_bar()].to_vec(),
            gamma_bar: x[layout.gamma_bar()],
            gamma_sigma_raw: x[layout.gamma_sigma()],
            gamma_v: x[layout.gamma_v()..].to_vec(),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut x = vec![self.p_bar, self.alpha_bar, self.alpha_sigma_raw];
        x.extend(&self.alpha_v);
        x.extend([self.beta_bar, self.beta_sigma_raw]);
        x.extend(&self.beta_v);
        x.extend([self.gamma_bar, self.gamma_sigma_raw]);
        x.extend(&self.gamma_v);
        x
    }

    pub fn alpha(&self, i: usize) -> f64 {
        self.alpha_bar + self.alpha_v[i] * self.alpha_sigma_raw.exp()
    }
    pub fn beta(&self, i: usize) -> f64 {
        self.beta_bar + self.beta_v[i] * self.beta_sigma_raw.exp()
    }
    pub fn gamma(&self, t: usize) -> f64 {
        self.gamma_bar + self.gamma_v[t] * self.gamma_sigma_raw.exp()
    }
}

/// Prior settings. The location priors are `Normal(0, s)`; `scale` is read
/// as the standard deviation unless `scale_is_variance` is set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub scale: f64,
    pub scale_is_variance: bool,
    /// Rate of the exponential prior on each σ.
    pub rate: f64,
    /// Drop the prior and Jacobian terms (likelihood only).
    pub likelihood_only: bool,
}

impl Default for Prior {
    fn default() -> Self {
        Prior { scale: 0.25, scale_is_variance: false, rate: 1.0, likelihood_only: false }
    }
}

impl Prior {
    fn sd(&self) -> f64 {
        if self.scale_is_variance {
            self.scale.sqrt()
        } else {
            self.scale
        }
    }
}

/// `ln √(2π)`.
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// The posterior as a differentiable log density over the flat vector.
#[derive(Clone, Debug)]
pub struct Posterior<'a> {
    pub data: &'a BayesData,
    pub prior: Prior,
    layout: Layout,
}

impl<'a> Posterior<'a> {
    pub fn new(data: &'a BayesData, prior: Prior) -> Result<Self> {
        data.check()?;
        Ok(Posterior { data, prior, layout: data.layout() })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.layout.dim() {
            return Err(Error::DimensionMismatch { context: "model parameters".into(), expected: self.layout.dim(), found: x.len() });
        }
        Ok(())
    }

    /// Log posterior density (up to the evidence); gradient written to `grad`
    /// when given.
    pub fn eval(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let l = &self.layout;
        let d = self.data;
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let (bb, bs, bv) = (l.beta_bar(), l.beta_sigma(), l.beta_v());
        let (gb, gs, gv) = (l.gamma_bar(), l.gamma_sigma(), l.gamma_v());
        let sa = x[Layout::ALPHA_SIGMA].exp();
        let sb = x[bs].exp();
        let sg = x[gs].exp();

        let mut lp = 0.0;
        for n in 0..d.len() {
            let (a, b, t, diff) = (d.a_index[n], d.b_index[n], d.topic_index[n], d.feat_diff[n]);
            let av = x[Layout::ALPHA_V + a];
            let bvv = x[bv + b];
            let gvv = x[gv + t];
            let gamma = x[gb] + gvv * sg;
            let eta = x[Layout::P_BAR] + (x[Layout::ALPHA_BAR] + av * sa) - (x[bb] + bvv * sb) + gamma * diff;
            // One exponential gives both log σ(±η) and σ(η).
            let e = (-eta.abs()).exp();
            let log_p = if eta >= 0.0 { -e.ln_1p() } else { eta - e.ln_1p() };
            let y = d.outcomes[n] as f64;
            lp += if d.outcomes[n] == 1 { log_p } else { log_p - eta };
            if let Some(g) = grad.as_deref_mut() {
                let p = if eta >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
                let r = y - p;
                g[Layout::P_BAR] += r;
                g[Layout::ALPHA_BAR] += r;
                g[Layout::ALPHA_V + a] += r * sa;
                g[Layout::ALPHA_SIGMA] += r * av * sa;
                g[bb] -= r;
                g[bv + b] -= r * sb;
                g[bs] -= r * bvv * sb;
                g[gb] += r * diff;
                g[gv + t] += r * diff * sg;
                g[gs] += r * diff * gvv * sg;
            }
        }
        if self.prior.likelihood_only {
            return lp;
        }

        let sd0 = self.prior.sd();
        let rate = self.prior.rate;
        let (ln_sd0, ln_rate) = (sd0.ln(), rate.ln());
        for &i in &[Layout::P_BAR, Layout::ALPHA_BAR, bb, gb] {
            lp += -0.5 * (x[i] / sd0).powi(2) - ln_sd0 - LN_SQRT_2PI;
            if let Some(g) = grad.as_deref_mut() {
                g[i] -= x[i] / (sd0 * sd0);
            }
        }
        let blocks = [(Layout::ALPHA_V, l.n_a), (bv, l.n_b), (gv, l.n_topics)];
        for (start, len) in blocks {
            let block = &x[start..start + len];
            lp -= 0.5 * block.iter().map(|v| v * v).sum::<f64>() + len as f64 * LN_SQRT_2PI;
            if let Some(g) = grad.as_deref_mut() {
                for (gi, v) in g[start..start + len].iter_mut().zip(block) {
                    *gi -= v;
                }
            }
        }
        // σ = exp(s) ~ Exp(rate): log p(s) = ln rate − rate·e^s + s.
        for &i in &[Layout::ALPHA_SIGMA, bs, gs] {
            let s = x[i].exp();
            lp += ln_rate - rate * s + x[i];
            if let Some(g) = grad.as_deref_mut() {
                g[i] += 1.0 - rate * s;
            }
        }
        lp
    }
}

pub fn log_posterior(params: &BayesParams, data: &BayesData, prior: Prior) -> Result<f64> {
    let post = Posterior::new(data, prior)?;
    let x = params.to_vec();
    if params.layout() != data.layout() {
        return Err(Error::DimensionMismatch { context: "model parameters".into(), expected: data.layout().dim(), found: x.len() });
    }
    post.check_len(&x)?;
    Ok(post.eval(&x, None))
}

pub fn grad_log_posterior(params: &BayesParams, data: &BayesData, prior: Prior) -> Result<Vec<f64>> {
    let post = Posterior::new(data, prior)?;
    if params.layout() != data.layout() {
        return Err(Error::DimensionMismatch { context: "model parameters".into(), expected: data.layout().dim(), found: params.to_vec().len() });
    }
    let x = params.to_vec();
    let mut g = vec![0.0; x.len()];
    post.eval(&x, Some(&mut g));
    Ok(g)
}

impl super::nuts::LogDensity for Posterior<'_> {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(x, Some(grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn toy_data(rng: &mut ChaCha8Rng, n: usize) -> BayesData {
        let (n_a, n_b, n_t) = (5, 4, 3);
        BayesData {
            outcomes: (0..n).map(|_| rng.random_range(0..2u8)).collect(),
            a_index: (0..n).map(|_| rng.random_range(0..n_a)).collect(),
            b_index: (0..n).map(|_| rng.random_range(0..n_b)).collect(),
            topic_index: (0..n).map(|_| rng.random_range(0..n_t)).collect(),
            feat_diff: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
            n_a,
            n_b,
            topics: (0..n_t).map(|t| format!("t{t}")).collect(),
        }
    }

    #[test]
    fn zero_params_give_coin_flip_likelihood() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = toy_data(&mut rng, 10);
        let prior = Prior { likelihood_only: true, ..Prior::default() };
        let lp = log_posterior(&BayesParams::zeros(data.layout()), &data, prior).unwrap();
        assert!((lp / 10.0 - 0.5f64.ln()).abs() < 1e-12);
        assert!((0.5f64.ln() - (-0.6931)).abs() < 1e-4);
    }

    #[test]
    fn single_observation_gamma_only() {
        let data = BayesData {
            outcomes: vec![1],
            a_index: vec![0],
            b_index: vec![0],
            topic_index: vec![0],
            feat_diff: vec![1.0],
            n_a: 1,
            n_b: 1,
            topics: vec!["t".into()],
        };
        let mut p = BayesParams::zeros(data.layout());
        // σ_γ = e^0 = 1, so γ = γ̄ + γ_v = 1.
        p.gamma_v[0] = 1.0;
        p.alpha_sigma_raw = -50.0;
        p.beta_sigma_raw = -50.0;
        let prior = Prior { likelihood_only: true, ..Prior::default() };
        let lp = log_posterior(&p, &data, prior).unwrap();
        assert!((lp - (-0.3133)).abs() < 1e-4);
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = toy_data(&mut rng, 4);
        let wrong = BayesParams::zeros(Layout { n_a: 1, n_b: 1, n_topics: 1 });
        assert!(log_posterior(&wrong, &data, Prior::default()).is_err());
        assert!(grad_log_posterior(&wrong, &data, Prior::default()).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let data = toy_data(&mut rng, 30);
            let dim = data.layout().dim();
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let post = Posterior::new(&data, Prior::default()).unwrap();
            let mut g = vec![0.0; dim];
            post.eval(&x, Some(&mut g));
            for i in 0..dim {
                let h = 1e-5;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (post.eval(&xp, None) - post.eval(&xm, None)) / (2.0 * h);
                let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-5, "component {i}: {} vs {fd}", g[i]);
            }
        }
    }

    #[test]
    fn label_swap_leaves_likelihood_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = toy_data(&mut rng, 25);
        let layout = data.layout();
        let x: Vec<f64> = (0..layout.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = BayesParams::from_vec(layout, &x);
        let swapped = BayesParams {
            p_bar: -p.p_bar,
            alpha_bar: p.beta_bar,
            alpha_sigma_raw: p.beta_sigma_raw,
            alpha_v: p.beta_v.clone(),
            beta_bar: p.alpha_bar,
            beta_sigma_raw: p.alpha_sigma_raw,
            beta_v: p.alpha_v.clone(),
            ..p.clone()
        };
        let prior = Prior { likelihood_only: true, ..Prior::default() };
        let a = log_posterior(&p, &data, prior).unwrap();
        let b = log_posterior(&swapped, &data.swapped(), prior).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}
