use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::diagnostics::{scalar_diagnostics, RHAT_THRESHOLD};
use super::model::{BayesData, Layout, Posterior, Prior};
use super::nuts::{nuts_sample, Chain, NutsConfig};
use crate::corpus::JudgmentSet;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::math::{mean, quantile_sorted, sample_variance, sigmoid};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BayesConfig {
    pub nuts: NutsConfig,
    pub prior: Prior,
    /// Keep the winner in position A instead of a seeded coin flip.
    pub fixed_orientation: bool,
}

/// Both readings of a logit-scale effect.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityShift {
    /// `(sigmoid(δ) − 0.5) · 100`.
    pub points: f64,
    pub odds_multiplier: f64,
}

pub fn logit_shift_to_probability(delta: f64) -> ProbabilityShift {
    ProbabilityShift { points: (sigmoid(delta) - 0.5) * 100.0, odds_multiplier: delta.exp() }
}

/// Posterior summary of one scalar with a central 90% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub q5: f64,
    pub q95: f64,
    pub rhat: f64,
    pub ess: f64,
}

impl Summary {
    pub fn from_chains(chains: &[Vec<f64>]) -> Summary {
        let mut all: Vec<f64> = chains.iter().flatten().copied().collect();
        all.sort_by(f64::total_cmp);
        let d = scalar_diagnostics(chains);
        Summary {
            mean: mean(&all),
            sd: sample_variance(&all).sqrt(),
            q5: quantile_sorted(&all, 0.05),
            q95: quantile_sorted(&all, 0.95),
            rhat: d.rhat,
            ess: d.ess,
        }
    }

    pub fn excludes_zero(&self) -> bool {
        self.q5 > 0.0 || self.q95 < 0.0
    }

    pub fn covers(&self, x: f64) -> bool {
        self.q5 <= x && x <= self.q95
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicCorrelation {
    pub topic: String,
    pub observations: usize,
    pub gamma: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub feature: String,
    pub observations: usize,
    /// Judgments dropped because a side lacked the feature.
    pub skipped: usize,
    pub topics: Vec<TopicCorrelation>,
    /// The population-level mean γ̄.
    pub pooled: Summary,
    /// Mean of the per-topic γ over the observed topics.
    pub topic_mean: Summary,
    pub shift: ProbabilityShift,
    pub divergences: usize,
    /// Largest split R-hat over every sampled coordinate.
    pub max_rhat: f64,
    pub flagged: bool,
}

impl CorrelationResult {
    /// The effect used for direction checks and weighting: the average of
    /// the per-topic slopes, which the data pin down far more tightly than
    /// the hyper-mean when there are only a few topics.
    pub fn effect(&self) -> Summary {
        self.topic_mean
    }
}

/// Builds model data for one standardized feature. Ties are dropped.
pub fn build_data(
    judgments: &JudgmentSet,
    matrix: &FeatureMatrix,
    feature: &str,
    config: &BayesConfig,
) -> Result<(BayesData, usize)> {
    if !matrix.is_standardized() {
        return Err(Error::Config("the feature matrix must be standardized".into()));
    }
    let col = matrix.column_of(feature).ok_or_else(|| Error::MissingFeature(feature.to_string()))?;
    if matrix.stats().is_some_and(|s| s[col].constant) {
        return Err(Error::ConstantFeature(feature.to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.nuts.seed);
    rng.set_stream(u64::MAX);

    let topics: Vec<String> = judgments.decisive().topics().into_iter().collect();
    let topic_of: HashMap<&str, usize> = topics.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut a_ids: HashMap<String, usize> = HashMap::new();
    let mut b_ids: HashMap<String, usize> = HashMap::new();
    let mut data = BayesData {
        outcomes: vec![],
        a_index: vec![],
        b_index: vec![],
        topic_index: vec![],
        feat_diff: vec![],
        n_a: 0,
        n_b: 0,
        topics: topics.clone(),
    };
    let mut skipped = 0;
    for j in judgments.iter().filter(|j| !j.tie) {
        let value = |id: &str| matrix.row_of(id).and_then(|r| matrix.get(r, col));
        let (Some(xa), Some(xb)) = (value(&j.a_id), value(&j.b_id)) else {
            skipped += 1;
            continue;
        };
        let swap = !config.fixed_orientation && rng.random::<bool>();
        let (first, second, diff, y) = if swap { (&j.b_id, &j.a_id, xb - xa, 0) } else { (&j.a_id, &j.b_id, xa - xb, 1) };
        let next = a_ids.len();
        data.a_index.push(*a_ids.entry(first.clone()).or_insert(next));
        let next = b_ids.len();
        data.b_index.push(*b_ids.entry(second.clone()).or_insert(next));
        data.topic_index.push(topic_of[j.topic.as_str()]);
        data.feat_diff.push(diff);
        data.outcomes.push(y);
    }
    data.n_a = a_ids.len();
    data.n_b = b_ids.len();
    let mut per_topic = vec![0usize; topics.len()];
    for &t in &data.topic_index {
        per_topic[t] += 1;
    }
    if per_topic.iter().all(|&n| n < 2) {
        return Err(Error::Degenerate(format!("feature `{feature}` has fewer than 2 usable judgments in every topic")));
    }
    Ok((data, skipped))
}

#[derive(Clone, Copy)]
enum Gamma {
    Topic(usize),
    HyperMean,
    TopicMean,
}

fn gamma_draws(chains: &[Chain], layout: Layout, which: Gamma) -> Vec<Vec<f64>> {
    let nt = layout.n_topics;
    chains
        .iter()
        .map(|c| {
            c.draws
                .iter()
                .map(|x| match which {
                    Gamma::Topic(t) => layout.gamma(x, t),
                    Gamma::HyperMean => x[layout.gamma_bar()],
                    Gamma::TopicMean => (0..nt).map(|t| layout.gamma(x, t)).sum::<f64>() / nt as f64,
                })
                .collect()
        })
        .collect()
}

/// Samples the posterior of prepared data and summarizes γ.
pub fn fit_data(data: &BayesData, feature: &str, config: &BayesConfig) -> Result<(CorrelationResult, Vec<Chain>)> {
    let post = Posterior::new(data, config.prior)?;
    let layout = post.layout();
    let chains = nuts_sample(&post, &config.nuts)?;
    let mut per_topic = vec![0usize; layout.n_topics];
    for &t in &data.topic_index {
        per_topic[t] += 1;
    }
    let topics = (0..layout.n_topics)
        .map(|t| TopicCorrelation {
            topic: data.topics[t].clone(),
            observations: per_topic[t],
            gamma: Summary::from_chains(&gamma_draws(&chains, layout, Gamma::Topic(t))),
        })
        .collect();
    let pooled = Summary::from_chains(&gamma_draws(&chains, layout, Gamma::HyperMean));
    let topic_mean = Summary::from_chains(&gamma_draws(&chains, layout, Gamma::TopicMean));
    let max_rhat = (0..layout.dim())
        .map(|i| {
            let cols: Vec<Vec<f64>> = chains.iter().map(|c| c.column(i)).collect();
            super::diagnostics::split_rhat(&cols)
        })
        .fold(f64::NAN, f64::max);
    let result = CorrelationResult {
        feature: feature.to_string(),
        observations: data.len(),
        skipped: 0,
        topics,
        shift: logit_shift_to_probability(topic_mean.mean),
        pooled,
        topic_mean,
        divergences: chains.iter().map(|c| c.divergences).sum(),
        max_rhat,
        flagged: !(max_rhat <= RHAT_THRESHOLD),
    };
    Ok((result, chains))
}

/// Fits the per-feature hierarchical model on a judgment set.
pub fn fit_feature_correlation(
    judgments: &JudgmentSet,
    matrix: &FeatureMatrix,
    feature: &str,
    config: &BayesConfig,
) -> Result<CorrelationResult> {
    let (data, skipped) = build_data(judgments, matrix, feature, config)?;
    let (mut result, _) = fit_data(&data, feature, config)?;
    result.skipped = skipped;
    Ok(result)
}

/// Settings for drawing data from the model's own generative process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub pairs: usize,
    pub topics: usize,
    pub texts_per_topic: usize,
    /// γ shared by every topic.
    pub gamma: f64,
    /// Fixed α_σ and β_σ; drawn from their prior when absent.
    pub bias_sigma: Option<f64>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec { pairs: 500, topics: 4, texts_per_topic: 40, gamma: 1.0, bias_sigma: None, seed: 0 }
    }
}

/// Draws a judgment data set: nuisance parameters come from their priors,
/// each text gets a standard-normal feature value, and every pair compares
/// two distinct texts of one topic.
pub fn synthetic_data(spec: &SyntheticSpec, prior: Prior) -> BayesData {
    use rand_distr::{Distribution, Exp, Normal, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sd = if prior.scale_is_variance { prior.scale.sqrt() } else { prior.scale };
    let loc = Normal::new(0.0, sd).expect("finite prior scale");
    let scale = Exp::new(prior.rate).expect("positive rate");
    let n_texts = spec.topics * spec.texts_per_topic;
    let p_bar: f64 = loc.sample(&mut rng);
    let (alpha_bar, beta_bar): (f64, f64) = (loc.sample(&mut rng), loc.sample(&mut rng));
    let (alpha_sigma, beta_sigma): (f64, f64) = (scale.sample(&mut rng), scale.sample(&mut rng));
    let (alpha_sigma, beta_sigma) = spec.bias_sigma.map_or((alpha_sigma, beta_sigma), |s| (s, s));
    let z = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let x: Vec<f64> = (0..n_texts).map(|_| z(&mut rng)).collect();
    let alpha: Vec<f64> = (0..n_texts)
        .map(|_| alpha_bar + alpha_sigma * z(&mut rng))
        .collect();
    let beta: Vec<f64> = (0..n_texts)
        .map(|_| beta_bar + beta_sigma * z(&mut rng))
        .collect();

    let mut a_ids: BTreeMap<usize, usize> = BTreeMap::new();
    let mut b_ids: BTreeMap<usize, usize> = BTreeMap::new();
    let mut data = BayesData {
        outcomes: vec![],
        a_index: vec![],
        b_index: vec![],
        topic_index: vec![],
        feat_diff: vec![],
        n_a: 0,
        n_b: 0,
        topics: (0..spec.topics).map(|t| format!("topic-{t}")).collect(),
    };
    for n in 0..spec.pairs {
        let t = n % spec.topics;
        let base = t * spec.texts_per_topic;
        let i = base + rng.random_range(0..spec.texts_per_topic);
        let mut j = base + rng.random_range(0..spec.texts_per_topic - 1);
        if j >= i {
            j += 1;
        }
        let diff = x[i] - x[j];
        let eta = p_bar + alpha[i] - beta[j] + spec.gamma * diff;
        let y = (rng.random::<f64>() < sigmoid(eta)) as u8;
        let next = a_ids.len();
        data.a_index.push(*a_ids.entry(i).or_insert(next));
        let next = b_ids.len();
        data.b_index.push(*b_ids.entry(j).or_insert(next));
        data.topic_index.push(t);
        data.feat_diff.push(diff);
        data.outcomes.push(y);
    }
    data.n_a = a_ids.len();
    data.n_b = b_ids.len();
    data
}
