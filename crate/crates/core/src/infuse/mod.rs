//! Style infusion into a small autoregressive model.
//!
//! Each training step mixes the reconstruction loss on the styled target
//! with a discriminator term weighted per sample by `C = β (1 − α_S)`, where
//! `α_S = D(y_s*, y_ns*)`. The discriminator term is optimized with the
//! score-function estimator `(R − R̂_i) ∇ log p(y_i)` and a learned baseline.

mod generate;
mod lm;
pub mod losses;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use generate::{beam_search, generate, greedy, postprocess, Hypothesis};
pub use lm::{BaselineHead, ToyLM, BOS, BOS_ID, EOS, EOS_ID};
pub use losses::{
    baseline_grad, baseline_loss, baseline_predictions, combined_loss, discriminator_loss, policy_gradient,
    reconstruction_grad, reconstruction_loss, sample_weight, supervised_loss, BaselineGrad,
};

use crate::error::{Error, Result};
use crate::features::{feature_kind, FeatureKind, FeatureVector, TextFeaturizer};
use crate::ranker::{Discriminator, TextRef};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    /// `C·L_D + (1 − C)·L_R`.
    #[default]
    Sd,
    /// `C·L_S + (1 − C)·L_R`.
    Ss,
    /// `w_D·L_adv + w_R·L_R` with constant weights.
    Fixed,
}

/// Adversarial term used by the fixed-weight mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Discriminator,
    #[default]
    Supervised,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InfusionConfig {
    pub loss_mode: LossMode,
    pub beta: f64,
    /// `(w_D, w_R)` for the fixed mode.
    pub fixed_weights: (f64, f64),
    pub fixed_objective: Objective,
    pub learning_rate: f64,
    pub baseline_learning_rate: f64,
    pub epochs: usize,
    pub beam_width: usize,
    pub max_tokens: usize,
    pub seed: u64,
    /// Values substituted for features that cannot be computed on a short
    /// generation (e.g. circuitousness below three tokens).
    pub fill_missing: BTreeMap<String, f64>,
}

impl Default for InfusionConfig {
    fn default() -> Self {
        InfusionConfig {
            loss_mode: LossMode::Sd,
            beta: 0.5,
            fixed_weights: (0.9, 0.1),
            fixed_objective: Objective::Supervised,
            learning_rate: 0.1,
            baseline_learning_rate: 0.05,
            epochs: 20,
            beam_width: 4,
            max_tokens: 100,
            seed: 0,
            fill_missing: BTreeMap::new(),
        }
    }
}

impl InfusionConfig {
    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        let (wd, wr) = self.fixed_weights;
        if self.loss_mode == LossMode::Fixed && (wd < 0.0 || wr < 0.0 || (wd + wr - 1.0).abs() > 1e-12) {
            return Err(Error::Config(format!("fixed weights must be nonnegative and sum to 1, got ({wd}, {wr})")));
        }
        if !(self.learning_rate > 0.0) || !(self.baseline_learning_rate >= 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.max_tokens == 0 || self.beam_width == 0 {
            return Err(Error::Config("max_tokens and beam_width must be positive".into()));
        }
        Ok(())
    }
}

/// A prompt with its preferred and less-preferred continuations, each
/// terminated by `<eos>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub prompt: Vec<String>,
    pub y_s_star: Vec<String>,
    pub y_ns_star: Vec<String>,
}

impl TrainingPair {
    /// Builds a pair from word lists, appending `<eos>`.
    pub fn from_words<S: AsRef<str>>(prompt: &[S], styled: &[S], plain: &[S]) -> TrainingPair {
        let own = |s: &[S]| s.iter().map(|t| t.as_ref().to_string()).collect::<Vec<_>>();
        let term = |s: &[S]| {
            let mut v = own(s);
            v.push(EOS.to_string());
            v
        };
        TrainingPair { prompt: own(prompt), y_s_star: term(styled), y_ns_star: term(plain) }
    }

    pub fn check(&self) -> Result<()> {
        for (name, seq) in [("y_s_star", &self.y_s_star), ("y_ns_star", &self.y_ns_star)] {
            if seq.last().map(String::as_str) != Some(EOS) {
                return Err(Error::Shape(format!("{name} must be non-empty and end with {EOS}")));
            }
        }
        Ok(())
    }
}

/// Epoch means of the training losses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub epoch: usize,
    pub l_r: f64,
    /// `L_D` or `L_S`, depending on the mode.
    pub l_adv: f64,
    pub c_mean: f64,
    pub l_total: f64,
    pub l_br: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub lm: ToyLM,
    pub curve: Vec<EpochLosses>,
}

fn fill(mut fv: FeatureVector, fills: &BTreeMap<String, f64>) -> FeatureVector {
    for (name, v) in fills {
        if fv.entry(name).is_some_and(|e| e.value.is_none()) {
            fv.set(name, Some(*v), feature_kind(name).unwrap_or(FeatureKind::Native));
        }
    }
    fv
}

struct Encoded {
    prompt: Vec<usize>,
    styled: Vec<usize>,
    styled_features: FeatureVector,
    alpha_s: f64,
}

/// Scores texts for training, filling features a short text lacks.
struct Scorer<'a> {
    discriminator: &'a dyn Discriminator,
    featurizer: &'a dyn TextFeaturizer,
    fills: &'a BTreeMap<String, f64>,
}

impl Scorer<'_> {
    fn features(&self, words: &[String]) -> Result<FeatureVector> {
        Ok(fill(self.featurizer.featurize(words)?, self.fills))
    }

    fn score(&self, a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
        self.discriminator.score(TextRef::anonymous(a), TextRef::anonymous(b))
    }
}

/// `D(y_s*, y_ns*)` for a pair, the styled-sample strength.
pub fn alpha_s(
    lm: &ToyLM,
    pair: &TrainingPair,
    discriminator: &dyn Discriminator,
    featurizer: &dyn TextFeaturizer,
    fills: &BTreeMap<String, f64>,
) -> Result<f64> {
    let scorer = Scorer { discriminator, featurizer, fills };
    let s = scorer.features(&lm.detokenize(&lm.encode(&pair.y_s_star)?))?;
    let ns = scorer.features(&lm.detokenize(&lm.encode(&pair.y_ns_star)?))?;
    scorer.score(&s, &ns)
}

/// Trains `lm` on `pairs`, one gradient step per pair per epoch.
pub fn train(
    mut lm: ToyLM,
    pairs: &[TrainingPair],
    discriminator: &dyn Discriminator,
    featurizer: &dyn TextFeaturizer,
    config: &InfusionConfig,
) -> Result<TrainOutcome> {
    config.check()?;
    if pairs.is_empty() {
        return Err(Error::EmptySplit("no training pairs".into()));
    }
    let scorer = Scorer { discriminator, featurizer, fills: &config.fill_missing };
    let encoded: Vec<Encoded> = pairs
        .iter()
        .map(|p| {
            p.check()?;
            let styled = lm.encode(&p.y_s_star)?;
            let styled_features = scorer.features(&lm.detokenize(&styled))?;
            let plain_features = scorer.features(&lm.detokenize(&lm.encode(&p.y_ns_star)?))?;
            Ok(Encoded {
                prompt: lm.encode(&p.prompt)?,
                alpha_s: scorer.score(&styled_features, &plain_features)?,
                styled,
                styled_features,
            })
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut sums = [0.0; 5];
        for (step, pair) in encoded.iter().enumerate() {
            let c = match config.loss_mode {
                LossMode::Sd | LossMode::Ss => sample_weight(config.beta, pair.alpha_s)?,
                LossMode::Fixed => config.fixed_weights.0,
            };
            let w_r = match config.loss_mode {
                LossMode::Fixed => config.fixed_weights.1,
                _ => 1.0 - c,
            };
            let (l_r, mut grad) = reconstruction_grad(&lm, &pair.prompt, &pair.styled)?;

            let y = lm.sample(&pair.prompt, config.max_tokens, &mut rng);
            let contexts = lm.contexts_along(&pair.prompt, &y);
            let log_probs = lm.sequence_log_probs(&pair.prompt, &y);
            let preds = baseline_predictions(&lm, &contexts);
            let supervised = match config.loss_mode {
                LossMode::Ss => true,
                LossMode::Fixed => config.fixed_objective == Objective::Supervised,
                LossMode::Sd => false,
            };
            let (l_adv, reward) = if supervised {
                let scores = (1..=y.len())
                    .map(|i| {
                        let f = scorer.features(&lm.detokenize(&y[..i]))?;
                        scorer.score(&pair.styled_features, &f)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let l_s = supervised_loss(&scores)?;
                (l_s, l_s)
            } else {
                let f = scorer.features(&lm.detokenize(&y))?;
                let r = scorer.score(&pair.styled_features, &f)?;
                (discriminator_loss(r, &preds, &log_probs)?, r)
            };
            let l_total = c * l_adv + w_r * l_r;
            let (l_br, bgrad) = baseline_grad(&lm, &contexts, reward);
            if ![l_r, l_adv, l_total, l_br].iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("loss at epoch {epoch}, step {step}")));
            }

            if c > 0.0 {
                let pg = policy_gradient(&lm, &pair.prompt, &y, reward, &preds);
                let n = y.len() as f64;
                for (g, p) in grad.iter_mut().zip(&pg) {
                    *g = w_r * *g + c * p / n;
                }
            } else if w_r != 1.0 {
                grad.iter_mut().for_each(|g| *g *= w_r);
            }
            for (l, g) in lm.logits.iter_mut().zip(&grad) {
                *l -= config.learning_rate * g;
            }
            let blr = config.baseline_learning_rate;
            for (w, g) in lm.head.weights.iter_mut().zip(&bgrad.weights) {
                *w -= blr * g;
            }
            lm.head.bias -= blr * bgrad.bias;
            for (s, g) in lm.states.iter_mut().zip(&bgrad.states) {
                *s -= blr * g;
            }
            if lm.check_finite().is_err() {
                return Err(Error::NonFinite(format!("parameters at epoch {epoch}, step {step}")));
            }
            for (s, v) in sums.iter_mut().zip([l_r, l_adv, c, l_total, l_br]) {
                *s += v;
            }
        }
        let n = encoded.len() as f64;
        curve.push(EpochLosses {
            epoch,
            l_r: sums[0] / n,
            l_adv: sums[1] / n,
            c_mean: sums[2] / n,
            l_total: sums[3] / n,
            l_br: sums[4] / n,
        });
    }
    Ok(TrainOutcome { lm, curve })
}

pub fn write_loss_curve<W: Write>(curve: &[EpochLosses], mut w: W) -> Result<()> {
    let io = |e| Error::io("<loss curve>", e);
    writeln!(w, "epoch,l_r,l_adv,c_mean,l_total,l_br").map_err(io)?;
    for e in curve {
        writeln!(w, "{},{:?},{:?},{:?},{:?},{:?}", e.epoch, e.l_r, e.l_adv, e.c_mean, e.l_total, e.l_br).map_err(io)?;
    }
    Ok(())
}

/// One generation as written to JSONL.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub prompt: String,
    pub text: String,
    pub log_probs: Vec<f64>,
}

/// Beam-decodes each prompt and applies the degeneration guard.
pub fn generate_records(lm: &ToyLM, prompts: &[Vec<String>], config: &InfusionConfig) -> Result<Vec<GenerationRecord>> {
    prompts
        .iter()
        .map(|p| {
            let ids = lm.encode(p)?;
            let h = generate(lm, &ids, config.beam_width, config.max_tokens)?;
            Ok(GenerationRecord {
                prompt: p.join(" "),
                text: postprocess(&lm.detokenize(&h.tokens).join(" ")),
                log_probs: h.log_probs,
            })
        })
        .collect()
}

/// Draws one ancestral sample per prompt. Prompt `i` uses stream `i` of a
/// generator seeded with `seed`, so records do not depend on each other.
pub fn sample_records(lm: &ToyLM, prompts: &[Vec<String>], max_tokens: usize, seed: u64) -> Result<Vec<GenerationRecord>> {
    prompts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let ids = lm.encode(p)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let tokens = lm.sample(&ids, max_tokens, &mut rng);
            Ok(GenerationRecord {
                prompt: p.join(" "),
                text: postprocess(&lm.detokenize(&tokens).join(" ")),
                log_probs: lm.sequence_log_probs(&ids, &tokens),
            })
        })
        .collect()
}

pub fn save_generations(records: &[GenerationRecord], path: impl AsRef<Path>) -> Result<()> {
    crate::corpus::write_jsonl(path.as_ref(), records)
}

pub fn load_generations(path: impl AsRef<Path>) -> Result<Vec<GenerationRecord>> {
    use std::io::BufRead;
    let path = path.as_ref();
    let mut out = Vec::new();
    for (i, line) in crate::corpus::open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?);
    }
    Ok(out)
}

/// Lowercased word tokens of a document, the units the table model sees.
pub fn words_of(doc: &crate::corpus::Document) -> Vec<String> {
    doc.tokens().into_iter().filter(|t| crate::text::is_word(t)).map(|t| t.to_lowercase()).collect()
}

/// Training pairs from decisive judgments: the first `prompt_tokens` words
/// of the preferred text form the prompt, its remainder is `y_s*`, and the
/// other text minus the same number of leading words is `y_ns*`.
pub fn pairs_from_judgments(
    corpus: &crate::corpus::Corpus,
    judgments: &crate::corpus::JudgmentSet,
    prompt_tokens: usize,
) -> Result<Vec<TrainingPair>> {
    judgments
        .iter()
        .filter(|j| !j.tie)
        .map(|j| {
            let doc = |id: &str| corpus.document(id).ok_or_else(|| Error::DanglingId(id.to_string()));
            let (a, b) = (words_of(doc(&j.a_id)?), words_of(doc(&j.b_id)?));
            let k = prompt_tokens.min(a.len());
            Ok(TrainingPair::from_words(&a[..k], &a[k..], &b[prompt_tokens.min(b.len())..]))
        })
        .collect()
}

/// Sorted distinct words appearing anywhere in `pairs`.
pub fn vocabulary(pairs: &[TrainingPair]) -> Vec<String> {
    let words: std::collections::BTreeSet<&String> = pairs
        .iter()
        .flat_map(|p| p.prompt.iter().chain(&p.y_s_star).chain(&p.y_ns_star))
        .filter(|w| w.as_str() != EOS)
        .collect();
    words.into_iter().cloned().collect()
}

/// Prompt and reference continuation for each document.
pub fn prompts_and_references<'a>(
    docs: impl IntoIterator<Item = &'a crate::corpus::Document>,
    prompt_tokens: usize,
) -> Vec<(Vec<String>, String)> {
    docs.into_iter()
        .map(|d| {
            let w = words_of(d);
            let k = prompt_tokens.min(w.len());
            (w[..k].to_vec(), w[k..].join(" "))
        })
        .collect()
}
