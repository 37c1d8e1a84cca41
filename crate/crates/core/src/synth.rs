//! Synthetic corpora and experiments with known ground truth.
//!
//! [`fixture`] builds a small judged corpus where shorter texts win more
//! often, used to exercise the whole pipeline. [`desk_experiment`] trains a
//! table language model against a fixed discriminator that prefers short,
//! direct sequences and tests whether generations move in that direction.

use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, EmbeddingSequence, EmbeddingUnit, JudgmentSet, PairJudgment, Source};
use crate::error::Result;
use crate::eval::{welch_t_test, TTest};
use crate::features::{FeatureRegistry, TextFeaturizer, TokenFeaturizer};
use crate::infuse::{train, EpochLosses, InfusionConfig, LossMode, ToyLM, TrainingPair};
use crate::math::{mean, sigmoid};
use crate::ranker::Ranker;

/// Lowercase words the fixture texts are made of.
pub const FIXTURE_WORDS: &[&str] = &[
    "the", "city", "should", "build", "more", "parks", "because", "people", "need", "green", "space", "and", "clean",
    "air", "schools", "must", "teach", "children", "about", "history", "science", "music", "we", "believe", "that",
    "public", "transport", "is", "cheaper", "than", "cars", "for", "most", "families", "in", "large", "towns",
    "although", "some", "argue", "costs", "are", "high", "evidence", "suggests", "otherwise", "every", "year",
];

/// Short syllables used by the desk experiment.
pub const DESK_WORDS: &[&str] = &["ka", "lo", "mi", "nu", "pe", "ro", "sa", "tu"];

fn gaussian_table(words: impl IntoIterator<Item = String>, dim: usize, rng: &mut ChaCha8Rng) -> HashMap<String, Vec<f64>> {
    words
        .into_iter()
        .map(|w| {
            let v = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
            (w, v)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureSpec {
    pub pairs: usize,
    pub topics: usize,
    pub docs_per_topic: usize,
    pub external_docs: usize,
    pub embedding_dim: usize,
    /// Logit change per standard deviation of word count in favour of the
    /// shorter text.
    pub length_effect: f64,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec { pairs: 200, topics: 4, docs_per_topic: 20, external_docs: 40, embedding_dim: 4, length_effect: 1.5, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct Fixture {
    /// Judged style corpus with token embeddings.
    pub corpus: Corpus,
    /// Unjudged candidates for augmentation, with token embeddings.
    pub external: Corpus,
}

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(3..=10);
    let words: Vec<&str> = (0..n).map(|_| *FIXTURE_WORDS.choose(rng).unwrap()).collect();
    let mut s = words.join(" ");
    s[..1].make_ascii_uppercase();
    s.push('.');
    s
}

fn text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..=3);
    (0..n).map(|_| sentence(rng)).collect::<Vec<_>>().join(" ")
}

fn embed(doc: &Document, table: &HashMap<String, Vec<f64>>) -> EmbeddingSequence {
    let vectors = doc.tokens().iter().map(|t| table[&t.to_lowercase()].clone()).collect();
    EmbeddingSequence::new(doc.id.clone(), EmbeddingUnit::Token, vectors)
}

/// Builds the bundled pipeline fixture. Within each topic, the text with
/// fewer words wins with probability `σ(length_effect · Δz)`.
pub fn fixture(spec: &FixtureSpec) -> Result<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vocab = FIXTURE_WORDS.iter().map(|w| w.to_string()).chain(std::iter::once(".".to_string()));
    let table = gaussian_table(vocab, spec.embedding_dim, &mut rng);

    let mut docs = Vec::new();
    for t in 0..spec.topics {
        for i in 0..spec.docs_per_topic {
            docs.push(Document::new(format!("t{t}d{i:02}"), text(&mut rng), format!("topic-{t}"), Source::StyleCorpus));
        }
    }
    let counts: Vec<f64> = docs.iter().map(|d| d.tokens().iter().filter(|t| crate::text::is_word(t)).count() as f64).collect();
    let (m, sd) = (mean(&counts), crate::math::sample_variance(&counts).sqrt());
    let z: Vec<f64> = counts.iter().map(|c| (c - m) / sd).collect();

    let mut judgments = Vec::with_capacity(spec.pairs);
    for p in 0..spec.pairs {
        let t = p % spec.topics;
        let base = t * spec.docs_per_topic;
        let i = base + rng.random_range(0..spec.docs_per_topic);
        let mut j = base + rng.random_range(0..spec.docs_per_topic - 1);
        if j >= i {
            j += 1;
        }
        let first_wins = rng.random::<f64>() < sigmoid(spec.length_effect * (z[j] - z[i]));
        let (a, b) = if first_wins { (i, j) } else { (j, i) };
        judgments.push(PairJudgment {
            pair_id: format!("p{p:04}"),
            a_id: docs[a].id.clone(),
            b_id: docs[b].id.clone(),
            topic: format!("topic-{t}"),
            tie: false,
        });
    }

    let mut corpus = Corpus::from_documents(docs)?;
    let seqs = corpus.documents().iter().map(|d| embed(d, &table)).collect();
    corpus.attach_embeddings(seqs)?;
    corpus.attach_judgments(JudgmentSet::new(judgments))?;

    let ext_docs: Vec<Document> = (0..spec.external_docs)
        .map(|i| Document::new(format!("ext{i:03}"), text(&mut rng), "", Source::ExternalCorpus))
        .collect();
    let mut external = Corpus::from_documents(ext_docs)?;
    let seqs = external.documents().iter().map(|d| embed(d, &table)).collect();
    external.attach_embeddings(seqs)?;
    Ok(Fixture { corpus, external })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskConfig {
    pub pairs: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Maximum-likelihood epochs producing the shared starting model.
    pub base_epochs: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta: f64,
    pub max_tokens: usize,
    /// Generations sampled from each model for the tests.
    pub samples: usize,
    pub length_weight: f64,
    pub circuitousness_weight: f64,
    pub seed: u64,
}

impl Default for DeskConfig {
    fn default() -> Self {
        DeskConfig {
            pairs: 60,
            min_len: 3,
            max_len: 14,
            base_epochs: 30,
            epochs: 30,
            learning_rate: 0.3,
            beta: 0.5,
            max_tokens: 30,
            samples: 1000,
            length_weight: -0.15,
            circuitousness_weight: -1.0,
            seed: 0,
        }
    }
}

/// Welch comparison of one generated feature between two models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureShift {
    pub feature: String,
    pub model_mean: f64,
    pub reference_mean: f64,
    pub test: TTest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeskReport {
    /// Styled model (SD loss, `β > 0`) against the `β = 0` control.
    pub treatment: Vec<FeatureShift>,
    /// `β = 0` control against the shared starting model.
    pub control: Vec<FeatureShift>,
    pub treatment_curve: Vec<EpochLosses>,
    pub control_curve: Vec<EpochLosses>,
}

impl DeskReport {
    pub fn shift<'a>(rows: &'a [FeatureShift], feature: &str) -> Option<&'a FeatureShift> {
        rows.iter().find(|r| r.feature == feature)
    }
}

/// The featurizer and discriminator of the desk experiment.
pub fn desk_style(config: &DeskConfig) -> Result<(TokenFeaturizer, Ranker)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let table = gaussian_table(DESK_WORDS.iter().map(|w| w.to_string()), 2, &mut rng);
    let featurizer = TokenFeaturizer::new(FeatureRegistry::new(["length", "circuitousness"])?)?.with_token_vectors(table);
    let ranker = Ranker::new(
        vec!["length".into(), "circuitousness".into()],
        vec![config.length_weight, config.circuitousness_weight],
    )?;
    Ok((featurizer, ranker))
}

/// Independent preferred/unpreferred sequences of uniform length and tokens.
pub fn desk_pairs(config: &DeskConfig) -> Vec<TrainingPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(2);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<&str> {
        let n = rng.random_range(config.min_len..=config.max_len);
        (0..n).map(|_| *DESK_WORDS.choose(rng).unwrap()).collect()
    };
    (0..config.pairs)
        .map(|_| {
            let s = draw(&mut rng);
            let ns = draw(&mut rng);
            TrainingPair::from_words(&[], &s, &ns)
        })
        .collect()
}

fn sample_features(lm: &ToyLM, featurizer: &dyn TextFeaturizer, config: &DeskConfig, stream: u64) -> Result<[Vec<f64>; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let (mut length, mut circ) = (Vec::new(), Vec::new());
    for _ in 0..config.samples {
        let y = lm.sample(&[], config.max_tokens, &mut rng);
        let fv = featurizer.featurize(&lm.detokenize(&y))?;
        length.push(fv.get("length").unwrap_or(0.0));
        circ.push(fv.get("circuitousness").unwrap_or(1.0));
    }
    Ok([length, circ])
}

fn shifts(model: &[Vec<f64>; 2], reference: &[Vec<f64>; 2]) -> Result<Vec<FeatureShift>> {
    ["length", "circuitousness"]
        .iter()
        .zip(model.iter().zip(reference))
        .map(|(name, (m, r))| {
            Ok(FeatureShift { feature: name.to_string(), model_mean: mean(m), reference_mean: mean(r), test: welch_t_test(m, r)? })
        })
        .collect()
}

/// Trains a shared starting model by maximum likelihood, then continues it
/// once with the SD loss at `config.beta` and once with `β = 0`, and compares
/// sampled generations.
pub fn desk_experiment(config: &DeskConfig) -> Result<DeskReport> {
    let (featurizer, ranker) = desk_style(config)?;
    let pairs = desk_pairs(config);
    let mut fills = std::collections::BTreeMap::new();
    fills.insert("circuitousness".to_string(), 1.0);
    let infusion = |beta: f64, epochs: usize, seed: u64| InfusionConfig {
        loss_mode: LossMode::Sd,
        beta,
        learning_rate: config.learning_rate,
        epochs,
        max_tokens: config.max_tokens,
        seed,
        fill_missing: fills.clone(),
        ..InfusionConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lm = ToyLM::new(DESK_WORDS, 1, 4, &mut rng)?;
    let base = train(lm, &pairs, &ranker, &featurizer, &infusion(0.0, config.base_epochs, config.seed))?.lm;
    let styled = train(base.clone(), &pairs, &ranker, &featurizer, &infusion(config.beta, config.epochs, config.seed + 1))?;
    let control = train(base.clone(), &pairs, &ranker, &featurizer, &infusion(0.0, config.epochs, config.seed + 1))?;

    let base_f = sample_features(&base, &featurizer, config, 10)?;
    let styled_f = sample_features(&styled.lm, &featurizer, config, 11)?;
    let control_f = sample_features(&control.lm, &featurizer, config, 12)?;
    Ok(DeskReport {
        treatment: shifts(&styled_f, &control_f)?,
        control: shifts(&control_f, &base_f)?,
        treatment_curve: styled.curve,
        control_curve: control.curve,
    })
}
