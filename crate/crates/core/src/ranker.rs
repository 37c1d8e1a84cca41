//! Pairwise style discriminator over feature vectors.
//!
//! `D(a, b) = sigmoid(w · (f_a − f_b))` with no intercept, so
//! `D(a, b) + D(b, a) = 1` and `a` is preferred iff the score exceeds 0.5.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{JudgmentSet, PairJudgment};
use crate::error::{Error, Result};
use crate::features::{ColumnStats, FeatureMatrix, FeatureVector};
use crate::math::{dot, log_sigmoid, sigmoid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankerConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
    /// Columns to train on; by default every non-constant column that is
    /// present for all judged documents.
    pub features: Option<Vec<String>>,
}

impl Default for RankerConfig {
    fn default() -> Self {
        RankerConfig { learning_rate: 0.5, epochs: 300, l2: 1e-3, seed: 0, features: None }
    }
}

impl RankerConfig {
    fn check(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::Config(format!("l2 must be nonnegative, got {}", self.l2)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranker {
    pub features: Vec<String>,
    pub weights: Vec<f64>,
    /// Standardization of the training columns, for scoring raw vectors.
    #[serde(default)]
    pub stats: Option<Vec<ColumnStats>>,
}

impl Ranker {
    pub fn new(features: Vec<String>, weights: Vec<f64>) -> Result<Ranker> {
        if features.len() != weights.len() {
            return Err(Error::DimensionMismatch { context: "ranker weights".into(), expected: features.len(), found: weights.len() });
        }
        Ok(Ranker { features, weights, stats: None })
    }

    fn dense(&self, fv: &FeatureVector) -> Result<Vec<f64>> {
        fv.dense(&self.features)
    }

    /// Score of a difference vector already aligned to `features`.
    pub fn score_diff(&self, diff: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, diff))
    }

    /// `sigmoid(w · (f_a − f_b))` for vectors on the training scale.
    pub fn score_pair(&self, a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
        let (a, b) = (self.dense(a)?, self.dense(b)?);
        Ok(self.score_diff(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>()))
    }

    /// Applies the stored standardization; identity when none is stored.
    pub fn standardize(&self, fv: &FeatureVector) -> Result<FeatureVector> {
        let Some(stats) = &self.stats else { return Ok(fv.clone()) };
        let mut out = fv.clone();
        for (name, s) in self.features.iter().zip(stats) {
            let entry = fv.entry(name).ok_or_else(|| Error::MissingFeature(name.clone()))?;
            let kind = crate::features::feature_kind(name).unwrap_or(crate::features::FeatureKind::Native);
            out.set(name, entry.value.map(|v| s.apply(v)), kind);
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = crate::corpus::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Ranker> {
        let path = path.as_ref();
        let r: Ranker = serde_json::from_reader(crate::corpus::open(path)?)?;
        if r.features.len() != r.weights.len() {
            return Err(Error::parse(path, 1, "feature and weight counts differ"));
        }
        Ok(r)
    }
}

/// A text as seen by a discriminator.
#[derive(Clone, Copy, Debug)]
pub struct TextRef<'a> {
    pub id: Option<&'a str>,
    pub features: &'a FeatureVector,
}

impl<'a> TextRef<'a> {
    pub fn new(id: &'a str, features: &'a FeatureVector) -> Self {
        TextRef { id: Some(id), features }
    }

    pub fn anonymous(features: &'a FeatureVector) -> Self {
        TextRef { id: None, features }
    }
}

/// Probability that `a` shows the style more strongly than `b`.
pub trait Discriminator: Send + Sync {
    fn score(&self, a: TextRef<'_>, b: TextRef<'_>) -> Result<f64>;
}

impl Discriminator for Ranker {
    fn score(&self, a: TextRef<'_>, b: TextRef<'_>) -> Result<f64> {
        self.score_pair(a.features, b.features)
    }
}

/// A ranker applied to raw (unstandardized) feature vectors, such as those
/// of generated text: both sides go through the stored standardization first.
#[derive(Clone, Copy, Debug)]
pub struct RawScale<'a>(pub &'a Ranker);

impl Discriminator for RawScale<'_> {
    fn score(&self, a: TextRef<'_>, b: TextRef<'_>) -> Result<f64> {
        self.0.score_pair(&self.0.standardize(a.features)?, &self.0.standardize(b.features)?)
    }
}

impl RawScale<'_> {
    /// Raw-scale stand-ins for missing features: the training mean of each
    /// standardized column.
    pub fn mean_fills(&self) -> BTreeMap<String, f64> {
        let Some(stats) = &self.0.stats else { return BTreeMap::new() };
        self.0.features.iter().zip(stats).filter(|(_, s)| !s.constant).map(|(f, s)| (f.clone(), s.mean)).collect()
    }
}

impl<D: Discriminator + ?Sized> Discriminator for &D {
    fn score(&self, a: TextRef<'_>, b: TextRef<'_>) -> Result<f64> {
        (**self).score(a, b)
    }
}

/// Externally computed scores keyed by `(a_id, b_id)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreFile {
    scores: HashMap<(String, String), f64>,
}

impl ScoreFile {
    pub fn parse<R: BufRead>(reader: R, path: &Path) -> Result<ScoreFile> {
        let mut scores = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [a, b, s] = cols[..] else {
                return Err(Error::parse(path, i + 1, "expected `a_id<TAB>b_id<TAB>score`"));
            };
            let s: f64 = s.trim().parse().map_err(|_| Error::parse(path, i + 1, format!("bad score `{s}`")))?;
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::parse(path, i + 1, format!("score {s} outside (0, 1)")));
            }
            if scores.insert((a.to_string(), b.to_string()), s).is_some() {
                return Err(Error::parse(path, i + 1, format!("duplicate pair `{a}`/`{b}`")));
            }
        }
        Ok(ScoreFile { scores })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ScoreFile> {
        let path = path.as_ref();
        Self::parse(std::io::BufReader::new(crate::corpus::open(path)?), path)
    }

    pub fn insert(&mut self, a: &str, b: &str, score: f64) {
        self.scores.insert((a.to_string(), b.to_string()), score);
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Listed score, using `1 − s` for a pair listed in reverse.
    pub fn lookup(&self, a: &str, b: &str) -> Option<f64> {
        let key = (a.to_string(), b.to_string());
        if let Some(&s) = self.scores.get(&key) {
            return Some(s);
        }
        self.scores.get(&(key.1, key.0)).map(|s| 1.0 - s)
    }
}

/// A discriminator whose scores are overridden for listed pairs.
pub struct WithScores<D> {
    pub inner: D,
    pub scores: ScoreFile,
}

impl<D: Discriminator> Discriminator for WithScores<D> {
    fn score(&self, a: TextRef<'_>, b: TextRef<'_>) -> Result<f64> {
        if let (Some(x), Some(y)) = (a.id, b.id) {
            if let Some(s) = self.scores.lookup(x, y) {
                return Ok(s);
            }
        }
        self.inner.score(a, b)
    }
}

/// Penalized mean logistic loss over difference rows (label always 1).
pub fn logistic_loss(w: &[f64], diffs: &[Vec<f64>], l2: f64) -> f64 {
    let n = diffs.len() as f64;
    -diffs.iter().map(|d| log_sigmoid(dot(w, d))).sum::<f64>() / n + 0.5 * l2 * dot(w, w)
}

pub fn logistic_gradient(w: &[f64], diffs: &[Vec<f64>], l2: f64) -> Vec<f64> {
    let n = diffs.len() as f64;
    let mut g: Vec<f64> = w.iter().map(|wi| l2 * wi).collect();
    for d in diffs {
        let r = 1.0 - sigmoid(dot(w, d));
        for (gi, di) in g.iter_mut().zip(d) {
            *gi -= r * di / n;
        }
    }
    g
}

/// Full-batch gradient descent from zero; returns weights and the penalized
/// loss before each epoch plus the final loss.
pub fn fit_weights(diffs: &[Vec<f64>], dim: usize, config: &RankerConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    config.check()?;
    if diffs.is_empty() {
        return Err(Error::EmptySplit("no decisive pairs to train on".into()));
    }
    let mut w = vec![0.0; dim];
    let mut losses = Vec::with_capacity(config.epochs + 1);
    for _ in 0..config.epochs {
        losses.push(logistic_loss(&w, diffs, config.l2));
        let g = logistic_gradient(&w, diffs, config.l2);
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= config.learning_rate * gi;
        }
    }
    losses.push(logistic_loss(&w, diffs, config.l2));
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ranker weights; lower the learning rate".into()));
    }
    Ok((w, losses))
}

fn default_features(judgments: &JudgmentSet, matrix: &FeatureMatrix) -> Vec<String> {
    let rows: Vec<usize> = judgments
        .iter()
        .flat_map(|j| [matrix.row_of(&j.a_id), matrix.row_of(&j.b_id)])
        .flatten()
        .collect();
    let stats = matrix.stats();
    (0..matrix.cols())
        .filter(|&c| !stats.is_some_and(|s| s[c].constant))
        .filter(|&c| rows.iter().all(|&r| matrix.get(r, c).is_some()))
        .map(|c| matrix.names()[c].clone())
        .collect()
}

/// `f_A − f_B` for each decisive judgment with every feature present.
/// Returns the rows and the number of skipped judgments.
pub fn difference_rows(judgments: &JudgmentSet, matrix: &FeatureMatrix, features: &[String]) -> Result<(Vec<Vec<f64>>, usize)> {
    let cols: Vec<usize> = features
        .iter()
        .map(|f| matrix.column_of(f).ok_or_else(|| Error::MissingFeature(f.clone())))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut skipped = 0;
    for j in judgments.iter().filter(|j| !j.tie) {
        match pair_diff(j, matrix, &cols) {
            Some(d) => rows.push(d),
            None => skipped += 1,
        }
    }
    Ok((rows, skipped))
}

fn pair_diff(j: &PairJudgment, matrix: &FeatureMatrix, cols: &[usize]) -> Option<Vec<f64>> {
    let (ra, rb) = (matrix.row_of(&j.a_id)?, matrix.row_of(&j.b_id)?);
    cols.iter().map(|&c| Some(matrix.get(ra, c)? - matrix.get(rb, c)?)).collect()
}

pub fn train_ranker(train: &JudgmentSet, matrix: &FeatureMatrix, config: &RankerConfig) -> Result<Ranker> {
    config.check()?;
    if !matrix.is_standardized() {
        return Err(Error::Config("the feature matrix must be standardized".into()));
    }
    let decisive = train.decisive();
    if decisive.is_empty() {
        return Err(Error::EmptySplit("no non-tied pairs to train on".into()));
    }
    let features = config.features.clone().unwrap_or_else(|| default_features(&decisive, matrix));
    if features.is_empty() {
        return Err(Error::Degenerate("no usable features for the ranker".into()));
    }
    let (diffs, _) = difference_rows(&decisive, matrix, &features)?;
    let (weights, _) = fit_weights(&diffs, features.len(), config)?;
    let stats = matrix.stats().map(|all| {
        features.iter().map(|f| all[matrix.column_of(f).expect("checked above")]).collect()
    });
    Ok(Ranker { features, weights, stats })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub accuracy: f64,
    pub pairs: usize,
    /// Pairs scored exactly 0.5, resolved in favour of `a`.
    pub ties_at_half: usize,
    pub tie_rate: f64,
    /// Judgments without complete features for the ranker.
    pub skipped: usize,
}

impl Accuracy {
    pub fn tie_warning(&self) -> Option<String> {
        (self.ties_at_half > 0).then(|| {
            format!("{} of {} pairs scored exactly 0.5 and were resolved towards a", self.ties_at_half, self.pairs)
        })
    }
}

/// Fraction of decisive judgments where the ranker prefers the annotated winner.
pub fn evaluate_holdout(ranker: &Ranker, test: &JudgmentSet, matrix: &FeatureMatrix) -> Result<Accuracy> {
    let (diffs, skipped) = difference_rows(test, matrix, &ranker.features)?;
    if diffs.is_empty() {
        return Err(Error::EmptySplit("no scorable pairs in the evaluation set".into()));
    }
    let mut correct = 0;
    let mut ties = 0;
    for d in &diffs {
        let s = ranker.score_diff(d);
        if s == 0.5 {
            ties += 1;
        }
        if s >= 0.5 {
            correct += 1;
        }
    }
    let n = diffs.len();
    Ok(Accuracy {
        accuracy: correct as f64 / n as f64,
        pairs: n,
        ties_at_half: ties,
        tie_rate: ties as f64 / n as f64,
        skipped,
    })
}

/// Splits decisive judgments into `k` folds stratified by topic: each topic is
/// shuffled and dealt round-robin, continuing where the previous topic left off.
pub fn stratified_folds(judgments: &JudgmentSet, k: usize, seed: u64) -> Result<Vec<JudgmentSet>> {
    if k < 2 {
        return Err(Error::Config(format!("cross-validation needs k >= 2, got {k}")));
    }
    let mut by_topic: BTreeMap<&str, Vec<&PairJudgment>> = BTreeMap::new();
    for j in judgments.iter().filter(|j| !j.tie) {
        by_topic.entry(&j.topic).or_default().push(j);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for (_, mut js) in by_topic {
        js.shuffle(&mut rng);
        for j in js {
            folds[next % k].push(j.clone());
            next += 1;
        }
    }
    if let Some(i) = folds.iter().position(Vec::is_empty) {
        return Err(Error::EmptySplit(format!("fold {i} has no pairs")));
    }
    Ok(folds.into_iter().map(JudgmentSet::new).collect())
}

/// Per-fold held-out accuracy.
pub fn cross_validate(judgments: &JudgmentSet, matrix: &FeatureMatrix, k: usize, config: &RankerConfig) -> Result<Vec<Accuracy>> {
    let folds = stratified_folds(judgments, k, config.seed)?;
    (0..k)
        .map(|i| {
            let train: JudgmentSet =
                folds.iter().enumerate().filter(|(f, _)| *f != i).flat_map(|(_, s)| s.iter().cloned()).collect();
            let ranker = train_ranker(&train, matrix, config)?;
            evaluate_holdout(&ranker, &folds[i], matrix)
        })
        .collect()
}
