//! Linguistic feature registry, per-document extraction and standardized
//! feature matrices.
//!
//! Features come from three sources, recorded per value as a
//! [`Provenance`]: the raw text ([`FeatureKind::Native`]), CoNLL-U
//! annotations, and embedding trajectories. A feature whose source is absent
//! is *missing*, never zero.

pub mod annotation;
pub mod lexical;
pub mod path;
pub mod readability;
pub mod syllables;
pub mod trajectory;
pub mod wordlists;

mod matrix;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, EmbeddingUnit};
use crate::error::{Error, Result};
use crate::text::is_word;

pub use lexical::{lexical_diversity, LexicalDiversity};
pub use matrix::{ColumnStats, FeatureMatrix};
pub use path::{shortest_hamiltonian_path, HamiltonianPath};
pub use readability::{readability, Readability};
pub use syllables::count_syllables;
pub use trajectory::{trajectory_features, Trajectory};

pub const NATIVE_FEATURES: &[&str] = &[
    "length",
    "word_count",
    "sentence_count",
    "average_word_length",
    "average_syllables",
    "flesch",
    "flesch_kincaid",
    "gunning_fog",
    "smog",
    "dale_chall",
    "ttr",
    "honore",
    "brunet",
    "jargon_ratio",
    "misspelling_ratio",
];

pub const EMBEDDING_FEATURES: &[&str] = &["speed", "volume", "circuitousness"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Native,
    Annotation,
    Embedding,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Native,
    AnnotationDerived,
    EmbeddingDerived,
    Missing,
}

impl From<FeatureKind> for Provenance {
    fn from(kind: FeatureKind) -> Self {
        match kind {
            FeatureKind::Native => Provenance::Native,
            FeatureKind::Annotation => Provenance::AnnotationDerived,
            FeatureKind::Embedding => Provenance::EmbeddingDerived,
        }
    }
}

/// Source of a supported feature, or `None` for unknown names.
pub fn feature_kind(name: &str) -> Option<FeatureKind> {
    if NATIVE_FEATURES.contains(&name) {
        Some(FeatureKind::Native)
    } else if EMBEDDING_FEATURES.contains(&name) {
        Some(FeatureKind::Embedding)
    } else if annotation::feature_names().iter().any(|n| n == name) {
        Some(FeatureKind::Annotation)
    } else {
        None
    }
}

/// An ordered selection of supported feature names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRegistry {
    names: Vec<String>,
}

impl FeatureRegistry {
    pub fn new<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut out: Vec<String> = Vec::new();
        for name in names {
            let name = name.as_ref();
            if feature_kind(name).is_none() {
                return Err(Error::UnsupportedFeature(name.to_string()));
            }
            if !out.iter().any(|n| n == name) {
                out.push(name.to_string());
            }
        }
        Ok(FeatureRegistry { names: out })
    }

    /// Every supported feature.
    pub fn all() -> Self {
        let mut names: Vec<String> = NATIVE_FEATURES.iter().map(|s| s.to_string()).collect();
        names.extend(annotation::feature_names());
        names.extend(EMBEDDING_FEATURES.iter().map(|s| s.to_string()));
        FeatureRegistry { names }
    }

    pub fn native() -> Self {
        FeatureRegistry { names: NATIVE_FEATURES.iter().map(|s| s.to_string()).collect() }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    fn needs(&self, kind: FeatureKind) -> bool {
        self.names.iter().any(|n| feature_kind(n) == Some(kind))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureValue {
    pub value: Option<f64>,
    pub provenance: Provenance,
}

/// Named feature values in registry order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    entries: Vec<(String, FeatureValue)>,
}

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert or replace a value. Non-finite values are stored as missing.
    pub fn set(&mut self, name: &str, value: Option<f64>, kind: FeatureKind) {
        let value = value.filter(|v| v.is_finite());
        let provenance = if value.is_some() { kind.into() } else { Provenance::Missing };
        let fv = FeatureValue { value, provenance };
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some(e) => e.1 = fv,
            None => self.entries.push((name.to_string(), fv)),
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entry(name).and_then(|v| v.value)
    }

    pub fn entry(&self, name: &str) -> Option<&FeatureValue> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &FeatureValue)> {
        self.entries.iter().map(|(n, v)| (n.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Values for `names` in order; errors on the first missing one.
    pub fn dense(&self, names: &[String]) -> Result<Vec<f64>> {
        names.iter().map(|n| self.get(n).ok_or_else(|| Error::MissingFeature(n.clone()))).collect()
    }
}

fn native_features(doc: &Document, out: &mut FeatureVector, registry: &FeatureRegistry) {
    let sentences = doc.sentences();
    let words: Vec<&String> = sentences.iter().flatten().filter(|t| is_word(t)).collect();
    let nw = words.len();
    let read = readability(&sentences).ok();
    let lex = lexical_diversity(&words).ok();
    let letter_words: Vec<&&String> = words.iter().filter(|w| w.chars().all(|c| c.is_alphabetic() || c == '\'' || c == '’' || c == '-')).collect();
    let share = |list: &std::collections::HashSet<&'static str>| -> Option<f64> {
        (!letter_words.is_empty())
            .then(|| letter_words.iter().filter(|w| !wordlists::known(list, w)).count() as f64 / letter_words.len() as f64)
    };
    let per_word = |total: usize| (nw > 0).then(|| total as f64 / nw as f64);

    for name in registry.names() {
        let value = match name.as_str() {
            "length" => Some(doc.text.chars().count() as f64),
            "word_count" => Some(nw as f64),
            "sentence_count" => Some(sentences.iter().filter(|s| s.iter().any(|t| is_word(t))).count() as f64),
            "average_word_length" => per_word(words.iter().map(|w| w.chars().count()).sum()),
            "average_syllables" => per_word(words.iter().map(|w| count_syllables(w)).sum()),
            "flesch" => read.map(|r| r.flesch),
            "flesch_kincaid" => read.map(|r| r.flesch_kincaid),
            "gunning_fog" => read.map(|r| r.gunning_fog),
            "smog" => read.map(|r| r.smog),
            "dale_chall" => read.map(|r| r.dale_chall),
            "ttr" => lex.map(|l| l.ttr),
            "honore" => lex.and_then(|l| l.honore),
            "brunet" => lex.map(|l| l.brunet),
            "jargon_ratio" => share(&wordlists::FREQUENT_WORDS),
            "misspelling_ratio" => share(&wordlists::DICTIONARY),
            _ => continue,
        };
        out.set(name, value, FeatureKind::Native);
    }
}

fn embedding_features(vectors: Option<&[Vec<f64>]>, out: &mut FeatureVector, registry: &FeatureRegistry) {
    let traj = vectors.and_then(|v| trajectory_features(v).ok());
    for name in registry.names() {
        let value = match name.as_str() {
            "speed" => traj.map(|t| t.speed),
            "volume" => traj.map(|t| t.volume),
            "circuitousness" => traj.and_then(|t| t.circuitousness),
            _ => continue,
        };
        out.set(name, value, FeatureKind::Embedding);
    }
}

/// Features of one corpus document, in registry order.
pub fn extract_features(doc: &Document, corpus: &Corpus, registry: &FeatureRegistry) -> FeatureVector {
    let mut raw = FeatureVector::new();
    if registry.needs(FeatureKind::Native) {
        native_features(doc, &mut raw, registry);
    }
    if registry.needs(FeatureKind::Annotation) {
        let rates: HashMap<String, Option<f64>> =
            corpus.annotations(&doc.id).map(|s| annotation::annotation_rates(s).into_iter().collect()).unwrap_or_default();
        for name in registry.names().iter().filter(|n| feature_kind(n) == Some(FeatureKind::Annotation)) {
            raw.set(name, rates.get(name).copied().flatten(), FeatureKind::Annotation);
        }
    }
    if registry.needs(FeatureKind::Embedding) {
        embedding_features(corpus.embeddings(&doc.id).map(|e| e.vectors.as_slice()), &mut raw, registry);
    }
    // Reorder to match the registry.
    let mut out = FeatureVector::new();
    for name in registry.names() {
        let kind = feature_kind(name).expect("registry holds supported names");
        out.set(name, raw.get(name), kind);
    }
    out
}

/// Feature matrix over every corpus document, in corpus order.
pub fn build_matrix(corpus: &Corpus, registry: &FeatureRegistry, standardize: bool) -> Result<FeatureMatrix> {
    let rows: Vec<Vec<Option<f64>>> = corpus
        .documents()
        .par_iter()
        .map(|doc| {
            let fv = extract_features(doc, corpus, registry);
            registry.names().iter().map(|n| fv.get(n)).collect()
        })
        .collect();
    let ids = corpus.documents().iter().map(|d| d.id.clone()).collect();
    let matrix = FeatureMatrix::new(ids, registry.names().to_vec(), rows)?;
    if standardize {
        matrix.standardize()
    } else {
        Ok(matrix)
    }
}

/// Per-token vectors recovered from token-unit corpus embeddings, keyed by
/// lowercased token; the first occurrence wins. `None` when the corpus has
/// no token-unit embeddings.
pub fn token_table(corpus: &Corpus) -> Option<HashMap<String, Vec<f64>>> {
    let mut table = HashMap::new();
    for doc in corpus.documents() {
        let Some(seq) = corpus.embeddings(&doc.id).filter(|e| e.unit == EmbeddingUnit::Token) else { continue };
        for (token, v) in doc.tokens().iter().zip(&seq.vectors) {
            table.entry(token.to_lowercase()).or_insert_with(|| v.clone());
        }
    }
    (!table.is_empty()).then_some(table)
}

/// Turns a bare token sequence (e.g. a generation) into features.
pub trait TextFeaturizer: Send + Sync {
    fn featurize(&self, tokens: &[String]) -> Result<FeatureVector>;
}

/// Native features from the token text, plus trajectory features when a
/// per-token embedding table is supplied.
#[derive(Clone, Debug)]
pub struct TokenFeaturizer {
    pub registry: FeatureRegistry,
    pub token_vectors: Option<HashMap<String, Vec<f64>>>,
}

impl TokenFeaturizer {
    pub fn new(registry: FeatureRegistry) -> Result<Self> {
        if registry.needs(FeatureKind::Annotation) {
            let name = registry.names().iter().find(|n| feature_kind(n) == Some(FeatureKind::Annotation)).unwrap();
            return Err(Error::UnsupportedFeature(format!("{name} (needs annotations, unavailable for generated text)")));
        }
        Ok(TokenFeaturizer { registry, token_vectors: None })
    }

    pub fn with_token_vectors(mut self, table: HashMap<String, Vec<f64>>) -> Self {
        self.token_vectors = Some(table);
        self
    }
}

impl TextFeaturizer for TokenFeaturizer {
    fn featurize(&self, tokens: &[String]) -> Result<FeatureVector> {
        let text = tokens.join(" ");
        let mut doc = Document::new("generated", text, "", crate::corpus::Source::Generated);
        doc.sentences = Some(crate::text::split_sentences(&doc.text));
        let mut corpus = Corpus::new();
        corpus.add_document(doc.clone())?;
        if self.registry.needs(FeatureKind::Embedding) {
            let table = self
                .token_vectors
                .as_ref()
                .ok_or_else(|| Error::MissingFeature("token embedding table for trajectory features".into()))?;
            let vectors: Vec<Vec<f64>> = tokens.iter().filter_map(|t| table.get(t).cloned()).collect();
            if !vectors.is_empty() {
                corpus.attach_embeddings(vec![crate::corpus::EmbeddingSequence::new("generated", EmbeddingUnit::Token, vectors)])?;
            }
        }
        Ok(extract_features(&doc, &corpus, &self.registry))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AnnotatedToken, EmbeddingSequence, Source};

    fn corpus() -> Corpus {
        let mut c = Corpus::from_documents([
            Document::new("a", "abc", "t", Source::StyleCorpus),
            Document::new("b", "The cat sat. The dog ran far away!", "t", Source::StyleCorpus),
        ])
        .unwrap();
        c.attach_annotations(
            [("a".to_string(), vec![vec![AnnotatedToken::new("abc", "abc", "NOUN", 0, "root")]])].into_iter().collect(),
        )
        .unwrap();
        c.attach_embeddings(vec![EmbeddingSequence::new("b", EmbeddingUnit::Token, vec![vec![0.0, 0.0], vec![3.0, 4.0]])]).unwrap();
        c
    }

    #[test]
    fn registry_rejects_unknown_names() {
        assert!(matches!(FeatureRegistry::new(["length", "sparkle"]), Err(Error::UnsupportedFeature(n)) if n == "sparkle"));
        assert_eq!(FeatureRegistry::all().len(), NATIVE_FEATURES.len() + annotation::feature_names().len() + 3);
    }

    #[test]
    fn provenance_and_missing() {
        let c = corpus();
        let reg = FeatureRegistry::new(["length", "noun_rate", "speed", "circuitousness"]).unwrap();
        let a = extract_features(c.document("a").unwrap(), &c, &reg);
        assert_eq!(a.get("length"), Some(3.0));
        assert_eq!(a.entry("noun_rate").unwrap().provenance, Provenance::AnnotationDerived);
        assert_eq!(a.entry("speed").unwrap().provenance, Provenance::Missing);
        let b = extract_features(c.document("b").unwrap(), &c, &reg);
        assert_eq!(b.get("noun_rate"), None);
        assert_eq!(b.get("speed"), Some(2.5));
        assert_eq!(b.entry("circuitousness").unwrap().provenance, Provenance::Missing);
        assert_eq!(a.names().collect::<Vec<_>>(), reg.names());
    }

    #[test]
    fn extraction_is_deterministic() {
        let c = corpus();
        let reg = FeatureRegistry::all();
        let d = c.document("b").unwrap();
        let x = extract_features(d, &c, &reg);
        let y = extract_features(d, &c, &reg);
        for ((_, a), (_, b)) in x.iter().zip(y.iter()) {
            assert_eq!(a.value.map(f64::to_bits), b.value.map(f64::to_bits));
        }
    }

    #[test]
    fn token_featurizer_uses_table() {
        let table: HashMap<String, Vec<f64>> =
            [("a".to_string(), vec![0.0, 0.0]), ("b".to_string(), vec![2.0, 0.0]), ("c".to_string(), vec![1.0, 0.0])].into();
        let f = TokenFeaturizer::new(FeatureRegistry::new(["length", "circuitousness"]).unwrap()).unwrap().with_token_vectors(table);
        let fv = f.featurize(&["a".into(), "b".into(), "c".into()]).unwrap();
        assert_eq!(fv.get("length"), Some(5.0));
        assert_eq!(fv.get("circuitousness"), Some(1.5));
        assert!(TokenFeaturizer::new(FeatureRegistry::new(["noun_rate"]).unwrap()).is_err());
    }
}
