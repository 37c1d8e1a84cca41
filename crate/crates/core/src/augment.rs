//! Bootstrapped expansion of a judgment set with external candidates.
//!
//! Each candidate is compared against its `k` most similar style documents;
//! one pair is emitted per neighbour the discriminator says it beats.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_jsonl, Corpus, EmbeddingSequence, JudgmentSet, PairJudgment, Source};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureVector};
use crate::ranker::{Discriminator, TextRef};

/// Sidecar written next to augmented judgments.
pub const PROVENANCE_FILE: &str = "judgments.provenance.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub k: usize,
    pub min_score: f64,
    pub max_new_pairs: Option<usize>,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig { k: 5, min_score: 0.5, max_new_pairs: None, seed: 0 }
    }
}

impl AugmentConfig {
    fn check(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.min_score > 0.0 && self.min_score < 1.0) {
            return Err(Error::Config(format!("min_score must lie in (0, 1), got {}", self.min_score)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: String,
    pub similarity: f64,
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

/// The `k` most cosine-similar pool items, best first, ties by id. Returns
/// fewer than `k` items when the pool is smaller.
pub fn topk_similar(query: &[f64], pool: &[(String, Vec<f64>)], k: usize) -> Result<Vec<Neighbor>> {
    if pool.is_empty() {
        return Err(Error::EmptySplit("similarity pool is empty".into()));
    }
    let mut scored = Vec::with_capacity(pool.len());
    for (id, v) in pool {
        if v.len() != query.len() {
            return Err(Error::DimensionMismatch { context: format!("embedding of `{id}`"), expected: query.len(), found: v.len() });
        }
        scored.push(Neighbor { id: id.clone(), similarity: cosine(query, v) });
    }
    scored.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then_with(|| a.id.cmp(&b.id)));
    scored.truncate(k);
    Ok(scored)
}

/// One vector per document: the mean of its embedding rows.
pub fn document_embedding(seq: &EmbeddingSequence) -> Vec<f64> {
    let mut out = vec![0.0; seq.dimension()];
    for v in &seq.vectors {
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
    }
    let n = seq.vectors.len().max(1) as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairProvenance {
    pub pair_id: String,
    pub candidate_id: String,
    pub neighbor_id: String,
    pub similarity: f64,
    pub score: f64,
    pub source: Source,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub candidates_scanned: usize,
    pub candidates_included: usize,
    pub pairs_added: usize,
    pub per_topic: BTreeMap<String, usize>,
    pub capped: bool,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AugmentResult {
    pub judgments: JudgmentSet,
    pub provenance: Vec<PairProvenance>,
    pub candidates_scanned: usize,
    pub capped: bool,
    pub warnings: Vec<String>,
}

impl AugmentResult {
    /// Writes `judgments.jsonl` and the provenance sidecar into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_jsonl(&dir.join(crate::corpus::JUDGMENTS_FILE), &self.judgments.judgments)?;
        write_jsonl(&dir.join(PROVENANCE_FILE), &self.provenance)
    }
}

fn features_of(matrix: &FeatureMatrix, id: &str) -> Result<FeatureVector> {
    matrix.feature_vector(id).ok_or_else(|| Error::MissingFeature(format!("row for `{id}`")))
}

/// Scans every external document as a candidate. `features` must hold rows
/// for the candidates and the style documents on the discriminator's scale.
pub fn augment_pairs(
    external: &Corpus,
    style: &Corpus,
    features: &FeatureMatrix,
    discriminator: &dyn Discriminator,
    config: &AugmentConfig,
) -> Result<AugmentResult> {
    config.check()?;
    let mut warnings = Vec::new();
    let mut pool = Vec::new();
    for doc in style.documents() {
        let seq = style.embeddings(&doc.id).ok_or_else(|| Error::MissingFeature(format!("embeddings for `{}`", doc.id)))?;
        pool.push((doc.id.clone(), document_embedding(seq)));
    }
    if external.is_empty() {
        return Ok(AugmentResult::default());
    }
    if pool.len() < config.k {
        warnings.push(format!("k = {} exceeds the {} style documents; using all of them", config.k, pool.len()));
    }
    let mut candidates: Vec<&str> = external.documents().iter().map(|d| d.id.as_str()).collect();
    candidates.sort_unstable();

    let per_candidate: Vec<Vec<PairProvenance>> = candidates
        .par_iter()
        .map(|&cid| -> Result<Vec<PairProvenance>> {
            let seq = external.embeddings(cid).ok_or_else(|| Error::MissingFeature(format!("embeddings for `{cid}`")))?;
            let neighbors = topk_similar(&document_embedding(seq), &pool, config.k)?;
            let fc = features_of(features, cid)?;
            let mut out = Vec::new();
            for n in neighbors {
                let fy = features_of(features, &n.id)?;
                let score = discriminator.score(TextRef::new(cid, &fc), TextRef::new(&n.id, &fy))?;
                if score > config.min_score {
                    out.push(PairProvenance {
                        pair_id: format!("aug:{cid}>{}", n.id),
                        candidate_id: cid.to_string(),
                        neighbor_id: n.id,
                        similarity: n.similarity,
                        score,
                        source: Source::Generated,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut provenance: Vec<PairProvenance> = per_candidate.into_iter().flatten().collect();
    let mut capped = false;
    if let Some(cap) = config.max_new_pairs {
        if provenance.len() > cap {
            provenance.truncate(cap);
            capped = true;
        }
    }
    let judgments = provenance
        .iter()
        .map(|p| PairJudgment {
            pair_id: p.pair_id.clone(),
            a_id: p.candidate_id.clone(),
            b_id: p.neighbor_id.clone(),
            topic: style.document(&p.neighbor_id).map(|d| d.topic.clone()).unwrap_or_default(),
            tie: false,
        })
        .collect();
    Ok(AugmentResult { judgments, provenance, candidates_scanned: candidates.len(), capped, warnings })
}

pub fn augment_report(result: &AugmentResult) -> AugmentReport {
    let mut per_topic = BTreeMap::new();
    for j in result.judgments.iter() {
        *per_topic.entry(j.topic.clone()).or_insert(0) += 1;
    }
    let mut included: Vec<&str> = result.provenance.iter().map(|p| p.candidate_id.as_str()).collect();
    included.dedup();
    AugmentReport {
        candidates_scanned: result.candidates_scanned,
        candidates_included: included.len(),
        pairs_added: result.judgments.len(),
        per_topic,
        capped: result.capped,
        warnings: result.warnings.clone(),
    }
}
