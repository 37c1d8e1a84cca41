//! Documents, pairwise judgments, token annotations and embedding sequences.
//!
//! Everything is exchanged through flat files:
//!
//! * `documents.jsonl`: one `{id, text, topic, source}` record per line,
//!   optionally with pre-split `sentences`.
//! * `judgments.jsonl`: `{pair_id, a_id, b_id, topic, tie}` where `a_id` is
//!   the text that shows the style more strongly.
//! * `annotations.conllu`: standard CoNLL-U, bound to documents with a
//!   `# doc_id = <id>` sentence comment.
//! * `embeddings.tsv`: a `#dim <D> #unit <token|sentence>` header followed by
//!   `<doc_id>\t<idx>\t<f1>\t...\t<fD>` rows.
//!
//! A loaded [`Corpus`] is never mutated by downstream stages and can be shared
//! freely across threads.

mod conllu;
mod embeddings;

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;

pub use conllu::{parse_conllu, write_conllu, AnnotatedSentence, AnnotatedToken};
pub use embeddings::{parse_embeddings, write_embeddings, EmbeddingSequence, EmbeddingUnit};

pub const DOCUMENTS_FILE: &str = "documents.jsonl";
pub const JUDGMENTS_FILE: &str = "judgments.jsonl";
pub const ANNOTATIONS_FILE: &str = "annotations.conllu";
pub const EMBEDDINGS_FILE: &str = "embeddings.tsv";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    #[default]
    StyleCorpus,
    ExternalCorpus,
    Generated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub topic: String,
    #[serde(default)]
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentences: Option<Vec<Vec<String>>>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, topic: impl Into<String>, source: Source) -> Self {
        Document { id: id.into(), text: text.into(), topic: topic.into(), source, sentences: None }
    }

    /// Sentences as stored, or produced by the rule-based splitter.
    pub fn sentences(&self) -> Cow<'_, [Vec<String>]> {
        match &self.sentences {
            Some(s) => Cow::Borrowed(s.as_slice()),
            None => Cow::Owned(text::split_sentences(&self.text)),
        }
    }

    /// All tokens in reading order.
    pub fn tokens(&self) -> Vec<String> {
        self.sentences().iter().flatten().cloned().collect()
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty document id".into());
        }
        if let Some(sentences) = &self.sentences {
            let joined: String = sentences.iter().flatten().flat_map(|t| t.chars()).filter(|c| !c.is_whitespace()).collect();
            let plain: String = self.text.chars().filter(|c| !c.is_whitespace()).collect();
            if joined != plain {
                return Err(format!("sentences of `{}` do not concatenate to its text", self.id));
            }
        }
        Ok(())
    }
}

/// One audience comparison. `a_id` shows the style at least as strongly as
/// `b_id`; `tie` marks the "equally" case.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairJudgment {
    pub pair_id: String,
    pub a_id: String,
    pub b_id: String,
    #[serde(default)]
    pub topic: String,
    #[serde(default)]
    pub tie: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JudgmentSet {
    pub judgments: Vec<PairJudgment>,
}

impl JudgmentSet {
    pub fn new(judgments: Vec<PairJudgment>) -> Self {
        JudgmentSet { judgments }
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PairJudgment> {
        self.judgments.iter()
    }

    pub fn topics(&self) -> BTreeSet<String> {
        self.judgments.iter().map(|j| j.topic.clone()).collect()
    }

    /// Judgments with the tie flag cleared.
    pub fn decisive(&self) -> JudgmentSet {
        JudgmentSet::new(self.judgments.iter().filter(|j| !j.tie).cloned().collect())
    }

    pub fn tie_count(&self) -> usize {
        self.judgments.iter().filter(|j| j.tie).count()
    }

    pub fn parse<R: BufRead>(reader: R, path: &Path) -> Result<JudgmentSet> {
        let mut judgments = Vec::new();
        let mut seen = HashSet::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let j: PairJudgment =
                serde_json::from_str(&line).map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
            if j.a_id == j.b_id {
                return Err(Error::SelfPair(j.pair_id));
            }
            if !seen.insert(j.pair_id.clone()) {
                return Err(Error::DuplicateId(j.pair_id));
            }
            judgments.push(j);
        }
        Ok(JudgmentSet { judgments })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_jsonl(path, &self.judgments)
    }
}

impl<'a> IntoIterator for &'a JudgmentSet {
    type Item = &'a PairJudgment;
    type IntoIter = std::slice::Iter<'a, PairJudgment>;
    fn into_iter(self) -> Self::IntoIter {
        self.judgments.iter()
    }
}

impl FromIterator<PairJudgment> for JudgmentSet {
    fn from_iter<T: IntoIterator<Item = PairJudgment>>(iter: T) -> Self {
        JudgmentSet::new(iter.into_iter().collect())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    index: HashMap<String, usize>,
    judgments: JudgmentSet,
    annotations: BTreeMap<String, Vec<AnnotatedSentence>>,
    embeddings: BTreeMap<String, EmbeddingSequence>,
    embedding_dim: Option<usize>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.documents == other.documents
            && self.judgments == other.judgments
            && self.annotations == other.annotations
            && self.embeddings == other.embeddings
    }
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_documents(documents: impl IntoIterator<Item = Document>) -> Result<Corpus> {
        let mut corpus = Corpus::new();
        for doc in documents {
            corpus.add_document(doc)?;
        }
        Ok(corpus)
    }

    pub fn add_document(&mut self, doc: Document) -> Result<()> {
        doc.check().map_err(Error::Degenerate)?;
        if self.index.contains_key(&doc.id) {
            return Err(Error::DuplicateId(doc.id));
        }
        self.index.insert(doc.id.clone(), self.documents.len());
        self.documents.push(doc);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.index.get(id).map(|&i| &self.documents[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn judgments(&self) -> &JudgmentSet {
        &self.judgments
    }

    pub fn annotations(&self, id: &str) -> Option<&[AnnotatedSentence]> {
        self.annotations.get(id).map(Vec::as_slice)
    }

    pub fn has_annotations(&self) -> bool {
        !self.annotations.is_empty()
    }

    pub fn embeddings(&self, id: &str) -> Option<&EmbeddingSequence> {
        self.embeddings.get(id)
    }

    pub fn embedding_dim(&self) -> Option<usize> {
        self.embedding_dim
    }

    pub fn topics(&self) -> BTreeSet<String> {
        self.documents.iter().map(|d| d.topic.clone()).filter(|t| !t.is_empty()).collect()
    }

    /// Validate a judgment against the loaded documents.
    pub fn check_judgment(&self, j: &PairJudgment) -> Result<()> {
        if j.a_id == j.b_id {
            return Err(Error::SelfPair(j.pair_id.clone()));
        }
        for id in [&j.a_id, &j.b_id] {
            let doc = self.document(id).ok_or_else(|| Error::DanglingId(id.clone()))?;
            // Generated and external texts legitimately inherit a style topic.
            if doc.source == Source::StyleCorpus && !doc.topic.is_empty() && !j.topic.is_empty() && doc.topic != j.topic {
                return Err(Error::TopicMismatch {
                    pair_id: j.pair_id.clone(),
                    topic: j.topic.clone(),
                    doc_id: doc.id.clone(),
                    doc_topic: doc.topic.clone(),
                });
            }
        }
        Ok(())
    }

    /// Validate and attach judgments, returning the attached set.
    pub fn attach_judgments(&mut self, set: JudgmentSet) -> Result<JudgmentSet> {
        let mut seen: HashSet<&str> = self.judgments.iter().map(|j| j.pair_id.as_str()).collect();
        for j in &set {
            self.check_judgment(j)?;
            if !seen.insert(&j.pair_id) {
                return Err(Error::DuplicateId(j.pair_id.clone()));
            }
        }
        self.judgments.judgments.extend(set.judgments.iter().cloned());
        Ok(set)
    }

    pub fn attach_annotations(&mut self, annotations: BTreeMap<String, Vec<AnnotatedSentence>>) -> Result<usize> {
        let mut count = 0;
        for (id, sentences) in &annotations {
            if !self.contains(id) {
                return Err(Error::DanglingId(id.clone()));
            }
            count += sentences.len();
        }
        for (id, sentences) in annotations {
            self.annotations.entry(id).or_default().extend(sentences);
        }
        Ok(count)
    }

    pub fn attach_embeddings(&mut self, sequences: Vec<EmbeddingSequence>) -> Result<usize> {
        let mut dim = self.embedding_dim;
        for seq in &sequences {
            if !self.contains(&seq.doc_id) {
                return Err(Error::DanglingId(seq.doc_id.clone()));
            }
            seq.check()?;
            let d = seq.dimension();
            match dim {
                Some(expected) if expected != d => {
                    return Err(Error::DimensionMismatch { context: format!("embeddings of `{}`", seq.doc_id), expected, found: d })
                }
                _ => dim = Some(d),
            }
        }
        self.embedding_dim = dim;
        let n = sequences.len();
        for seq in sequences {
            self.embeddings.insert(seq.doc_id.clone(), seq);
        }
        Ok(n)
    }

    /// Combine two corpora with disjoint document and pair ids.
    pub fn merge(&self, other: &Corpus) -> Result<Corpus> {
        let mut merged = self.clone();
        for doc in other.documents() {
            merged.add_document(doc.clone())?;
        }
        merged.attach_annotations(other.annotations.clone())?;
        merged.attach_embeddings(other.embeddings.values().cloned().collect())?;
        merged.attach_judgments(other.judgments.clone())?;
        Ok(merged)
    }

    pub fn parse_documents<R: BufRead>(reader: R, path: &Path) -> Result<Corpus> {
        let mut corpus = Corpus::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: Document = serde_json::from_str(&line).map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
            match corpus.add_document(doc) {
                Err(Error::Degenerate(msg)) => return Err(Error::parse(path, n + 1, msg)),
                other => other?,
            }
        }
        Ok(corpus)
    }

    pub fn load_documents(path: impl AsRef<Path>) -> Result<Corpus> {
        let path = path.as_ref();
        Corpus::parse_documents(open(path)?, path)
    }

    pub fn load_judgments(&mut self, path: impl AsRef<Path>) -> Result<JudgmentSet> {
        let path = path.as_ref();
        let set = JudgmentSet::parse(open(path)?, path)?;
        self.attach_judgments(set)
    }

    pub fn load_annotations(&mut self, path: impl AsRef<Path>) -> Result<usize> {
        let path = path.as_ref();
        let parsed = parse_conllu(open(path)?, path)?;
        self.attach_annotations(parsed)
    }

    pub fn load_embeddings(&mut self, path: impl AsRef<Path>) -> Result<usize> {
        let path = path.as_ref();
        let parsed = parse_embeddings(open(path)?, path)?;
        self.attach_embeddings(parsed)
    }

    pub fn save_documents(&self, path: impl AsRef<Path>) -> Result<()> {
        write_jsonl(path.as_ref(), &self.documents)
    }

    pub fn save_annotations(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = create(path)?;
        write_conllu(&mut w, &self.annotations).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn save_embeddings(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = create(path)?;
        let seqs: Vec<&EmbeddingSequence> = self.embeddings.values().collect();
        write_embeddings(&mut w, &seqs).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Write every populated component under `dir` with the standard names.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.save_documents(dir.join(DOCUMENTS_FILE))?;
        self.judgments.save(&dir.join(JUDGMENTS_FILE))?;
        if !self.annotations.is_empty() {
            self.save_annotations(dir.join(ANNOTATIONS_FILE))?;
        }
        if !self.embeddings.is_empty() {
            self.save_embeddings(dir.join(EMBEDDINGS_FILE))?;
        }
        Ok(())
    }

    /// Load whatever standard files exist under `dir`; documents are required.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Corpus> {
        let dir = dir.as_ref();
        let mut corpus = Corpus::load_documents(dir.join(DOCUMENTS_FILE))?;
        let annotations = dir.join(ANNOTATIONS_FILE);
        if annotations.exists() {
            corpus.load_annotations(&annotations)?;
        }
        let embeddings = dir.join(EMBEDDINGS_FILE);
        if embeddings.exists() {
            corpus.load_embeddings(&embeddings)?;
        }
        let judgments = dir.join(JUDGMENTS_FILE);
        if judgments.exists() {
            corpus.load_judgments(&judgments)?;
        }
        Ok(corpus)
    }
}

/// Partition judgments by topic: judgments on a held-out topic go to the test
/// split, all others to train. Ties follow their topic like any judgment.
pub fn split_holdout_topics(judgments: &JudgmentSet, holdout: &BTreeSet<String>) -> Result<(JudgmentSet, JudgmentSet)> {
    let topics = judgments.topics();
    if let Some(unknown) = holdout.iter().find(|t| !topics.contains(*t)) {
        return Err(Error::UnknownTopic(unknown.clone()));
    }
    let (test, train): (Vec<_>, Vec<_>) = judgments.iter().cloned().partition(|j| holdout.contains(&j.topic));
    if train.is_empty() {
        return Err(Error::EmptySplit("every topic is held out; nothing left to train on".into()));
    }
    Ok((JudgmentSet::new(train), JudgmentSet::new(test)))
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
