use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One syntactic word from a CoNLL-U file.
///
/// `head` is 1-based within the sentence, 0 marks the root. `ner` is read from
/// (and written to) the `NER=` entry of the MISC column; `misc` keeps the
/// remaining MISC entries verbatim.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedToken {
    pub surface: String,
    pub lemma: String,
    pub upos: String,
    #[serde(default)]
    pub xpos: String,
    #[serde(default)]
    pub feats: String,
    pub head: usize,
    pub deprel: String,
    #[serde(default)]
    pub ner: Option<String>,
    #[serde(default)]
    pub misc: String,
}

impl AnnotatedToken {
    pub fn new(surface: &str, lemma: &str, upos: &str, head: usize, deprel: &str) -> Self {
        AnnotatedToken {
            surface: surface.into(),
            lemma: lemma.into(),
            upos: upos.into(),
            xpos: String::new(),
            feats: String::new(),
            head,
            deprel: deprel.into(),
            ner: None,
            misc: String::new(),
        }
    }

    /// Value of a morphological feature such as `Tense`.
    pub fn feat(&self, key: &str) -> Option<&str> {
        pairs(&self.feats).find(|(k, _)| *k == key).map(|(_, v)| v)
    }

    /// Value of a MISC entry other than `NER`.
    pub fn misc_value(&self, key: &str) -> Option<&str> {
        pairs(&self.misc).find(|(k, _)| *k == key).map(|(_, v)| v)
    }
}

fn pairs(field: &str) -> impl Iterator<Item = (&str, &str)> {
    field.split('|').filter_map(|kv| kv.split_once('='))
}

pub type AnnotatedSentence = Vec<AnnotatedToken>;

fn underscore_empty(s: &str) -> String {
    if s == "_" {
        String::new()
    } else {
        s.to_string()
    }
}

fn or_underscore(s: &str) -> &str {
    if s.is_empty() {
        "_"
    } else {
        s
    }
}

/// Check the tree invariants of one sentence: every head within
/// `[0, len]` and exactly one root.
pub fn check_sentence(sentence: &[AnnotatedToken]) -> std::result::Result<(), String> {
    let n = sentence.len();
    if n == 0 {
        return Err("empty sentence".into());
    }
    if let Some(t) = sentence.iter().find(|t| t.head > n) {
        return Err(format!("head {} of `{}` is outside the sentence ({} tokens)", t.head, t.surface, n));
    }
    let roots = sentence.iter().filter(|t| t.head == 0).count();
    if roots != 1 {
        return Err(format!("sentence has {roots} roots, expected exactly one"));
    }
    Ok(())
}

/// Parse CoNLL-U into per-document sentence lists.
///
/// A sentence is bound to the document named by its `# doc_id = <id>`
/// comment; sentences without one continue the previous document.
/// Multi-word token ranges and empty nodes are skipped.
pub fn parse_conllu<R: BufRead>(reader: R, path: &Path) -> Result<BTreeMap<String, Vec<AnnotatedSentence>>> {
    let mut out: BTreeMap<String, Vec<AnnotatedSentence>> = BTreeMap::new();
    let mut doc_id: Option<String> = None;
    let mut sentence: AnnotatedSentence = Vec::new();
    let mut sentence_start = 0usize;

    let flush = |out: &mut BTreeMap<String, Vec<AnnotatedSentence>>,
                 sentence: &mut AnnotatedSentence,
                 doc_id: &Option<String>,
                 line: usize|
     -> Result<()> {
        if sentence.is_empty() {
            return Ok(());
        }
        check_sentence(sentence).map_err(|m| Error::parse(path, line, m))?;
        let id = doc_id.clone().ok_or_else(|| Error::parse(path, line, "sentence without a `# doc_id` comment"))?;
        out.entry(id).or_default().push(std::mem::take(sentence));
        Ok(())
    };

    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = n + 1;
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            flush(&mut out, &mut sentence, &doc_id, sentence_start)?;
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "doc_id" {
                    flush(&mut out, &mut sentence, &doc_id, sentence_start)?;
                    doc_id = Some(value.trim().to_string());
                }
            }
            continue;
        }
        let cols: Vec<&str> = trimmed.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(path, lineno, format!("expected 10 tab-separated columns, found {}", cols.len())));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let index: usize = cols[0].parse().map_err(|_| Error::parse(path, lineno, format!("bad token id `{}`", cols[0])))?;
        if sentence.is_empty() {
            sentence_start = lineno;
        }
        if index != sentence.len() + 1 {
            return Err(Error::parse(path, lineno, format!("token id {index} out of sequence")));
        }
        let head: usize = cols[6].parse().map_err(|_| Error::parse(path, lineno, format!("bad head `{}`", cols[6])))?;
        let mut ner = None;
        let mut misc = Vec::new();
        for entry in cols[9].split('|').filter(|e| *e != "_" && !e.is_empty()) {
            match entry.strip_prefix("NER=") {
                Some(tag) if !tag.is_empty() && tag != "O" => ner = Some(tag.to_string()),
                Some(_) => {}
                None => misc.push(entry),
            }
        }
        sentence.push(AnnotatedToken {
            surface: cols[1].to_string(),
            lemma: underscore_empty(cols[2]),
            upos: underscore_empty(cols[3]),
            xpos: underscore_empty(cols[4]),
            feats: underscore_empty(cols[5]),
            head,
            deprel: underscore_empty(cols[7]),
            ner,
            misc: misc.join("|"),
        });
    }
    flush(&mut out, &mut sentence, &doc_id, sentence_start)?;
    Ok(out)
}

pub fn write_conllu<W: Write>(w: &mut W, docs: &BTreeMap<String, Vec<AnnotatedSentence>>) -> std::io::Result<()> {
    for (id, sentences) in docs {
        for sentence in sentences {
            writeln!(w, "# doc_id = {id}")?;
            for (i, t) in sentence.iter().enumerate() {
                let mut misc: Vec<String> = t.misc.split('|').filter(|e| !e.is_empty()).map(str::to_string).collect();
                if let Some(tag) = &t.ner {
                    misc.push(format!("NER={tag}"));
                }
                let misc = misc.join("|");
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t_\t{}",
                    i + 1,
                    t.surface,
                    or_underscore(&t.lemma),
                    or_underscore(&t.upos),
                    or_underscore(&t.xpos),
                    or_underscore(&t.feats),
                    t.head,
                    or_underscore(&t.deprel),
                    or_underscore(&misc)
                )?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}
