use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingUnit {
    Token,
    Sentence,
}

impl EmbeddingUnit {
    fn as_str(self) -> &'static str {
        match self {
            EmbeddingUnit::Token => "token",
            EmbeddingUnit::Sentence => "sentence",
        }
    }
}

/// Ordered embedding vectors for one document (its embedding trajectory).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSequence {
    pub doc_id: String,
    pub unit: EmbeddingUnit,
    pub vectors: Vec<Vec<f64>>,
}

impl EmbeddingSequence {
    pub fn new(doc_id: impl Into<String>, unit: EmbeddingUnit, vectors: Vec<Vec<f64>>) -> Self {
        EmbeddingSequence { doc_id: doc_id.into(), unit, vectors }
    }

    pub fn dimension(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn check(&self) -> Result<()> {
        let d = self.dimension();
        if d == 0 {
            return Err(Error::Degenerate(format!("embeddings of `{}` are empty", self.doc_id)));
        }
        for (i, v) in self.vectors.iter().enumerate() {
            if v.len() != d {
                return Err(Error::DimensionMismatch { context: format!("vector {i} of `{}`", self.doc_id), expected: d, found: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("vector {i} of `{}`", self.doc_id)));
            }
        }
        Ok(())
    }
}

fn parse_header(line: &str) -> Option<(usize, EmbeddingUnit)> {
    let mut dim = None;
    let mut unit = None;
    let mut it = line.split_whitespace();
    while let Some(key) = it.next() {
        match key {
            "#dim" => dim = it.next()?.parse().ok(),
            "#unit" => {
                unit = match it.next()? {
                    "token" => Some(EmbeddingUnit::Token),
                    "sentence" => Some(EmbeddingUnit::Sentence),
                    _ => None,
                }
            }
            _ => return None,
        }
    }
    Some((dim.filter(|d| *d > 0)?, unit?))
}

/// Parse an embedding TSV. Rows may arrive in any order; per document the
/// indices must cover `0..n` exactly once.
pub fn parse_embeddings<R: BufRead>(reader: R, path: &Path) -> Result<Vec<EmbeddingSequence>> {
    let mut lines = reader.lines().enumerate();
    let (dim, unit) = loop {
        match lines.next() {
            None => return Err(Error::parse(path, 1, "missing `#dim <D> #unit <token|sentence>` header")),
            Some((n, line)) => {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                break parse_header(&line).ok_or_else(|| Error::parse(path, n + 1, format!("bad header `{line}`")))?;
            }
        }
    };

    let mut rows: Vec<(String, usize, Vec<f64>, usize)> = Vec::new();
    for (n, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let doc = fields.next().unwrap_or_default().to_string();
        let idx: usize = fields
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::parse(path, lineno, "missing or bad index column"))?;
        let mut values = Vec::with_capacity(dim);
        for field in fields.flat_map(str::split_whitespace) {
            let v: f64 = field.parse().map_err(|_| Error::parse(path, lineno, format!("bad number `{field}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, lineno, format!("non-finite value `{field}` in row {lineno}")));
            }
            values.push(v);
        }
        if values.len() != dim {
            return Err(Error::DimensionMismatch { context: format!("{} line {lineno}", path.display()), expected: dim, found: values.len() });
        }
        rows.push((doc, idx, values, lineno));
    }

    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<EmbeddingSequence> = Vec::new();
    for (doc, idx, values, lineno) in rows {
        if out.last().map_or(true, |s| s.doc_id != doc) {
            out.push(EmbeddingSequence::new(doc, unit, Vec::new()));
        }
        let seq = out.last_mut().expect("just pushed");
        if idx != seq.vectors.len() {
            return Err(Error::parse(path, lineno, format!("index {idx} of `{}` is duplicated or leaves a gap", seq.doc_id)));
        }
        seq.vectors.push(values);
    }
    Ok(out)
}

pub fn write_embeddings<W: Write>(w: &mut W, seqs: &[&EmbeddingSequence]) -> std::io::Result<()> {
    let Some(first) = seqs.first() else {
        return Ok(());
    };
    writeln!(w, "#dim {} #unit {}", first.dimension(), first.unit.as_str())?;
    for seq in seqs {
        for (i, v) in seq.vectors.iter().enumerate() {
            write!(w, "{}\t{}", seq.doc_id, i)?;
            for x in v {
                // `{:?}` prints the shortest representation that parses back bit-exactly.
                write!(w, "\t{x:?}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(s: &str) -> Result<Vec<EmbeddingSequence>> {
        parse_embeddings(Cursor::new(s), Path::new("e.tsv"))
    }

    #[test]
    fn parses_rows_in_any_order() {
        let seqs = parse("#dim 2 #unit sentence\nd\t1\t3 4\nd\t0\t1\t2\n").unwrap();
        assert_eq!(seqs[0].vectors, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(seqs[0].unit, EmbeddingUnit::Sentence);
    }

    #[test]
    fn dimension_mismatch() {
        let err = parse("#dim 4 #unit token\nd\t0\t1 2 3 4\nd\t1\t1 2 3 4 5\n").unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 4, found: 5, .. }));
    }

    #[test]
    fn non_finite_rejected_with_row() {
        let err = parse("#dim 2 #unit token\nd\t0\t1 2\nd\t1\t1 NaN\n").unwrap_err();
        match err {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 3);
                assert!(msg.contains("non-finite"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse("#dim 1 #unit token\nd\t0\tinf\n").is_err());
    }

    #[test]
    fn gaps_and_missing_header() {
        assert!(parse("#dim 1 #unit token\nd\t0\t1\nd\t2\t1\n").is_err());
        assert!(parse("d\t0\t1\n").is_err());
    }

    #[test]
    fn write_then_parse_is_bit_exact() {
        let seq = EmbeddingSequence::new("x", EmbeddingUnit::Token, vec![vec![0.1 + 0.2, -1e-300, 1.0 / 3.0]]);
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &[&seq]).unwrap();
        let back = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, vec![seq]);
    }
}
