//! ROUGE overlap, Welch t-tests on feature shifts, significance buckets and
//! the γ-weighted agreement score.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::bayes::CorrelationResult;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::math::{mean, sample_variance};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeComponent {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when the hypothesis had no units to count.
    pub empty_hypothesis: bool,
}

impl RougeComponent {
    fn from_counts(overlap: usize, hyp: usize, reference: usize) -> Self {
        if hyp == 0 {
            return RougeComponent { empty_hypothesis: true, ..Default::default() };
        }
        let precision = overlap as f64 / hyp as f64;
        let recall = if reference == 0 { 0.0 } else { overlap as f64 / reference as f64 };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        RougeComponent { precision, recall, f1, empty_hypothesis: false }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScores {
    pub rouge1: RougeComponent,
    pub rouge2: RougeComponent,
    pub rouge_l: RougeComponent,
}

fn ngrams<'a>(tokens: &'a [String], n: usize) -> HashMap<&'a [String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap.
pub fn rouge_n(reference: &[String], hypothesis: &[String], n: usize) -> RougeComponent {
    assert!(n >= 1, "ROUGE-n needs n >= 1");
    let r = ngrams(reference, n);
    let h = ngrams(hypothesis, n);
    let overlap = h.iter().map(|(g, c)| (*c).min(r.get(g).copied().unwrap_or(0))).sum();
    RougeComponent::from_counts(overlap, h.values().sum(), r.values().sum())
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Longest-common-subsequence overlap.
pub fn rouge_l(reference: &[String], hypothesis: &[String]) -> RougeComponent {
    RougeComponent::from_counts(lcs_len(reference, hypothesis), hypothesis.len(), reference.len())
}

/// ROUGE-1/2/L on lowercased word and punctuation tokens.
pub fn rouge(reference: &str, hypothesis: &str) -> RougeScores {
    let r = crate::text::normalize_tokens(reference);
    let h = crate::text::normalize_tokens(hypothesis);
    RougeScores { rouge1: rouge_n(&r, &h, 1), rouge2: rouge_n(&r, &h, 2), rouge_l: rouge_l(&r, &h) }
}

/// Mean of each component over (reference, hypothesis) pairs.
pub fn rouge_mean(pairs: &[(String, String)]) -> RougeScores {
    let all: Vec<RougeScores> = pairs.iter().map(|(r, h)| rouge(r, h)).collect();
    let avg = |get: fn(&RougeScores) -> RougeComponent| {
        let n = all.len().max(1) as f64;
        RougeComponent {
            precision: all.iter().map(|s| get(s).precision).sum::<f64>() / n,
            recall: all.iter().map(|s| get(s).recall).sum::<f64>() / n,
            f1: all.iter().map(|s| get(s).f1).sum::<f64>() / n,
            empty_hypothesis: all.iter().any(|s| get(s).empty_hypothesis),
        }
    };
    RougeScores { rouge1: avg(|s| s.rouge1), rouge2: avg(|s| s.rouge2), rouge_l: avg(|s| s.rouge_l) }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
    /// Both samples had zero variance.
    pub degenerate: bool,
}

/// Welch's unequal-variance t-test, two-sided.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Degenerate(format!("t-test needs two values per sample, got {} and {}", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-test sample".into()));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a) / a.len() as f64, sample_variance(b) / b.len() as f64);
    let se2 = va + vb;
    if se2 == 0.0 {
        let differ = ma != mb;
        let t = if differ { (ma - mb).signum() * f64::INFINITY } else { 0.0 };
        let df = (a.len() + b.len() - 2) as f64;
        return Ok(TTest { t, p: if differ { 0.0 } else { 1.0 }, df, degenerate: true });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    let p = beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0);
    Ok(TTest { t, p, df, degenerate: false })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bucket {
    #[serde(rename = "ns")]
    NotSignificant,
    #[serde(rename = "p<0.05")]
    P05,
    #[serde(rename = "p<0.01")]
    P01,
    #[serde(rename = "p<0.001")]
    P001,
    #[serde(rename = "p<0.0001")]
    P0001,
}

impl Bucket {
    pub fn of(p: f64) -> Bucket {
        match p {
            p if p < 1e-4 => Bucket::P0001,
            p if p < 1e-3 => Bucket::P001,
            p if p < 1e-2 => Bucket::P01,
            p if p < 0.05 => Bucket::P05,
            _ => Bucket::NotSignificant,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Bucket::NotSignificant => "ns",
            Bucket::P05 => "p<0.05",
            Bucket::P01 => "p<0.01",
            Bucket::P001 => "p<0.001",
            Bucket::P0001 => "p<0.0001",
        }
    }

    pub fn stars(self) -> &'static str {
        ["", "*", "**", "***", "****"][self as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub feature: String,
    pub baseline_mean: f64,
    pub model_mean: f64,
    pub t: f64,
    pub p: f64,
    pub df: f64,
    pub bucket: Bucket,
    pub degenerate: bool,
    /// Corpus effect used for the direction check.
    pub gamma: Option<f64>,
    /// Defined only when the γ interval excludes 0.
    pub direction_correct: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub rows: Vec<SignificanceRow>,
}

fn present(matrix: &FeatureMatrix, name: &str) -> Result<Vec<f64>> {
    Ok(matrix.column(name)?.into_iter().flatten().collect())
}

/// Welch test per feature between baseline and model generations. Features
/// come from `correlations`, or from the baseline matrix when none are given.
pub fn significance_report(
    baseline: &FeatureMatrix,
    model: &FeatureMatrix,
    correlations: &[CorrelationResult],
) -> Result<SignificanceReport> {
    let features: Vec<String> = if correlations.is_empty() {
        baseline.names().to_vec()
    } else {
        correlations.iter().map(|c| c.feature.clone()).collect()
    };
    let by_name: HashMap<&str, &CorrelationResult> = correlations.iter().map(|c| (c.feature.as_str(), c)).collect();
    let mut rows = Vec::with_capacity(features.len());
    for f in features {
        let (a, b) = (present(baseline, &f)?, present(model, &f)?);
        let test = welch_t_test(&b, &a)?;
        let (baseline_mean, model_mean) = (mean(&a), mean(&b));
        let effect = by_name.get(f.as_str()).map(|c| c.effect());
        let direction_correct = effect
            .filter(|s| s.excludes_zero())
            .map(|s| (model_mean - baseline_mean).signum() == s.mean.signum() && model_mean != baseline_mean);
        rows.push(SignificanceRow {
            feature: f,
            baseline_mean,
            model_mean,
            t: test.t,
            p: test.p,
            df: test.df,
            bucket: Bucket::of(test.p),
            degenerate: test.degenerate,
            gamma: effect.map(|s| s.mean),
            direction_correct,
        });
    }
    Ok(SignificanceReport { rows })
}

/// Agreement of one row: 1 when the shift has the right sign and p < 0.05,
/// 0.5 when the sign is right but not significant, else 0.
pub fn row_agreement(row: &SignificanceRow) -> f64 {
    match row.direction_correct {
        Some(true) if row.p < 0.05 => 1.0,
        Some(true) => 0.5,
        _ => 0.0,
    }
}

/// `100 · Σ |γ_f| a_f / Σ |γ_f|` over features whose γ interval excludes 0.
pub fn agreement_score(report: &SignificanceReport, correlations: &[CorrelationResult]) -> Result<f64> {
    let rows: HashMap<&str, &SignificanceRow> = report.rows.iter().map(|r| (r.feature.as_str(), r)).collect();
    let (mut num, mut den, mut shared) = (0.0, 0.0, 0);
    for c in correlations {
        let Some(row) = rows.get(c.feature.as_str()) else { continue };
        shared += 1;
        let g = c.effect();
        if !g.excludes_zero() {
            continue;
        }
        num += g.mean.abs() * row_agreement(row);
        den += g.mean.abs();
    }
    if shared == 0 {
        return Err(Error::EmptySplit("report and correlations share no features".into()));
    }
    if den == 0.0 {
        return Err(Error::Degenerate("no shared feature has a γ interval excluding 0".into()));
    }
    Ok(100.0 * num / den)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("writing report: {e}"))
}

pub fn write_significance_csv<W: Write>(report: &SignificanceReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["feature", "baseline_mean", "model_mean", "t", "p", "df", "bucket", "gamma", "direction_correct"])
        .map_err(csv_err)?;
    for r in &report.rows {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let dir = r.direction_correct.map(|d| d.to_string()).unwrap_or_default();
        out.write_record([
            r.feature.clone(),
            format!("{:.6}", r.baseline_mean),
            format!("{:.6}", r.model_mean),
            format!("{:.6}", r.t),
            format!("{:.6e}", r.p),
            format!("{:.3}", r.df),
            r.bucket.label().to_string(),
            opt(r.gamma),
            dir,
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Config(format!("writing report: {e}")))
}

/// Feature-shift table: one row per feature, stars for the p bucket and a
/// check or cross for the direction.
pub fn significance_markdown(report: &SignificanceReport) -> String {
    let mut s = String::from("| Feature | Baseline | Model | p | Direction |\n|---|---:|---:|:---:|:---:|\n");
    for r in &report.rows {
        let dir = match r.direction_correct {
            Some(true) => "✓",
            Some(false) => "✗",
            None => "–",
        };
        let sig = if r.bucket == Bucket::NotSignificant { "ns" } else { r.bucket.stars() };
        let _ = writeln!(s, "| {} | {:.3} | {:.3} | {} | {} |", r.feature, r.baseline_mean, r.model_mean, sig, dir);
    }
    s
}

/// ROUGE table, one row per named system (F1 values).
pub fn rouge_markdown(rows: &[(String, RougeScores)]) -> String {
    let mut s = String::from("| Model | ROUGE-1 | ROUGE-2 | ROUGE-L |\n|---|---:|---:|---:|\n");
    for (name, r) in rows {
        let _ = writeln!(s, "| {name} | {:.4} | {:.4} | {:.4} |", r.rouge1.f1, r.rouge2.f1, r.rouge_l.f1);
    }
    s
}

/// Agreement table, one row per named system.
pub fn agreement_markdown(rows: &[(String, f64)]) -> String {
    let mut s = String::from("| Model | Agreement (%) |\n|---|---:|\n");
    for (name, score) in rows {
        let _ = writeln!(s, "| {name} | {score:.2} |");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn rouge_hand_count() {
        let r = rouge_n(&toks("the cat sat"), &toks("the cat"), 1);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.precision, 1.0);
        assert!((r.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn rouge_identity_and_disjoint() {
        let s = rouge("The cat sat on the mat.", "the cat sat on the mat .");
        assert_eq!((s.rouge1.f1, s.rouge2.f1, s.rouge_l.f1), (1.0, 1.0, 1.0));
        let d = rouge("a b c", "x y z");
        assert_eq!((d.rouge1.f1, d.rouge2.f1, d.rouge_l.f1), (0.0, 0.0, 0.0));
        let e = rouge("a b", "");
        assert!(e.rouge1.empty_hypothesis && e.rouge1.f1 == 0.0);
    }

    #[test]
    fn clipping_limits_repeated_tokens() {
        let r = rouge_n(&toks("the cat"), &toks("the the the"), 1);
        assert!((r.precision - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn welch_examples() {
        let same = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((same.t, same.p), (0.0, 1.0));
        let t = welch_t_test(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((t.t + 1.0954).abs() < 1e-4);
        assert!((t.df - 6.0).abs() < 1e-12);
        assert!((t.p - 0.3153).abs() < 1e-4);
    }

    #[test]
    fn welch_zero_variance_cases() {
        let eq = welch_t_test(&[2.0, 2.0], &[2.0, 2.0]).unwrap();
        assert!(eq.degenerate && eq.p == 1.0 && eq.t == 0.0);
        let ne = welch_t_test(&[2.0, 2.0], &[3.0, 3.0]).unwrap();
        assert!(ne.degenerate && ne.p == 0.0);
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn buckets_follow_p() {
        assert_eq!(Bucket::of(0.2), Bucket::NotSignificant);
        assert_eq!(Bucket::of(0.05), Bucket::NotSignificant);
        assert_eq!(Bucket::of(0.049), Bucket::P05);
        assert_eq!(Bucket::of(0.009), Bucket::P01);
        assert_eq!(Bucket::of(0.0009), Bucket::P001);
        assert_eq!(Bucket::of(0.00009), Bucket::P0001);
    }
}
