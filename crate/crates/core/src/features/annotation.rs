//! Features derived from token annotations (POS, morphology, dependencies,
//! entities). Rates are normalized by the token count, punctuation included.

use crate::corpus::{AnnotatedSentence, AnnotatedToken};

pub const POS_RATES: &[(&str, &str)] = &[
    ("noun_rate", "NOUN"),
    ("verb_rate", "VERB"),
    ("adjective_rate", "ADJ"),
    ("adposition_rate", "ADP"),
    ("adverb_rate", "ADV"),
    ("auxiliary_rate", "AUX"),
    ("conjunction_rate", "CCONJ"),
    ("determiner_rate", "DET"),
    ("interjection_rate", "INTJ"),
    ("numeral_rate", "NUM"),
    ("particle_rate", "PART"),
    ("pronoun_rate", "PRON"),
    ("proper_noun_rate", "PROPN"),
    ("punctuation_rate", "PUNCT"),
    ("subordinating_conjunction_rate", "SCONJ"),
    ("symbol_rate", "SYM"),
];

pub const NER_TAGS: &[&str] = &[
    "PERSON", "NORP", "FAC", "ORG", "GPE", "LOC", "PRODUCT", "EVENT", "WORK_OF_ART", "LAW", "LANGUAGE", "DATE",
    "TIME", "PERCENT", "MONEY", "QUANTITY", "ORDINAL", "CARDINAL",
];

/// Annotation-derived feature names other than the POS and NER rates.
pub const OTHER_FEATURES: &[&str] = &[
    "demonstrative_rate",
    "possessive_rate",
    "noun_verb_ratio",
    "pronoun_noun_ratio",
    "closed_class_rate",
    "open_class_rate",
    "past_ratio",
    "present_ratio",
    "future_ratio",
    "inflected_verb_ratio",
    "auxiliary_verb_ratio",
    "gerund_ratio",
    "participle_ratio",
    "passive_count",
    "total_dependencies",
    "average_dependencies",
    "total_dependency_distance",
    "average_dependency_distance",
    // Propositional-density approximations; experimental.
    "idea_density",
    "content_density",
    // Only available when the exporter tags tokens (`MTCG=`, `Phon=` in MISC).
    "mtcg_ratio",
    "alliteration",
];

pub fn ner_feature_name(tag: &str) -> String {
    format!("ner_{}_rate", tag.to_lowercase())
}

/// Every annotation-derived feature name in output order.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = POS_RATES.iter().map(|(n, _)| n.to_string()).collect();
    names.extend(OTHER_FEATURES.iter().map(|s| s.to_string()));
    names.extend(NER_TAGS.iter().map(|t| ner_feature_name(t)));
    names
}

const CLOSED: &[&str] = &["ADP", "AUX", "CCONJ", "DET", "NUM", "PART", "PRON", "SCONJ"];
const OPEN: &[&str] = &["ADJ", "ADV", "INTJ", "NOUN", "PROPN", "VERB"];
const PROPOSITIONS: &[&str] = &["VERB", "ADJ", "ADV", "ADP", "CCONJ", "SCONJ"];

fn is_verb(t: &AnnotatedToken) -> bool {
    t.upos == "VERB" || t.upos == "AUX"
}

fn is_past(t: &AnnotatedToken) -> bool {
    t.feat("Tense") == Some("Past") || t.xpos == "VBD"
}

fn is_present(t: &AnnotatedToken) -> bool {
    t.feat("Tense") == Some("Pres") || t.xpos == "VBP" || t.xpos == "VBZ"
}

fn is_future_marker(t: &AnnotatedToken) -> bool {
    t.feat("Tense") == Some("Fut") || (t.xpos == "MD" || t.upos == "AUX") && matches!(t.lemma.to_lowercase().as_str(), "will" | "shall")
}

fn is_demonstrative(t: &AnnotatedToken) -> bool {
    t.feat("PronType") == Some("Dem")
        || (t.upos == "DET" || t.upos == "PRON") && matches!(t.lemma.to_lowercase().as_str(), "this" | "that" | "these" | "those")
}

fn is_possessive(t: &AnnotatedToken) -> bool {
    t.feat("Poss") == Some("Yes") || t.xpos == "PRP$" || t.xpos == "POS" || t.xpos == "WP$"
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Compute every annotation-derived feature. The result follows
/// [`feature_names`]; `None` marks values that are undefined for this input
/// (no tokens, no verbs, no exporter tags).
pub fn annotation_rates(sentences: &[AnnotatedSentence]) -> Vec<(String, Option<f64>)> {
    let tokens: Vec<&AnnotatedToken> = sentences.iter().flatten().collect();
    let n = tokens.len();
    let count = |pred: &dyn Fn(&AnnotatedToken) -> bool| tokens.iter().filter(|t| pred(t)).count();
    let upos = |tag: &str| count(&|t: &AnnotatedToken| t.upos == tag);

    let mut out: Vec<(String, Option<f64>)> = POS_RATES.iter().map(|(name, tag)| (name.to_string(), ratio(upos(tag), n))).collect();

    let verbs = count(&is_verb);
    let nouns = upos("NOUN");
    let words = n - upos("PUNCT");
    let closed = count(&|t: &AnnotatedToken| CLOSED.contains(&t.upos.as_str()));
    let open = count(&|t: &AnnotatedToken| OPEN.contains(&t.upos.as_str()));
    let passive_heads: std::collections::BTreeSet<(usize, usize)> = sentences
        .iter()
        .enumerate()
        .flat_map(|(s, sent)| {
            sent.iter()
                .filter(|t| matches!(t.deprel.as_str(), "aux:pass" | "nsubj:pass" | "csubj:pass"))
                .map(move |t| (s, t.head))
        })
        .collect();

    let total_deps = sentences.iter().map(|s| s.iter().filter(|t| t.head <= s.len()).count()).sum::<usize>();
    let total_distance: usize = sentences
        .iter()
        .map(|s| s.iter().enumerate().map(|(i, t)| (i + 1).abs_diff(t.head)).sum::<usize>())
        .sum();

    let mtcg_tagged = tokens.iter().any(|t| t.misc_value("MTCG").is_some());
    let phon_tagged = tokens.iter().any(|t| t.misc_value("Phon").is_some());

    let others: Vec<Option<f64>> = vec![
        ratio(count(&is_demonstrative), n),
        ratio(count(&is_possessive), n),
        ratio(nouns, verbs),
        ratio(upos("PRON"), nouns),
        ratio(closed, n),
        ratio(open, n),
        ratio(count(&|t: &AnnotatedToken| is_verb(t) && is_past(t)), verbs),
        ratio(count(&|t: &AnnotatedToken| is_verb(t) && is_present(t)), verbs),
        ratio(count(&is_future_marker), verbs),
        ratio(count(&|t: &AnnotatedToken| t.upos == "VERB" && t.surface.to_lowercase() != t.lemma.to_lowercase()), upos("VERB")),
        ratio(upos("AUX"), verbs),
        ratio(count(&|t: &AnnotatedToken| is_verb(t) && (t.feat("VerbForm") == Some("Ger") || t.xpos == "VBG")), verbs),
        ratio(count(&|t: &AnnotatedToken| is_verb(t) && (t.feat("VerbForm") == Some("Part") || t.xpos == "VBN")), verbs),
        (n > 0).then_some(passive_heads.len() as f64),
        (n > 0).then_some(total_deps as f64),
        ratio(total_deps, sentences.len()),
        (n > 0).then_some(total_distance as f64),
        ratio(total_distance, total_deps),
        ratio(count(&|t: &AnnotatedToken| PROPOSITIONS.contains(&t.upos.as_str())), words),
        ratio(open, closed),
        if mtcg_tagged {
            ratio(count(&|t: &AnnotatedToken| t.misc_value("MTCG").is_some_and(|v| v != "None")), words)
        } else {
            None
        },
        if phon_tagged { alliteration(&tokens) } else { None },
    ];
    out.extend(OTHER_FEATURES.iter().map(|s| s.to_string()).zip(others));
    out.extend(NER_TAGS.iter().map(|tag| (ner_feature_name(tag), ratio(count(&|t: &AnnotatedToken| t.ner.as_deref() == Some(*tag)), n))));
    out
}

/// Share of adjacent word pairs whose first phonemes agree.
fn alliteration(tokens: &[&AnnotatedToken]) -> Option<f64> {
    let phones: Vec<&str> = tokens
        .iter()
        .filter(|t| t.upos != "PUNCT")
        .filter_map(|t| t.misc_value("Phon"))
        .filter_map(|p| p.split([' ', '.']).next())
        .collect();
    let pairs = phones.len().checked_sub(1)?;
    ratio(phones.windows(2).filter(|w| w[0] == w[1]).count(), pairs)
}
