//! The nine pipeline stages. Stages talk to each other only through files in
//! the run directory; each one checks its inputs before touching its output
//! directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use styleinfuse::augment::{augment_pairs, augment_report, AugmentReport};
use styleinfuse::bayes::{fit_feature_correlation, write_correlations_csv, write_forest_svg, CorrelationResult};
use styleinfuse::eval::{
    agreement_markdown, agreement_score, rouge_markdown, rouge_mean, significance_markdown, significance_report,
    write_significance_csv, RougeScores,
};
use styleinfuse::features::{build_matrix, token_table, FeatureRegistry, TextFeaturizer, TokenFeaturizer};
use styleinfuse::infuse::{self, GenerationRecord, InfusionConfig, LossMode, ToyLM};
use styleinfuse::ranker::{cross_validate, train_ranker, Accuracy, RawScale};
use styleinfuse::{Corpus, Error, FeatureMatrix, JudgmentSet, Ranker};

use crate::config::{textual, RunConfig, Strategy};
use crate::manifest::{hash_relative, hash_tree, sha256_bytes, FileHash, Manifest, StageRecord};

pub const STAGES: [&str; 9] =
    ["ingest", "features", "fit-bayes", "train-ranker", "augment", "train-infuse", "generate", "evaluate", "report"];

#[derive(Debug)]
pub enum CliError {
    /// An input the stage depends on does not exist.
    Missing { artifact: String, path: PathBuf },
    Failed(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Failed(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub struct Run {
    pub dir: PathBuf,
    pub config: RunConfig,
    /// Relative corpus paths are resolved against this directory.
    pub base: PathBuf,
}

impl Run {
    fn config_hash(&self) -> anyhow::Result<String> {
        Ok(sha256_bytes(&serde_json::to_vec(&self.config)?))
    }
}

struct Stage<'a> {
    run: &'a Run,
    name: &'static str,
    inputs: Vec<FileHash>,
    out: Option<PathBuf>,
}

impl<'a> Stage<'a> {
    fn path(&self, rel: &str) -> PathBuf {
        self.run.dir.join(rel)
    }

    fn record(&mut self, path: &Path) -> anyhow::Result<()> {
        if path.is_dir() {
            self.inputs.extend(hash_tree(path, &self.run.dir)?);
        } else {
            self.inputs.push(hash_relative(path, &self.run.dir)?);
        }
        Ok(())
    }

    /// A file or directory produced by an earlier stage.
    fn need(&mut self, artifact: &str, rel: &str) -> Result<PathBuf> {
        let path = self.path(rel);
        if !path.exists() {
            return Err(CliError::Missing { artifact: artifact.into(), path });
        }
        self.record(&path)?;
        Ok(path)
    }

    fn optional(&mut self, rel: &str) -> anyhow::Result<Option<PathBuf>> {
        let path = self.path(rel);
        if !path.exists() {
            return Ok(None);
        }
        self.record(&path)?;
        Ok(Some(path))
    }

    /// The stage's output directory, emptied on first use.
    fn out(&mut self) -> anyhow::Result<PathBuf> {
        if let Some(out) = &self.out {
            return Ok(out.clone());
        }
        let out = self.path(self.name);
        if out.exists() {
            fs::remove_dir_all(&out).with_context(|| format!("clearing {}", out.display()))?;
        }
        fs::create_dir_all(&out)?;
        self.out = Some(out.clone());
        Ok(out)
    }

    fn style(&mut self) -> Result<Corpus> {
        let dir = self.need("ingest", "ingest/style")?;
        Ok(Corpus::load_dir(dir)?)
    }

    fn external(&mut self) -> Result<Option<Corpus>> {
        Ok(match self.optional("ingest/external")? {
            Some(dir) => Some(Corpus::load_dir(dir)?),
            None => None,
        })
    }

    /// The feature matrix, standardized over every ingested document.
    fn matrix(&mut self) -> Result<FeatureMatrix> {
        let path = self.need("features", "features/features.csv")?;
        let raw = FeatureMatrix::read_csv(fs::File::open(&path)?)?;
        Ok(raw.standardize()?)
    }

    fn ranker(&mut self) -> Result<Ranker> {
        Ok(Ranker::load(self.need("ranker", "train-ranker/ranker.json")?)?)
    }

    fn correlations(&mut self) -> Result<Correlations> {
        let path = self.need("correlations", "fit-bayes/correlations.json")?;
        Ok(read_json(&path)?)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

#[derive(Debug, Serialize, Deserialize)]
struct Correlations {
    results: Vec<CorrelationResult>,
    skipped: Vec<Skipped>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Skipped {
    feature: String,
    reason: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct IngestSummary {
    documents: usize,
    judgments: usize,
    ties: usize,
    topics: Vec<String>,
    external_documents: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Evaluation {
    rouge: BTreeMap<String, RougeScores>,
    /// Absent when no fitted feature has an interval excluding 0.
    agreement: Option<f64>,
    generations: usize,
    skipped_features: Vec<Skipped>,
}

const MODEL: &str = "styled";
const BASELINE: &str = "baseline";

/// Runs one stage and records it in the manifest.
pub fn execute(run: &Run, name: &str) -> Result<String> {
    let name = STAGES.iter().find(|s| **s == name).copied().ok_or_else(|| anyhow!("unknown stage `{name}`"))?;
    let mut stage = Stage { run, name, inputs: Vec::new(), out: None };
    let summary = match name {
        "ingest" => ingest(&mut stage)?,
        "features" => features(&mut stage)?,
        "fit-bayes" => fit_bayes(&mut stage)?,
        "train-ranker" => train_ranker_stage(&mut stage)?,
        "augment" => augment(&mut stage)?,
        "train-infuse" => train_infuse(&mut stage)?,
        "generate" => generate(&mut stage)?,
        "evaluate" => evaluate(&mut stage)?,
        "report" => report(&mut stage)?,
        _ => unreachable!(),
    };
    let out = stage.out()?;
    let mut manifest = Manifest::load_or_default(&run.dir)?;
    manifest.versions = BTreeMap::from([
        ("styleinfuse".to_string(), styleinfuse::VERSION.to_string()),
        ("styleinfuse-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ]);
    let mut inputs = stage.inputs;
    inputs.sort_by(|a, b| a.path.cmp(&b.path));
    inputs.dedup();
    manifest.stages.insert(
        name.to_string(),
        StageRecord { config_hash: run.config_hash()?, seed: run.config.seed, inputs, outputs: hash_tree(&out, &run.dir)? },
    );
    manifest.save(&run.dir)?;
    Ok(summary)
}

fn corpus_input(stage: &mut Stage, artifact: &str, configured: &Path) -> Result<Corpus> {
    let dir = stage.run.base.join(configured);
    if !dir.join(styleinfuse::corpus::DOCUMENTS_FILE).exists() {
        return Err(CliError::Missing { artifact: artifact.into(), path: dir.join(styleinfuse::corpus::DOCUMENTS_FILE) });
    }
    let corpus = Corpus::load_dir(&dir)?;
    // Outside inputs are listed by their configured path.
    let mut names: Vec<String> = fs::read_dir(&dir)?.filter_map(|e| e.ok()).map(|e| e.file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    for file in names {
        if [
            styleinfuse::corpus::DOCUMENTS_FILE,
            styleinfuse::corpus::JUDGMENTS_FILE,
            styleinfuse::corpus::ANNOTATIONS_FILE,
            styleinfuse::corpus::EMBEDDINGS_FILE,
        ]
        .contains(&file.as_str())
        {
            let label = configured.join(&file).components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            stage.inputs.push(FileHash { path: label, sha256: crate::manifest::sha256_file(&dir.join(&file))? });
        }
    }
    Ok(corpus)
}

fn ingest(stage: &mut Stage) -> Result<String> {
    let paths = stage.run.config.corpus.clone();
    let style_path = paths.style.ok_or_else(|| CliError::Missing { artifact: "corpus".into(), path: PathBuf::from("[corpus] style") })?;
    let style = corpus_input(stage, "corpus", &style_path)?;
    if style.judgments().is_empty() {
        return Err(anyhow!("the style corpus at {} has no judgments", style_path.display()).into());
    }
    let external = match &paths.external {
        Some(p) => Some(corpus_input(stage, "external corpus", p)?),
        None => None,
    };
    let out = stage.out()?;
    style.save_dir(out.join("style"))?;
    if let Some(ext) = &external {
        ext.save_dir(out.join("external"))?;
    }
    let summary = IngestSummary {
        documents: style.len(),
        judgments: style.judgments().len(),
        ties: style.judgments().tie_count(),
        topics: style.topics().into_iter().collect(),
        external_documents: external.as_ref().map_or(0, Corpus::len),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(format!(
        "{} documents, {} judgments ({} ties) over {} topics; {} external documents",
        summary.documents,
        summary.judgments,
        summary.ties,
        summary.topics.len(),
        summary.external_documents
    ))
}

fn features(stage: &mut Stage) -> Result<String> {
    let style = stage.style()?;
    let external = stage.external()?;
    let merged = match &external {
        Some(ext) => style.merge(ext)?,
        None => style,
    };
    let registry = FeatureRegistry::new(&stage.run.config.features.names)?;
    let matrix = build_matrix(&merged, &registry, false)?;
    let out = stage.out()?;
    matrix.write_csv(create(&out.join("features.csv"))?)?;
    Ok(format!("{} features over {} documents", matrix.cols(), matrix.rows()))
}

fn fit_bayes(stage: &mut Stage) -> Result<String> {
    let style = stage.style()?;
    let matrix = stage.matrix()?;
    let config = stage.run.config.bayes_config();
    let names = stage.run.config.bayes.features.clone().unwrap_or_else(|| matrix.names().to_vec());
    if let Some(bad) = names.iter().find(|n| matrix.column_of(n).is_none()) {
        return Err(anyhow!("[bayes] feature `{bad}` was not extracted; add it to [features] names").into());
    }
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for name in &names {
        match fit_feature_correlation(style.judgments(), &matrix, name, &config) {
            Ok(r) => {
                let e = r.effect();
                eprintln!("fit-bayes: {name}: γ {:+.3} [{:+.3}, {:+.3}], R-hat {:.3}", e.mean, e.q5, e.q95, r.max_rhat);
                results.push(r);
            }
            Err(e @ (Error::ConstantFeature(_) | Error::Degenerate(_) | Error::EmptySplit(_))) => {
                eprintln!("fit-bayes: {name}: skipped ({e})");
                skipped.push(Skipped { feature: name.clone(), reason: e.to_string() });
            }
            Err(e) => return Err(anyhow::Error::new(e).context(format!("fitting `{name}`")).into()),
        }
    }
    let out = stage.out()?;
    write_correlations_csv(&results, create(&out.join("correlations.csv"))?)?;
    let n = results.len();
    let flagged = results.iter().filter(|r| r.flagged).count();
    write_json(&out.join("correlations.json"), &Correlations { results, skipped })?;
    Ok(format!("{n} features fitted ({flagged} with convergence warnings)"))
}

fn train_ranker_stage(stage: &mut Stage) -> Result<String> {
    let style = stage.style()?;
    let matrix = stage.matrix()?;
    let config = stage.run.config.ranker_config();
    let ranker = train_ranker(style.judgments(), &matrix, &config)?;
    let folds = stage.run.config.ranker.folds;
    let cv: Vec<Accuracy> = if folds >= 2 { cross_validate(style.judgments(), &matrix, folds, &config)? } else { Vec::new() };
    let out = stage.out()?;
    ranker.save(out.join("ranker.json"))?;
    write_json(&out.join("cv.json"), &cv)?;
    let mean = cv.iter().map(|a| a.accuracy).sum::<f64>() / cv.len().max(1) as f64;
    Ok(match cv.len() {
        0 => format!("ranker over {} features", ranker.features.len()),
        k => format!("ranker over {} features, {k}-fold accuracy {mean:.3}", ranker.features.len()),
    })
}

fn augment(stage: &mut Stage) -> Result<String> {
    let style = stage.style()?;
    let external = stage.external()?;
    let matrix = stage.matrix()?;
    let ranker = stage.ranker()?;
    let result = match &external {
        Some(ext) => augment_pairs(ext, &style, &matrix, &ranker, &stage.run.config.augment)?,
        None => Default::default(),
    };
    let out = stage.out()?;
    result.save(&out)?;
    let report: AugmentReport = augment_report(&result);
    write_json(&out.join("report.json"), &report)?;
    Ok(format!("{} pairs added from {} candidates", report.pairs_added, report.candidates_scanned))
}

fn featurizer(names: &[String], style: &Corpus) -> anyhow::Result<TokenFeaturizer> {
    let f = TokenFeaturizer::new(FeatureRegistry::new(names)?)?;
    Ok(match token_table(style) {
        Some(table) => f.with_token_vectors(table),
        None => f,
    })
}

fn train_infuse(stage: &mut Stage) -> Result<String> {
    let style = stage.style()?;
    let external = stage.external()?;
    let ranker = stage.ranker()?;
    let augmented = stage.need("augment", "augment/judgments.jsonl")?;
    let augmented = JudgmentSet::parse(std::io::BufReader::new(fs::File::open(&augmented)?), &augmented)?;
    let merged = match &external {
        Some(ext) => style.merge(ext)?,
        None => style.clone(),
    };
    let section = &stage.run.config.infuse;
    let judgments: JudgmentSet = style.judgments().iter().chain(augmented.iter()).cloned().collect();
    let pairs = infuse::pairs_from_judgments(&merged, &judgments, section.prompt_tokens)?;
    let mut vocab: BTreeSet<String> = infuse::vocabulary(&pairs).into_iter().collect();
    vocab.extend(style.documents().iter().flat_map(infuse::words_of));
    let vocab: Vec<String> = vocab.into_iter().collect();
    let lm = ToyLM::new(&vocab, section.order, section.state_dim, &mut ChaCha8Rng::seed_from_u64(stage.run.config.seed))?;

    let featurizer = featurizer(&ranker.features, &style)?;
    let discriminator = RawScale(&ranker);
    let mut fills = discriminator.mean_fills();
    fills.extend(section.train.fill_missing.clone());
    let config = InfusionConfig { fill_missing: fills, ..section.train.clone() };
    let baseline_config = InfusionConfig { loss_mode: LossMode::Sd, beta: 0.0, ..config.clone() };
    let styled = infuse::train(lm.clone(), &pairs, &discriminator, &featurizer, &config)?;
    let baseline = infuse::train(lm, &pairs, &discriminator, &featurizer, &baseline_config)?;

    let out = stage.out()?;
    styled.lm.save(out.join("lm.json"))?;
    baseline.lm.save(out.join("baseline_lm.json"))?;
    infuse::write_loss_curve(&styled.curve, create(&out.join("loss_curve.csv"))?)?;
    infuse::write_loss_curve(&baseline.curve, create(&out.join("baseline_loss_curve.csv"))?)?;
    let last = styled.curve.last().map_or(f64::NAN, |e| e.l_total);
    Ok(format!("{} pairs, vocabulary {}, final loss {last:.4}", pairs.len(), vocab.len()))
}

fn generate(stage: &mut Stage) -> Result<String> {
    let style = stage.style()?;
    let styled = ToyLM::load(stage.need("trained model", "train-infuse/lm.json")?)?;
    let baseline = ToyLM::load(stage.need("trained model", "train-infuse/baseline_lm.json")?)?;
    let config = &stage.run.config;
    let mut prompts: Vec<Vec<String>> =
        infuse::prompts_and_references(style.documents(), config.infuse.prompt_tokens).into_iter().map(|p| p.0).collect();
    if let Some(limit) = config.generate.limit {
        prompts.truncate(limit);
    }
    let decode = |lm: &ToyLM| -> styleinfuse::Result<Vec<GenerationRecord>> {
        match config.generate.strategy {
            Strategy::Beam => infuse::generate_records(lm, &prompts, &config.infuse.train),
            Strategy::Sample => infuse::sample_records(lm, &prompts, config.infuse.train.max_tokens, config.seed),
        }
    };
    let (a, b) = (decode(&styled)?, decode(&baseline)?);
    let out = stage.out()?;
    infuse::save_generations(&a, out.join("generations.jsonl"))?;
    infuse::save_generations(&b, out.join("baseline_generations.jsonl"))?;
    Ok(format!("{} prompts decoded by both models", prompts.len()))
}

fn generation_matrix(records: &[GenerationRecord], featurizer: &TokenFeaturizer) -> anyhow::Result<FeatureMatrix> {
    let names = featurizer.registry.names().to_vec();
    let mut rows = Vec::with_capacity(records.len());
    for r in records {
        let words: Vec<String> = r.text.split_whitespace().map(str::to_lowercase).collect();
        let fv = featurizer.featurize(&words)?;
        rows.push(names.iter().map(|n| fv.get(n)).collect());
    }
    let ids = (0..records.len()).map(|i| format!("g{i:05}")).collect();
    Ok(FeatureMatrix::new(ids, names, rows)?)
}

fn present(m: &FeatureMatrix, name: &str) -> usize {
    m.column(name).map_or(0, |c| c.iter().flatten().count())
}

fn evaluate(stage: &mut Stage) -> Result<String> {
    let style = stage.style()?;
    let correlations = stage.correlations()?;
    let styled = infuse::load_generations(stage.need("generations", "generate/generations.jsonl")?)?;
    let baseline = infuse::load_generations(stage.need("generations", "generate/baseline_generations.jsonl")?)?;
    if styled.len() != baseline.len() {
        return Err(anyhow!("{} styled and {} baseline generations", styled.len(), baseline.len()).into());
    }
    let fitted: Vec<String> = correlations.results.iter().map(|r| r.feature.clone()).collect();
    let names = stage.run.config.evaluate.features.clone().unwrap_or_else(|| textual(&fitted));
    let featurizer = featurizer(&names, &style)?;
    let (m_styled, m_base) = (generation_matrix(&styled, &featurizer)?, generation_matrix(&baseline, &featurizer)?);

    // Welch tests need two values per side.
    let mut skipped = Vec::new();
    let mut usable = Vec::new();
    for n in &names {
        let counts = (present(&m_base, n), present(&m_styled, n));
        if counts.0 < 2 || counts.1 < 2 {
            skipped.push(Skipped { feature: n.clone(), reason: format!("defined on {} baseline and {} styled generations", counts.0, counts.1) });
        } else {
            usable.push(n.clone());
        }
    }
    if usable.is_empty() {
        return Err(anyhow!("no feature is defined on enough generations to compare").into());
    }
    let used: Vec<CorrelationResult> = correlations.results.iter().filter(|r| usable.contains(&r.feature)).cloned().collect();
    let report = if used.is_empty() {
        let idx: Vec<usize> = usable.iter().map(|n| m_base.column_of(n).unwrap()).collect();
        let pick = |m: &FeatureMatrix| -> anyhow::Result<FeatureMatrix> {
            let rows = (0..m.rows()).map(|r| idx.iter().map(|&c| m.get(r, c)).collect()).collect();
            Ok(FeatureMatrix::new(m.ids().to_vec(), usable.clone(), rows)?)
        };
        significance_report(&pick(&m_base)?, &pick(&m_styled)?, &[])?
    } else {
        significance_report(&m_base, &m_styled, &used)?
    };
    let agreement = agreement_score(&report, &used).ok();

    let references: Vec<String> =
        infuse::prompts_and_references(style.documents(), stage.run.config.infuse.prompt_tokens).into_iter().map(|p| p.1).collect();
    let rouge_of = |records: &[GenerationRecord]| {
        let pairs: Vec<(String, String)> = references.iter().zip(records).map(|(r, g)| (r.clone(), g.text.clone())).collect();
        rouge_mean(&pairs)
    };
    let rouge = BTreeMap::from([(BASELINE.to_string(), rouge_of(&baseline)), (MODEL.to_string(), rouge_of(&styled))]);

    let out = stage.out()?;
    write_significance_csv(&report, create(&out.join("significance.csv"))?)?;
    let mut tables = String::from("## Feature shifts (styled vs baseline)\n\n");
    tables.push_str(&significance_markdown(&report));
    tables.push_str("\n## ROUGE against held text\n\n");
    tables.push_str(&rouge_markdown(&rouge.iter().map(|(k, v)| (k.clone(), *v)).collect::<Vec<_>>()));
    if let Some(score) = agreement {
        tables.push_str("\n## Agreement with corpus correlations\n\n");
        tables.push_str(&agreement_markdown(&[(MODEL.to_string(), score)]));
    }
    fs::write(out.join("tables.md"), &tables)?;
    let significant = report.rows.iter().filter(|r| r.p < 0.05).count();
    write_json(&out.join("evaluation.json"), &Evaluation { rouge, agreement, generations: styled.len(), skipped_features: skipped })?;
    Ok(format!(
        "{} features compared, {significant} significant; agreement {}",
        report.rows.len(),
        agreement.map_or("n/a".to_string(), |a| format!("{a:.1}%"))
    ))
}

fn report(stage: &mut Stage) -> Result<String> {
    let correlations = stage.correlations()?;
    let ranker = stage.ranker()?;
    let cv: Vec<Accuracy> = read_json(&stage.need("ranker", "train-ranker/cv.json")?)?;
    let augment: AugmentReport = read_json(&stage.need("augmentation", "augment/report.json")?)?;
    let tables = fs::read_to_string(stage.need("evaluation", "evaluate/tables.md")?)?;
    let evaluation: Evaluation = read_json(&stage.need("evaluation", "evaluate/evaluation.json")?)?;

    let mut md = String::from("# Style report\n\n## Feature correlations\n\n");
    md.push_str("| Feature | γ | 90% interval | Shift (points) | R-hat | Divergences |\n|---|---:|:---:|---:|---:|---:|\n");
    for r in &correlations.results {
        let e = r.effect();
        let flag = if r.flagged { " (unconverged)" } else { "" };
        let _ = writeln!(
            md,
            "| {}{flag} | {:+.3} | [{:+.3}, {:+.3}] | {:+.2} | {:.3} | {} |",
            r.feature, e.mean, e.q5, e.q95, r.shift.points, r.max_rhat, r.divergences
        );
    }
    for s in &correlations.skipped {
        let _ = writeln!(md, "\nNot fitted: `{}` ({}).", s.feature, s.reason);
    }
    md.push_str("\n## Discriminator\n\n| Feature | Weight |\n|---|---:|\n");
    for (f, w) in ranker.features.iter().zip(&ranker.weights) {
        let _ = writeln!(md, "| {f} | {w:+.4} |");
    }
    if !cv.is_empty() {
        let mean = cv.iter().map(|a| a.accuracy).sum::<f64>() / cv.len() as f64;
        let _ = writeln!(md, "\nCross-validated accuracy over {} folds: {mean:.3}.", cv.len());
    }
    let _ = writeln!(
        md,
        "\n## Augmentation\n\n{} pairs added from {} candidates{}.",
        augment.pairs_added,
        augment.candidates_scanned,
        if augment.capped { " (capped)" } else { "" }
    );
    let _ = writeln!(md, "\n## Generation\n\n{} prompts per model.\n", evaluation.generations);
    md.push_str(&tables);
    for s in &evaluation.skipped_features {
        let _ = writeln!(md, "\nNot compared: `{}` ({}).", s.feature, s.reason);
    }

    let out = stage.out()?;
    write_forest_svg(&correlations.results, create(&out.join("forest.svg"))?)?;
    fs::write(out.join("report.md"), md)?;
    Ok(format!("report over {} features", correlations.results.len()))
}
