use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use styleinfuse::augment::AugmentConfig;
use styleinfuse::bayes::{BayesConfig, NutsConfig, Prior};
use styleinfuse::features::{feature_kind, FeatureKind, NATIVE_FEATURES};
use styleinfuse::infuse::InfusionConfig;
use styleinfuse::RankerConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Every stage seed is derived from this one.
    pub seed: u64,
    pub corpus: CorpusPaths,
    pub features: FeatureSection,
    pub bayes: BayesSection,
    pub ranker: RankerSection,
    pub augment: AugmentConfig,
    pub infuse: InfuseSection,
    pub generate: GenerateSection,
    pub evaluate: EvaluateSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusPaths {
    /// Directory holding the judged corpus in the interchange layout.
    pub style: Option<PathBuf>,
    /// Optional unjudged corpus used for augmentation.
    pub external: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub names: Vec<String>,
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection { names: NATIVE_FEATURES.iter().map(|s| s.to_string()).collect() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BayesSection {
    /// Features to fit; every extracted feature when absent.
    pub features: Option<Vec<String>>,
    pub nuts: NutsConfig,
    pub prior: Prior,
    pub fixed_orientation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankerSection {
    /// Cross-validation folds; 0 or 1 disables cross-validation.
    pub folds: usize,
    #[serde(flatten)]
    pub train: RankerConfig,
}

impl Default for RankerSection {
    fn default() -> Self {
        RankerSection { folds: 5, train: RankerConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InfuseSection {
    pub order: usize,
    pub state_dim: usize,
    /// Leading words of each text used as the prompt.
    pub prompt_tokens: usize,
    #[serde(flatten)]
    pub train: InfusionConfig,
}

impl Default for InfuseSection {
    fn default() -> Self {
        InfuseSection { order: 1, state_dim: 4, prompt_tokens: 2, train: InfusionConfig::default() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Beam,
    Sample,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSection {
    pub strategy: Strategy,
    /// Use only the first `limit` style documents as prompts.
    pub limit: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// Features compared between generations; the fitted features that can
    /// be computed on bare text when absent.
    pub features: Option<Vec<String>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig = toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Ok(config)
    }

    /// Pushes the global seed into every stage.
    pub fn with_seed(mut self, seed: u64) -> RunConfig {
        self.seed = seed;
        self.bayes.nuts.seed = seed;
        self.ranker.train.seed = seed;
        self.augment.seed = seed;
        self.infuse.train.seed = seed;
        self
    }

    pub fn bayes_config(&self) -> BayesConfig {
        BayesConfig { nuts: self.bayes.nuts.clone(), prior: self.bayes.prior, fixed_orientation: self.bayes.fixed_orientation }
    }

    /// Ranker settings; unless columns are named, annotation features are
    /// left out so generated text can be scored.
    pub fn ranker_config(&self) -> RankerConfig {
        let mut c = self.ranker.train.clone();
        if c.features.is_none() && self.features.names.iter().any(|n| feature_kind(n) == Some(FeatureKind::Annotation)) {
            c.features = Some(textual(&self.features.names));
        }
        c
    }
}

/// The names that can be computed from bare text.
pub fn textual(names: &[String]) -> Vec<String> {
    names.iter().filter(|n| feature_kind(n).is_some_and(|k| k != FeatureKind::Annotation)).cloned().collect()
}
