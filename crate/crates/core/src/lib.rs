//! Learning audience style preferences from pairwise judgments and infusing
//! them into a generator.
//!
//! The crate is organised along the pipeline:
//!
//! * [`corpus`]: documents, pairwise judgments, CoNLL-U annotations and
//!   embedding sequences, with their flat-file interchange formats.
//! * [`features`]: the linguistic feature registry and standardized feature
//!   matrices.
//! * [`bayes`]: the hierarchical feature/style correlation model and the
//!   No-U-Turn sampler used to fit it.
//! * [`ranker`]: a pairwise discriminator over feature vectors.
//! * [`augment`]: bootstrapped expansion of a seed judgment set from an
//!   external corpus.
//! * [`infuse`]: a table language model trained with the reconstruction,
//!   discriminator and sample-dependent losses.
//! * [`eval`]: ROUGE, Welch tests, significance buckets and the
//!   correlation-weighted agreement score.

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod augment;
pub mod bayes;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod infuse;
pub mod math;
pub mod ranker;
pub mod synth;
pub mod text;

pub use corpus::{AnnotatedToken, Corpus, Document, EmbeddingSequence, EmbeddingUnit, JudgmentSet, PairJudgment, Source};
pub use error::{Error, Result};
pub use features::{FeatureMatrix, FeatureRegistry, FeatureValue, FeatureVector, Provenance};
pub use ranker::{Discriminator, Ranker, RankerConfig};
