//! Transferability estimation for pre-trained model selection.
//!
//! Embeddings of a target dataset, one set per candidate model, are reduced
//! with PCA, optionally perturbed with the spread/attract operations, and
//! scored with a transferability metric. Scores are ranked and compared to
//! fine-tuning accuracies with a weighted Kendall coefficient.

pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod metrics;
pub mod perturbation;
pub mod pipeline;
pub mod reduction;
pub mod synth;

pub use embeddings::{ClassPartition, EmbeddingSet};
pub use error::{Error, Result};
pub use evaluation::{
    improvement_summary, rank_and_report, weighted_kendall_tau, ImprovementRow, Pool,
    RankingReport, Regime, TruthTable, Weighting,
};
pub use metrics::{LdaConfig, MetricId, MetricParams};
pub use perturbation::{AttractDirection, PerturbConfig, PerturbMode};
pub use pipeline::{score_model, ScoreRecord};
pub use reduction::{PcaModel, PcaTarget};
pub use synth::{SplitMix64, ZooConfig};
