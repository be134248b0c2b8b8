use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingSet;
use crate::error::Result;
use crate::metrics::{score_embedding, MetricId, MetricParams};
use crate::perturbation::{sa_perturb, PerturbConfig, PerturbMode};
use crate::reduction::PcaTarget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub model_id: String,
    pub metric: MetricId,
    pub mode: PerturbMode,
    pub perturbed: bool,
    pub score: f64,
    /// Reduction, perturbation and scoring together.
    pub wall_time_s: f64,
}

/// Reduces `raw`, applies `perturb.mode` and scores the result.
pub fn score_model(
    raw: &EmbeddingSet,
    metric: MetricId,
    perturb: &PerturbConfig,
    pca_target: PcaTarget,
    params: &MetricParams,
) -> Result<ScoreRecord> {
    let start = Instant::now();
    let prepared = sa_perturb(raw, pca_target, perturb)?;
    let score = score_embedding(&prepared, metric, params)?;
    Ok(ScoreRecord {
        model_id: raw.model_id().to_string(),
        metric,
        mode: perturb.mode,
        perturbed: perturb.mode.is_perturbed(),
        score,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
