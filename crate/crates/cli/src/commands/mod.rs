pub mod bench;
pub mod evaluate;
pub mod score;
pub mod sweep;
pub mod synth;

use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use rayon::prelude::*;
use terank_core::evaluation::load_truth;
use terank_core::{
    score_model, EmbeddingSet, LdaConfig, MetricId, MetricParams, PcaTarget, PerturbConfig,
    ScoreRecord, TruthTable,
};

use crate::args::{Format, MetricArgs, PerturbArgs, TruthArgs};
use crate::manifest::{file_digest, RunManifest};
use crate::UsageError;

/// Global flags resolved once in `main`.
pub struct Context {
    pub seed: u64,
    pub jobs: usize,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl Context {
    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    pub fn out_dir(&self, command: &str) -> Result<PathBuf> {
        match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                Ok(dir.clone())
            }
            None => bail!(UsageError(format!("{command} writes several files; pass --out <dir>"))),
        }
    }
}

/// Metric settings for the model at `index`; its GMM seed is `seed ^ index`.
pub fn metric_params(args: &MetricArgs, seed: u64, index: usize) -> MetricParams {
    MetricParams {
        nleep_components: args.nleep_k,
        lda: LdaConfig {
            epsilon_scale: args.lda_eps,
            projection_rank: None,
        },
        seed: seed ^ index as u64,
    }
}

pub fn perturb_config(args: &PerturbArgs) -> PerturbConfig {
    PerturbConfig {
        alpha: args.alpha,
        sigma: args.sigma,
        attract_direction: args.attract_dir,
        ..PerturbConfig::default()
    }
}

/// Scores every model under one metric and perturbation, in model order.
pub fn score_models(
    sets: &[EmbeddingSet],
    metric: MetricId,
    perturb: &PerturbConfig,
    pca: PcaTarget,
    metrics: &MetricArgs,
    seed: u64,
) -> Result<Vec<ScoreRecord>> {
    sets.par_iter()
        .enumerate()
        .map(|(i, set)| {
            score_model(set, metric, perturb, pca, &metric_params(metrics, seed, i))
                .with_context(|| format!("{metric}/{} on {}", perturb.mode, set.model_id()))
        })
        .collect()
}

/// The truth table named by `--truth`, or the bundled fine-tuning tables.
pub fn load_truth_table(args: &TruthArgs, manifest: &mut RunManifest) -> Result<TruthTable> {
    match &args.truth {
        Some(path) => {
            let table = load_truth(path)?;
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            manifest.add_input(name, file_digest(path)?);
            Ok(table)
        }
        None => Ok(TruthTable::bundled()),
    }
}
