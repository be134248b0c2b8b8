//! Transferability metrics. Each maps labelled (reduced, possibly perturbed)
//! embeddings to a scalar where larger means more transferable.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};

pub mod gbc;
pub mod gmm;
pub mod lda;
pub mod logme;
pub mod nleep;

pub use gbc::score_gbc;
pub use gmm::{fit_gmm, GmmModel};
pub use lda::{score_lda, LdaConfig};
pub use logme::score_logme;
pub use nleep::score_nleep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricId {
    Logme,
    Gbc,
    Nleep,
    Lda,
}

impl MetricId {
    pub const ALL: [MetricId; 4] = [MetricId::Logme, MetricId::Gbc, MetricId::Nleep, MetricId::Lda];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Logme => "logme",
            MetricId::Gbc => "gbc",
            MetricId::Nleep => "nleep",
            MetricId::Lda => "lda",
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logme" => Ok(MetricId::Logme),
            "gbc" => Ok(MetricId::Gbc),
            "nleep" => Ok(MetricId::Nleep),
            "lda" => Ok(MetricId::Lda),
            other => Err(Error::InvalidConfig(format!("unknown metric {other:?}"))),
        }
    }
}

/// Knobs shared by all metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    /// GMM component count for NLEEP; `None` means one per class.
    pub nleep_components: Option<usize>,
    pub lda: LdaConfig,
    pub seed: u64,
}

/// Scores `set` as given, with no reduction or perturbation.
pub fn score_embedding(set: &EmbeddingSet, metric: MetricId, params: &MetricParams) -> Result<f64> {
    let score = match metric {
        MetricId::Logme => score_logme(set),
        MetricId::Gbc => score_gbc(set),
        MetricId::Nleep => score_nleep(set, params.nleep_components, params.seed),
        MetricId::Lda => score_lda(set, &params.lda),
    }?;
    if !score.is_finite() {
        return Err(Error::Numeric(format!("{metric} produced a non-finite score")));
    }
    Ok(score)
}

/// Log-sum-exp of a slice; `-inf` for an empty or all `-inf` input.
pub(crate) fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.into_iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Requires every class to hold at least two samples.
pub(crate) fn require_pairs(set: &EmbeddingSet) -> Result<()> {
    match set.class_sizes().iter().position(|&n| n < 2) {
        Some(u) => Err(Error::SingletonClass(u)),
        None => Ok(()),
    }
}
