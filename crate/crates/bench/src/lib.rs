//! Fixtures shared by the criterion benches.

use terank_core::synth::gen_model_zoo;
use terank_core::{EmbeddingSet, ZooConfig};

/// One synthetic model with `classes * per_class` rows in `dim` dimensions.
pub fn model(classes: usize, per_class: usize, dim: usize) -> EmbeddingSet {
    zoo(2, classes, per_class, dim).swap_remove(0)
}

pub fn zoo(models: usize, classes: usize, per_class: usize, dim: usize) -> Vec<EmbeddingSet> {
    let cfg = ZooConfig::from_ranges(models, classes, per_class, dim, (10.0, 10.0), (11.0, 26.0), 7);
    gen_model_zoo(&cfg).expect("valid zoo").0
}
