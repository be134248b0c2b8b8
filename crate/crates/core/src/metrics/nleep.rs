//! NLEEP: LEEP computed over the posteriors of a Gaussian mixture fitted to
//! the embeddings instead of a source classifier's outputs.

use crate::embeddings::EmbeddingSet;
use crate::error::Result;
use crate::metrics::gmm::fit_gmm;

/// Components whose total responsibility falls below this are dropped.
pub const MIN_COMPONENT_MASS: f64 = 1e-12;

/// Average log of the expected empirical prediction for the true label.
/// Always `<= 0`.
pub fn score_nleep(set: &EmbeddingSet, components: Option<usize>, seed: u64) -> Result<f64> {
    let k = components.unwrap_or(set.class_count());
    let gmm = fit_gmm(set.features(), k, seed)?;
    let post = &gmm.responsibilities;
    let c = set.class_count();
    let labels = set.labels();

    let mut kept = Vec::with_capacity(k);
    // P(y | v) for kept components, row-major C per component
    let mut cond = Vec::with_capacity(k * c);
    for v in 0..k {
        let mass: f64 = post.column(v).sum();
        if mass < MIN_COMPONENT_MASS {
            log::info!("dropping GMM component {v} with total responsibility {mass:e}");
            continue;
        }
        let mut joint = vec![0.0; c];
        for (i, &y) in labels.iter().enumerate() {
            joint[y as usize] += post[(i, v)];
        }
        kept.push(v);
        cond.extend(joint.into_iter().map(|p| p / mass));
    }

    let n = set.len() as f64;
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let p: f64 = kept
                .iter()
                .enumerate()
                .map(|(slot, &v)| cond[slot * c + y as usize] * post[(i, v)])
                .sum();
            p.min(1.0).ln()
        })
        .sum();
    Ok(total / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_class_gaussians, SplitMix64};

    #[test]
    fn never_positive() {
        for seed in 0..8 {
            let set = gen_class_gaussians(3, 20, 4, 0.5 + seed as f64, 1.0, seed).unwrap();
            assert!(score_nleep(&set, None, seed).unwrap() <= 0.0);
            assert!(score_nleep(&set, Some(5), seed).unwrap() <= 0.0);
        }
    }

    #[test]
    fn tight_blobs_score_near_zero() {
        let set = gen_class_gaussians(4, 50, 5, 10.0, 0.1, 3).unwrap();
        let s = score_nleep(&set, None, 1).unwrap();
        assert!(s > -0.05, "{s}");
    }

    #[test]
    fn shuffled_labels_lower_the_score() {
        let set = gen_class_gaussians(3, 50, 4, 5.0, 1.0, 4).unwrap();
        let mut labels = set.labels().to_vec();
        SplitMix64::new(9).shuffle(&mut labels);
        let shuffled = set.with_labels(labels).unwrap();
        assert!(score_nleep(&set, None, 2).unwrap() > score_nleep(&shuffled, None, 2).unwrap());
    }

    #[test]
    fn sample_order_does_not_matter() {
        let set = gen_class_gaussians(3, 30, 3, 4.0, 1.0, 6).unwrap();
        let n = set.len();
        let rev = set.features().select_rows(&(0..n).rev().collect::<Vec<_>>());
        let labels: Vec<u32> = set.labels().iter().rev().copied().collect();
        let reversed = EmbeddingSet::new(rev, labels, 3).unwrap();
        let a = score_nleep(&set, None, 0).unwrap();
        let b = score_nleep(&reversed, None, 0).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}
