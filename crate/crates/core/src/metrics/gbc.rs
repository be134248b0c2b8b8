//! Gaussian Bhattacharyya coefficient: negated total pairwise overlap of
//! per-class diagonal Gaussians. Scores lie in `[-C(C-1)/2, 0]`; values near
//! zero mean well separated classes.

use nalgebra::DVector;

use crate::embeddings::EmbeddingSet;
use crate::error::Result;
use crate::metrics::require_pairs;

pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Mean and floored per-dimension population variance of one class.
#[derive(Debug, Clone)]
pub struct DiagGaussian {
    pub mean: DVector<f64>,
    pub var: DVector<f64>,
}

pub fn class_gaussians(set: &EmbeddingSet) -> Vec<DiagGaussian> {
    set.partition()
        .iter()
        .map(|rows| {
            let pts = set.features().select_rows(rows);
            let m = rows.len() as f64;
            let mean = pts.row_mean().transpose();
            let var = DVector::from_fn(pts.ncols(), |j, _| {
                let v = pts.column(j).iter().map(|x| (x - mean[j]).powi(2)).sum::<f64>() / m;
                v.max(VARIANCE_FLOOR)
            });
            DiagGaussian { mean, var }
        })
        .collect()
}

/// Bhattacharyya distance between two diagonal Gaussians.
pub fn bhattacharyya_distance(a: &DiagGaussian, b: &DiagGaussian) -> f64 {
    let mut mahalanobis = 0.0;
    let mut log_term = 0.0;
    for j in 0..a.mean.len() {
        let (va, vb) = (a.var[j], b.var[j]);
        let avg = 0.5 * (va + vb);
        mahalanobis += (a.mean[j] - b.mean[j]).powi(2) / avg;
        // ln(avg / sqrt(va vb)), split to stay finite for extreme variances
        log_term += avg.ln() - 0.5 * (va.ln() + vb.ln());
    }
    0.125 * mahalanobis + 0.5 * log_term
}

pub fn score_gbc(set: &EmbeddingSet) -> Result<f64> {
    require_pairs(set)?;
    let g = class_gaussians(set);
    let mut overlap = 0.0;
    for u in 0..g.len() {
        for v in u + 1..g.len() {
            overlap += (-bhattacharyya_distance(&g[u], &g[v])).exp();
        }
    }
    Ok(-overlap)
}
