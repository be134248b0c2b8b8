//! LDA-based score: the mean posterior probability of the true class under a
//! Gaussian classifier in the Fisher discriminant subspace.
//!
//! Discriminant directions solve `(S_w + eps I)^-1 S_b u = lambda u`. They are
//! scaled so the projected pooled within-class covariance `(S_w + eps I) / N`
//! is the identity; a larger ridge therefore shrinks the projection and pulls
//! the score toward the class-prior baseline.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::metrics::{log_sum_exp, require_pairs};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    /// Ridge as a fraction of the mean within-class scatter per dimension.
    pub epsilon_scale: f64,
    /// Number of discriminant directions; `None` means `min(C - 1, k)`.
    pub projection_rank: Option<usize>,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            epsilon_scale: 1e-4,
            projection_rank: None,
        }
    }
}

impl LdaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_scale.is_finite() && self.epsilon_scale > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "LDA epsilon scale must be positive, got {}",
                self.epsilon_scale
            )));
        }
        if self.projection_rank == Some(0) {
            return Err(Error::InvalidConfig("LDA projection rank must be positive".into()));
        }
        Ok(())
    }
}

/// Fitted discriminant projection.
#[derive(Debug, Clone)]
pub struct LdaProjection {
    /// k x r, one discriminant direction per column.
    pub directions: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub class_means: Vec<DVector<f64>>,
    pub log_priors: Vec<f64>,
}

pub fn fit_lda(set: &EmbeddingSet, cfg: &LdaConfig) -> Result<LdaProjection> {
    cfg.validate()?;
    require_pairs(set)?;
    let x = set.features();
    let (n, k) = x.shape();
    let c = set.class_count();
    let partition = set.partition();
    let global = x.row_mean().transpose();

    let mut within = DMatrix::<f64>::zeros(k, k);
    let mut between = DMatrix::<f64>::zeros(k, k);
    let mut class_means = Vec::with_capacity(c);
    let mut log_priors = Vec::with_capacity(c);
    for rows in partition.iter() {
        let pts = x.select_rows(rows);
        let mu = pts.row_mean().transpose();
        let mut centred = pts;
        for mut r in centred.row_iter_mut() {
            r -= mu.transpose();
        }
        within += centred.tr_mul(&centred);
        let diff = &mu - &global;
        between += &diff * diff.transpose() * rows.len() as f64;
        class_means.push(mu);
        log_priors.push((rows.len() as f64 / n as f64).ln());
    }

    let eps = cfg.epsilon_scale * within.trace() / k as f64;
    let eps = if eps > 0.0 { eps } else { cfg.epsilon_scale };
    let regularised = &within + DMatrix::identity(k, k) * eps;
    let chol = regularised
        .cholesky()
        .ok_or_else(|| Error::Numeric("regularised within-class scatter is not positive definite".into()))?;
    let l = chol.l();
    // symmetric form: L^-1 S_b L^-T y = lambda y, u = L^-T y
    let l_inv_b = l
        .solve_lower_triangular(&between)
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    let sym = l
        .solve_lower_triangular(&l_inv_b.transpose())
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let r = cfg.projection_rank.unwrap_or(c - 1).min(c - 1).min(k).max(1);
    let lt = l.transpose();
    let scale = (n as f64).sqrt();
    let mut directions = DMatrix::zeros(k, r);
    for (col, &i) in order.iter().take(r).enumerate() {
        let y = eig.eigenvectors.column(i).into_owned();
        let mut u = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?
            * scale;
        let pivot = u.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        if pivot < 0.0 {
            u.neg_mut();
        }
        directions.set_column(col, &u);
    }
    Ok(LdaProjection {
        directions,
        eigenvalues: order.iter().take(r).map(|&i| eig.eigenvalues[i].max(0.0)).collect(),
        class_means,
        log_priors,
    })
}

/// `S_lda` in `[0, 1]`: average softmax probability of each sample's label
/// under `delta_c(f) = f^T U U^T mu_c - 1/2 mu_c^T U U^T mu_c + log(K_c / K)`.
pub fn score_lda(set: &EmbeddingSet, cfg: &LdaConfig) -> Result<f64> {
    let proj = fit_lda(set, cfg)?;
    let u = &proj.directions;
    let projected_means: Vec<DVector<f64>> = proj.class_means.iter().map(|m| u.tr_mul(m)).collect();
    let offsets: Vec<f64> = projected_means
        .iter()
        .zip(&proj.log_priors)
        .map(|(pm, lp)| -0.5 * pm.norm_squared() + lp)
        .collect();

    let projected = set.features() * u;
    let mut total = 0.0;
    let mut delta = vec![0.0; projected_means.len()];
    for (i, &y) in set.labels().iter().enumerate() {
        let f = projected.row(i);
        for (c, pm) in projected_means.iter().enumerate() {
            delta[c] = f.dot(&pm.transpose()) + offsets[c];
        }
        let lse = log_sum_exp(delta.iter().copied());
        total += (delta[y as usize] - lse).exp();
    }
    Ok((total / set.len() as f64).clamp(0.0, 1.0))
}
