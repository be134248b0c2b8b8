//! PCA reduction of raw extractor features.
//!
//! Features are centred but never whitened. Covariance uses the `N - 1`
//! normaliser, so output column variances equal the retained eigenvalues.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};

pub const DEFAULT_ENERGY: f64 = 0.8;

/// How many components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaTarget {
    /// Smallest rank whose cumulative variance fraction reaches this value.
    Energy(f64),
    /// Explicit rank, clamped to the data rank.
    Rank(usize),
}

impl Default for PcaTarget {
    fn default() -> Self {
        PcaTarget::Energy(DEFAULT_ENERGY)
    }
}

impl PcaTarget {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PcaTarget::Energy(e) if !(e > 0.0 && e <= 1.0) => Err(Error::InvalidConfig(format!(
                "PCA energy must lie in (0, 1], got {e}"
            ))),
            PcaTarget::Rank(0) => Err(Error::InvalidConfig("PCA rank must be positive".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// k x D, orthonormal rows.
    pub components: DMatrix<f64>,
    /// Length k, non-increasing.
    pub eigenvalues: Vec<f64>,
    pub energy_retained: f64,
}

impl PcaModel {
    pub fn rank(&self) -> usize {
        self.components.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    /// Projects rows of `x` (N x D) onto the components.
    pub fn project(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        let centred = center(x, &self.mean);
        Ok(centred * self.components.transpose())
    }
}

fn center(x: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= mean.transpose();
    }
    c
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

pub fn fit_pca(set: &EmbeddingSet, target: PcaTarget) -> Result<PcaModel> {
    fit_pca_matrix(set.features(), target)
}

pub fn fit_pca_matrix(x: &DMatrix<f64>, target: PcaTarget) -> Result<PcaModel> {
    target.validate()?;
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::TooSmall {
            what: "samples",
            needed: 2,
            got: n,
        });
    }
    let mean = x.row_mean().transpose();
    let centred = center(x, &mean);
    let denom = (n - 1) as f64;

    // eigenvectors in feature space, one per column
    let (eigenvalues, basis) = if d <= n {
        let cov = centred.tr_mul(&centred) / denom;
        sorted_eigen(cov)
    } else {
        let gram = &centred * centred.transpose() / denom;
        let (values, u) = sorted_eigen(gram);
        // v_i = X^T u_i / sqrt((N-1) lambda_i), valid for lambda_i > 0
        let mut v = centred.tr_mul(&u);
        for (i, &lam) in values.iter().enumerate() {
            let norm = v.column(i).norm();
            if lam > 0.0 && norm > 0.0 {
                v.column_mut(i).scale_mut(1.0 / norm);
            }
        }
        (values, v)
    };

    let eigenvalues: Vec<f64> = eigenvalues.into_iter().map(|l| l.max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    // rows equal up to rounding of the mean still count as identical
    let scale = x.amax().max(f64::MIN_POSITIVE);
    if !(total > 0.0 && top > (1e-12 * scale).powi(2)) {
        return Err(Error::DegenerateData(
            "zero total variance (all rows identical)".into(),
        ));
    }

    let numerical_rank = eigenvalues
        .iter()
        .take_while(|&&l| l > top * 1e-12)
        .count();
    let max_rank = numerical_rank.min(n - 1).min(d).max(1);
    let k = match target {
        PcaTarget::Rank(k) => k.min(max_rank),
        PcaTarget::Energy(e) => {
            let mut cum = 0.0;
            let mut k = max_rank;
            for (i, &l) in eigenvalues.iter().enumerate().take(max_rank) {
                cum += l;
                if cum / total >= e - 1e-12 {
                    k = i + 1;
                    break;
                }
            }
            k
        }
    };

    let mut components = DMatrix::zeros(k, d);
    for i in 0..k {
        let mut v = basis.column(i).into_owned();
        let pivot = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        if pivot < 0.0 {
            v.neg_mut();
        }
        components.row_mut(i).copy_from(&v.transpose());
    }
    let kept = eigenvalues[..k].to_vec();
    let energy_retained = (kept.iter().sum::<f64>() / total).min(1.0);
    Ok(PcaModel {
        mean,
        components,
        eigenvalues: kept,
        energy_retained,
    })
}

/// Projects `set` into the model's reduced space; labels are unchanged.
pub fn transform(model: &PcaModel, set: &EmbeddingSet) -> Result<EmbeddingSet> {
    set.with_features(model.project(set.features())?)
}
