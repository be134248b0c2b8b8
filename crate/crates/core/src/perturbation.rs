//! Spread and attract feature perturbation.
//!
//! Spread pushes every point one unit further from its class centroid.
//! Attract then translates each class rigidly by `alpha * Disp_u`, where
//! `Disp_u` sums, over every other class `v`, a unit direction between the
//! two centroids scaled by `||C_u - C_v|| - sigma * (R_u + R_v)`.
//! `R_u` is the RMS distance of class `u` to its centroid.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::embeddings::{ClassPartition, EmbeddingSet};
use crate::error::{Error, Result};
use crate::reduction::{fit_pca, transform, PcaTarget};

pub const DEFAULT_ALPHA: f64 = 0.005;
pub const DEFAULT_SIGMA: f64 = 0.6;

/// Distances at or below this are treated as zero.
const DEGENERATE_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbMode {
    None,
    Spread,
    Attract,
    /// Spread followed by attract.
    Sa,
}

impl PerturbMode {
    pub const ALL: [PerturbMode; 4] = [
        PerturbMode::None,
        PerturbMode::Spread,
        PerturbMode::Attract,
        PerturbMode::Sa,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PerturbMode::None => "none",
            PerturbMode::Spread => "spread",
            PerturbMode::Attract => "attract",
            PerturbMode::Sa => "sa",
        }
    }

    pub fn is_perturbed(self) -> bool {
        self != PerturbMode::None
    }
}

impl fmt::Display for PerturbMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for PerturbMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PerturbMode::None),
            "spread" | "spread_only" => Ok(PerturbMode::Spread),
            "attract" | "attract_only" => Ok(PerturbMode::Attract),
            "sa" | "spread_then_attract" => Ok(PerturbMode::Sa),
            other => Err(Error::InvalidConfig(format!("unknown perturbation mode {other:?}"))),
        }
    }
}

/// Which way a class moves relative to another class's centroid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttractDirection {
    /// Along `C_v - C_u`: a spring toward the equilibrium separation.
    Toward,
    /// Along `C_u - C_v`, the sign as literally written in the displacement formula.
    Literal,
}

impl AttractDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            AttractDirection::Toward => "toward",
            AttractDirection::Literal => "literal",
        }
    }
}

impl FromStr for AttractDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toward" | "toward_other" => Ok(AttractDirection::Toward),
            "literal" | "literal_eq3" => Ok(AttractDirection::Literal),
            other => Err(Error::InvalidConfig(format!("unknown attract direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub alpha: f64,
    pub sigma: f64,
    pub mode: PerturbMode,
    pub attract_direction: AttractDirection,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            sigma: DEFAULT_SIGMA,
            mode: PerturbMode::Sa,
            attract_direction: AttractDirection::Toward,
        }
    }
}

impl PerturbConfig {
    pub fn with_mode(mut self, mode: PerturbMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be a non-negative number, got {}",
                self.alpha
            )));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be a non-negative number, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Per-class centroids (C x k) and RMS radii.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassGeometry {
    pub centroids: DMatrix<f64>,
    pub radii: Vec<f64>,
}

impl ClassGeometry {
    pub fn of(set: &EmbeddingSet) -> Self {
        Self::from_partition(set.features(), &set.partition())
    }

    pub fn from_partition(x: &DMatrix<f64>, partition: &ClassPartition) -> Self {
        let c = partition.class_count();
        let mut centroids = DMatrix::zeros(c, x.ncols());
        let mut radii = vec![0.0; c];
        for (u, rows) in partition.iter().enumerate() {
            let points = x.select_rows(rows);
            let centroid = class_centroid(&points).expect("classes are non-empty");
            radii[u] = class_radius(&points, &centroid);
            centroids.row_mut(u).copy_from(&centroid.transpose());
        }
        Self { centroids, radii }
    }

    pub fn centroid(&self, u: usize) -> DVector<f64> {
        self.centroids.row(u).transpose()
    }
}

/// Mean of the rows of `points` (m x k).
pub fn class_centroid(points: &DMatrix<f64>) -> Result<DVector<f64>> {
    if points.nrows() == 0 {
        return Err(Error::TooSmall {
            what: "points for a centroid",
            needed: 1,
            got: 0,
        });
    }
    Ok(points.row_mean().transpose())
}

/// Root-mean-square distance of the rows of `points` to `centroid`.
pub fn class_radius(points: &DMatrix<f64>, centroid: &DVector<f64>) -> f64 {
    let m = points.nrows();
    if m == 0 {
        return 0.0;
    }
    let ss: f64 = points
        .row_iter()
        .map(|row| (row.transpose() - centroid).norm_squared())
        .sum();
    (ss / m as f64).sqrt()
}

/// Moves each point one unit away from its class centroid along the
/// centroid-to-point ray. Points on their centroid stay put.
pub fn spread(set: &EmbeddingSet) -> Result<EmbeddingSet> {
    let geometry = ClassGeometry::of(set);
    let mut x = set.features().clone();
    for (i, &label) in set.labels().iter().enumerate() {
        let offset = x.row(i) - geometry.centroids.row(label as usize);
        let dist = offset.norm();
        if dist > DEGENERATE_DISTANCE {
            let step = offset / dist;
            let mut row = x.row_mut(i);
            row += step;
        }
    }
    set.with_features(x)
}

/// Class displacement vectors `Disp_u` (rows of a C x k matrix, before the
/// `alpha` factor) plus the class pairs whose centroids coincide.
pub fn attract_displacements(
    geometry: &ClassGeometry,
    sigma: f64,
    direction: AttractDirection,
) -> (DMatrix<f64>, Vec<(usize, usize)>) {
    let c = geometry.radii.len();
    let mut disp = DMatrix::zeros(c, geometry.centroids.ncols());
    let mut coincident = Vec::new();
    for u in 0..c {
        for v in 0..c {
            if u == v {
                continue;
            }
            let d_uv = geometry.centroids.row(u) - geometry.centroids.row(v);
            let dist = d_uv.norm();
            if dist < DEGENERATE_DISTANCE {
                if u < v {
                    coincident.push((u, v));
                }
                continue;
            }
            let stretch = dist - sigma * (geometry.radii[u] + geometry.radii[v]);
            let unit = match direction {
                AttractDirection::Toward => -d_uv / dist,
                AttractDirection::Literal => d_uv / dist,
            };
            let mut row = disp.row_mut(u);
            row += unit * stretch;
        }
    }
    (disp, coincident)
}

/// Translates every class `u` by `alpha * Disp_u`, using `geometry` as a
/// snapshot taken before any class moves.
pub fn attract(
    set: &EmbeddingSet,
    geometry: &ClassGeometry,
    cfg: &PerturbConfig,
) -> Result<EmbeddingSet> {
    cfg.validate()?;
    if geometry.radii.len() != set.class_count() || geometry.centroids.ncols() != set.dim() {
        return Err(Error::Shape(format!(
            "geometry is {}x{}, set has {} classes in {} dimensions",
            geometry.centroids.nrows(),
            geometry.centroids.ncols(),
            set.class_count(),
            set.dim()
        )));
    }
    let (disp, coincident) = attract_displacements(geometry, cfg.sigma, cfg.attract_direction);
    for (u, v) in coincident {
        log::warn!("classes {u} and {v} share a centroid; pair skipped in attract");
    }
    let shift = disp * cfg.alpha;
    let mut x = set.features().clone();
    for (i, &label) in set.labels().iter().enumerate() {
        let mut row = x.row_mut(i);
        row += shift.row(label as usize);
    }
    set.with_features(x)
}

/// Applies `cfg.mode` to an already reduced set.
pub fn perturb_reduced(reduced: &EmbeddingSet, cfg: &PerturbConfig) -> Result<EmbeddingSet> {
    cfg.validate()?;
    match cfg.mode {
        PerturbMode::None => Ok(reduced.clone()),
        PerturbMode::Spread => spread(reduced),
        PerturbMode::Attract => attract(reduced, &ClassGeometry::of(reduced), cfg),
        PerturbMode::Sa => {
            let spread_set = spread(reduced)?;
            let geometry = ClassGeometry::of(&spread_set);
            attract(&spread_set, &geometry, cfg)
        }
    }
}

/// PCA reduction followed by the configured perturbation.
pub fn sa_perturb(
    raw: &EmbeddingSet,
    pca_target: PcaTarget,
    cfg: &PerturbConfig,
) -> Result<EmbeddingSet> {
    cfg.validate()?;
    let model = fit_pca(raw, pca_target)?;
    let reduced = transform(&model, raw)?;
    perturb_reduced(&reduced, cfg)
}
