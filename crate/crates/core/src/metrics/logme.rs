//! LogME: maximum marginal evidence of a Bayesian linear model.
//!
//! For each class a one-vs-rest {0, 1} target `y` is regressed on the
//! features `F` with prior `w ~ N(0, alpha^-1 I)` and noise precision `beta`.
//! The evidence is maximised with MacKay's fixed point, evaluated in the
//! eigenbasis of `F^T F` so each iteration is O(rank).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::embeddings::EmbeddingSet;
use crate::error::Result;

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-3;
const PRECISION_BOUNDS: (f64, f64) = (1e-12, 1e12);

/// Singular spectrum of a feature matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    n: usize,
    d: usize,
    /// Squared singular values above the rank cutoff.
    sq: Vec<f64>,
    /// Left singular vectors (N x r), the basis the targets are projected on.
    left: DMatrix<f64>,
}

impl Spectrum {
    pub fn new(f: &DMatrix<f64>) -> Self {
        let (n, d) = f.shape();
        // `right`: eigenvectors live in feature space and need mapping through F
        let right = d <= n;
        let eig = if right {
            SymmetricEigen::new(f.tr_mul(f))
        } else {
            SymmetricEigen::new(f * f.transpose())
        };
        let (values, vectors) = (eig.eigenvalues, eig.eigenvectors);
        let top = values.iter().copied().fold(0.0, f64::max);
        let cutoff = top * 1e-12 * n.max(d) as f64;
        let keep: Vec<usize> = (0..values.len())
            .filter(|&i| top > 0.0 && values[i] > cutoff)
            .collect();
        let mut u = DMatrix::zeros(n, keep.len());
        for (c, &i) in keep.iter().enumerate() {
            let col = if right {
                // u = F v / s
                f * vectors.column(i) / values[i].sqrt()
            } else {
                vectors.column(i).into_owned()
            };
            u.set_column(c, &col);
        }
        Self {
            n,
            d,
            sq: keep.iter().map(|&i| values[i]).collect(),
            left: u,
        }
    }

    pub fn rank(&self) -> usize {
        self.sq.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct Stats {
    gamma: f64,
    m_norm2: f64,
    residual: f64,
    evidence: f64,
}

/// A target projected onto a spectrum.
struct Projected<'a> {
    spectrum: &'a Spectrum,
    z: Vec<f64>,
    y_perp2: f64,
}

impl<'a> Projected<'a> {
    fn new(spectrum: &'a Spectrum, y: &DVector<f64>) -> Self {
        let z: Vec<f64> = (0..spectrum.rank()).map(|i| spectrum.left.column(i).dot(y)).collect();
        let y_perp2 = (y.norm_squared() - z.iter().map(|v| v * v).sum::<f64>()).max(0.0);
        Self { spectrum, z, y_perp2 }
    }

    fn stats(&self, alpha: f64, beta: f64) -> Stats {
        let (n, d) = (self.spectrum.n as f64, self.spectrum.d as f64);
        let mut gamma = 0.0;
        let mut m_norm2 = 0.0;
        let mut residual = self.y_perp2;
        let mut log_det = (d - self.spectrum.rank() as f64) * alpha.ln();
        for (&s2, &z) in self.spectrum.sq.iter().zip(&self.z) {
            let a = alpha + beta * s2;
            gamma += beta * s2 / a;
            m_norm2 += (beta * s2.sqrt() * z / a).powi(2);
            residual += (alpha * z / a).powi(2);
            log_det += a.ln();
        }
        let evidence = 0.5 * n * beta.ln() + 0.5 * d * alpha.ln() - 0.5 * n * (2.0 * PI).ln()
            - 0.5 * beta * residual
            - 0.5 * alpha * m_norm2
            - 0.5 * log_det;
        Stats {
            gamma,
            m_norm2,
            residual,
            evidence,
        }
    }
}

/// Result of maximising the evidence for one target.
#[derive(Debug, Clone)]
pub struct LogmeFit {
    pub alpha: f64,
    pub beta: f64,
    /// Log evidence at the final (alpha, beta).
    pub evidence: f64,
    /// Log evidence at every iterate, starting from alpha = beta = 1.
    pub trace: Vec<f64>,
    pub converged: bool,
}

fn clamp_precision(v: f64) -> f64 {
    if v.is_nan() {
        PRECISION_BOUNDS.1
    } else {
        v.clamp(PRECISION_BOUNDS.0, PRECISION_BOUNDS.1)
    }
}

/// Maximises the evidence of `y` given the features summarised by `spectrum`.
pub fn fit_target(spectrum: &Spectrum, y: &DVector<f64>) -> LogmeFit {
    let n = spectrum.n as f64;
    if spectrum.rank() == 0 {
        // no signal in the features: only the noise precision matters
        let y2 = y.norm_squared().max(f64::MIN_POSITIVE);
        let beta = n / y2;
        let evidence = 0.5 * n * beta.ln() - 0.5 * n * (2.0 * PI).ln() - 0.5 * beta * y2;
        return LogmeFit {
            alpha: PRECISION_BOUNDS.1,
            beta,
            evidence,
            trace: vec![evidence],
            converged: true,
        };
    }

    let target = Projected::new(spectrum, y);
    let (mut alpha, mut beta) = (1.0, 1.0);
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let st = target.stats(alpha, beta);
        trace.push(st.evidence);
        let next_alpha = clamp_precision(st.gamma / st.m_norm2);
        let next_beta = clamp_precision((n - st.gamma) / st.residual);
        let done = ((next_alpha - alpha) / alpha).abs() < TOLERANCE
            && ((next_beta - beta) / beta).abs() < TOLERANCE;
        alpha = next_alpha;
        beta = next_beta;
        if done {
            converged = true;
            break;
        }
    }
    let evidence = target.stats(alpha, beta).evidence;
    trace.push(evidence);
    LogmeFit {
        alpha,
        beta,
        evidence,
        trace,
        converged,
    }
}

/// One-vs-rest fits for every class of `set`.
pub fn fit_classes(set: &EmbeddingSet) -> Vec<LogmeFit> {
    let spectrum = Spectrum::new(set.features());
    (0..set.class_count())
        .map(|c| {
            let y = DVector::from_iterator(
                set.len(),
                set.labels().iter().map(|&l| if l as usize == c { 1.0 } else { 0.0 }),
            );
            fit_target(&spectrum, &y)
        })
        .collect()
}

/// Mean over classes of the maximised log evidence divided by N.
pub fn score_logme(set: &EmbeddingSet) -> Result<f64> {
    let fits = fit_classes(set);
    let n = set.len() as f64;
    Ok(fits.iter().map(|f| f.evidence / n).sum::<f64>() / fits.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_class_gaussians, SplitMix64};

    /// Dense evaluation of the log evidence at a given (alpha, beta).
    pub(crate) fn dense_evidence(f: &DMatrix<f64>, y: &DVector<f64>, alpha: f64, beta: f64) -> f64 {
        let (n, d) = (f.nrows() as f64, f.ncols());
        let a = DMatrix::identity(d, d) * alpha + f.tr_mul(f) * beta;
        let chol = a.clone().cholesky().unwrap();
        let m = chol.solve(&(f.tr_mul(y) * beta));
        let log_det = a.determinant().ln();
        0.5 * n * beta.ln() + 0.5 * d as f64 * alpha.ln() - 0.5 * n * (2.0 * PI).ln()
            - 0.5 * beta * (f * &m - y).norm_squared()
            - 0.5 * alpha * m.norm_squared()
            - 0.5 * log_det
    }

    #[test]
    fn spectral_evidence_matches_dense() {
        let mut rng = SplitMix64::new(1);
        for (n, d) in [(10, 3), (4, 7)] {
            let f = DMatrix::from_fn(n, d, |_, _| rng.next_normal());
            let y = DVector::from_fn(n, |i, _| (i % 2) as f64);
            let spectrum = Spectrum::new(&f);
            let p = Projected::new(&spectrum, &y);
            for (a, b) in [(0.1, 2.0), (3.0, 0.5), (1.0, 1.0)] {
                let fast = p.stats(a, b).evidence;
                let slow = dense_evidence(&f, &y, a, b);
                assert!((fast - slow).abs() < 1e-9, "{n}x{d}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn rotation_invariant() {
        let set = gen_class_gaussians(3, 20, 4, 2.0, 1.0, 3).unwrap();
        let q = {
            let mut rng = SplitMix64::new(4);
            let m = DMatrix::from_fn(4, 4, |_, _| rng.next_normal());
            m.qr().q()
        };
        let rotated = set.with_features(set.features() * q).unwrap();
        let a = score_logme(&set).unwrap();
        let b = score_logme(&rotated).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn zero_features_give_null_model_evidence() {
        let set = EmbeddingSet::new(DMatrix::zeros(6, 3), vec![0, 1, 0, 1, 0, 1], 2).unwrap();
        let s = score_logme(&set).unwrap();
        assert!(s.is_finite());
        // y has three ones out of six: beta = 2
        let expected = 0.5 * 2f64.ln() - 0.5 * (2.0 * PI).ln() - 0.5;
        assert!((s - expected).abs() < 1e-12);
    }

    #[test]
    fn evidence_trace_is_non_decreasing() {
        for seed in 0..20 {
            let set = gen_class_gaussians(3, 15, 5, 1.5, 1.0, seed).unwrap();
            for fit in fit_classes(&set) {
                for w in fit.trace.windows(2) {
                    assert!(w[1] >= w[0] - 1e-8, "seed {seed}: {:?}", fit.trace);
                }
            }
        }
    }

    #[test]
    fn separable_beats_shuffled() {
        let set = gen_class_gaussians(3, 40, 6, 3.0, 1.0, 12).unwrap();
        let mut labels = set.labels().to_vec();
        SplitMix64::new(13).shuffle(&mut labels);
        let shuffled = set.with_labels(labels).unwrap();
        assert!(score_logme(&set).unwrap() > score_logme(&shuffled).unwrap());
    }
}
