use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use terank_core::metrics::logme::{fit_classes, score_logme};
use terank_core::{weighted_kendall_tau, EmbeddingSet, SplitMix64, Weighting};

/// Log evidence of `y` under `w ~ N(0, I/alpha)`, `y ~ N(Fw, I/beta)`, from
/// the dense marginal `y ~ N(0, I/beta + F F^T / alpha)`.
fn marginal_log_evidence(f: &DMatrix<f64>, y: &DVector<f64>, alpha: f64, beta: f64) -> f64 {
    let n = f.nrows();
    let cov = DMatrix::identity(n, n) / beta + f * f.transpose() / alpha;
    let chol = cov.cholesky().expect("covariance is positive definite");
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let quad = y.dot(&chol.solve(y));
    -0.5 * (n as f64 * (2.0 * PI).ln() + log_det + quad)
}

fn grid_max(f: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let steps = 600;
    let at = |i: usize| 10f64.powf(-6.0 + 12.0 * i as f64 / steps as f64);
    let mut best = f64::NEG_INFINITY;
    for i in 0..=steps {
        for j in 0..=steps {
            best = best.max(marginal_log_evidence(f, y, at(i), at(j)));
        }
    }
    best
}

fn random_set(rng: &mut SplitMix64, n: usize, d: usize, c: usize) -> EmbeddingSet {
    let x = DMatrix::from_fn(n, d, |_, _| rng.next_normal());
    let mut labels: Vec<u32> = (0..n).map(|i| (i % c) as u32).collect();
    rng.shuffle(&mut labels);
    EmbeddingSet::new(x, labels, c).unwrap()
}

#[test]
fn logme_matches_grid_search_on_small_instances() {
    let mut rng = SplitMix64::new(2024);
    for case in 0..12 {
        let n = 4 + case % 4;
        let d = 1 + case % 3;
        let c = 2 + case % 2;
        let set = random_set(&mut rng, n, d, c);
        let fits = fit_classes(&set);
        for (class, fit) in fits.iter().enumerate() {
            let y = DVector::from_iterator(
                n,
                set.labels().iter().map(|&l| f64::from(l as usize == class)),
            );
            let dense = marginal_log_evidence(set.features(), &y, fit.alpha, fit.beta);
            assert!((dense - fit.evidence).abs() < 1e-8, "case {case}: {dense} vs {}", fit.evidence);
            let best = grid_max(set.features(), &y);
            assert!(
                (best - fit.evidence).abs() / n as f64 <= 1e-2,
                "case {case} class {class}: grid {best} vs fit {}",
                fit.evidence
            );
            for w in fit.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-8, "case {case}: {:?}", fit.trace);
            }
        }
    }
}

#[test]
fn logme_score_is_mean_evidence_per_sample() {
    let mut rng = SplitMix64::new(5);
    let set = random_set(&mut rng, 40, 6, 4);
    let expected = fit_classes(&set).iter().map(|f| f.evidence / 40.0).sum::<f64>() / 4.0;
    assert!((score_logme(&set).unwrap() - expected).abs() < 1e-12);
}

/// Weighted tau by direct enumeration of ordered pairs with ranks counted
/// from scratch.
fn pair_sum_tau(truth: &[f64], scores: &[f64], weight_by: &[f64]) -> f64 {
    let l = truth.len();
    let rank = |i: usize| {
        (0..l)
            .filter(|&j| weight_by[j] > weight_by[i] || (weight_by[j] == weight_by[i] && j < i))
            .count() as f64
    };
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..l {
        for j in 0..l {
            if i == j {
                continue;
            }
            let w = 1.0 / (1.0 + rank(i)) + 1.0 / (1.0 + rank(j));
            let agree = (truth[i] - truth[j]) * (scores[i] - scores[j]);
            let s = if agree > 0.0 {
                1.0
            } else if agree < 0.0 {
                -1.0
            } else {
                0.0
            };
            num += w * s;
            den += w;
        }
    }
    num / den
}

#[test]
fn tau_matches_pair_enumeration() {
    let mut rng = SplitMix64::new(77);
    for l in 2..=9 {
        for _ in 0..100 {
            // coarse values so ties occur
            let truth: Vec<f64> = (0..l).map(|_| rng.next_index(5) as f64).collect();
            let scores: Vec<f64> = (0..l).map(|_| rng.next_normal()).collect();
            let by_truth = pair_sum_tau(&truth, &scores, &truth);
            let sym = 0.5 * (by_truth + pair_sum_tau(&truth, &scores, &scores));
            let a = weighted_kendall_tau(&truth, &scores, Weighting::TruthRanks).unwrap();
            let b = weighted_kendall_tau(&truth, &scores, Weighting::Symmetric).unwrap();
            assert!((a - by_truth).abs() < 1e-12);
            assert!((b - sym).abs() < 1e-12);
        }
    }
}
