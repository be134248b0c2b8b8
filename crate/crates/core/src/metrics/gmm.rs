//! Diagonal-covariance Gaussian mixture fitted by EM.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::metrics::log_sum_exp;
use crate::synth::SplitMix64;

pub const VARIANCE_FLOOR: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 200;
pub const TOLERANCE: f64 = 1e-4;
/// Lloyd iterations that refine the k-means++ seeds before EM.
pub const KMEANS_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    /// K x d.
    pub means: DMatrix<f64>,
    /// K x d, every entry >= [`VARIANCE_FLOOR`].
    pub variances: DMatrix<f64>,
    /// N x K posteriors p(v | x_i) of the fitting data.
    pub responsibilities: DMatrix<f64>,
    /// Total log-likelihood after each E step.
    pub log_likelihood: Vec<f64>,
}

impl GmmModel {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn final_log_likelihood(&self) -> f64 {
        *self.log_likelihood.last().unwrap()
    }
}

/// k-means++ seeding: first centre uniform, the rest proportional to the
/// squared distance to the nearest chosen centre. Candidates are visited in
/// lexicographic row order so the seeding ignores sample order.
fn kmeans_pp(x: &DMatrix<f64>, k: usize, rng: &mut SplitMix64) -> DMatrix<f64> {
    let n = x.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b).iter())
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut centres = DMatrix::zeros(k, x.ncols());
    let first = order[rng.next_index(n)];
    centres.row_mut(0).copy_from(&x.row(first));
    let mut nearest: Vec<f64> = order
        .iter()
        .map(|&i| (x.row(i) - x.row(first)).norm_squared())
        .collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let slot = if total > 0.0 {
            let target = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (s, &w) in nearest.iter().enumerate() {
                acc += w;
                if acc > target {
                    chosen = s;
                    break;
                }
            }
            chosen
        } else {
            rng.next_index(n)
        };
        let pick = order[slot];
        centres.row_mut(c).copy_from(&x.row(pick));
        for (s, d) in nearest.iter_mut().enumerate() {
            *d = d.min((x.row(order[s]) - x.row(pick)).norm_squared());
        }
    }
    centres
}

fn nearest_centre(x: &DMatrix<f64>, i: usize, centres: &DMatrix<f64>) -> usize {
    (0..centres.nrows())
        .map(|c| (c, (x.row(i) - centres.row(c)).norm_squared()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(0, |(c, _)| c)
}

/// Lloyd's algorithm from `centres`; returns the final hard assignment.
fn lloyd(x: &DMatrix<f64>, centres: &mut DMatrix<f64>) -> Vec<usize> {
    let (n, d) = x.shape();
    let k = centres.nrows();
    let mut assign: Vec<usize> = (0..n).map(|i| nearest_centre(x, i, centres)).collect();
    for _ in 0..KMEANS_ITERATIONS {
        let mut sums = DMatrix::<f64>::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &c) in assign.iter().enumerate() {
            let mut row = sums.row_mut(c);
            row += x.row(i);
            counts[c] += 1;
        }
        for (c, &count) in counts.iter().enumerate() {
            // an emptied cluster keeps its previous centre
            if count > 0 {
                centres.set_row(c, &(sums.row(c) / count as f64));
            }
        }
        let next: Vec<usize> = (0..n).map(|i| nearest_centre(x, i, centres)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    assign
}

/// Log responsibilities and total log-likelihood.
fn e_step(
    x: &DMatrix<f64>,
    weights: &[f64],
    means: &DMatrix<f64>,
    vars: &DMatrix<f64>,
) -> (DMatrix<f64>, f64) {
    let (n, d) = x.shape();
    let k = weights.len();
    let half_log_2pi = 0.5 * d as f64 * (2.0 * PI).ln();
    // per-component constant: log w - 0.5 sum log var - d/2 log 2 pi
    let consts: Vec<f64> = (0..k)
        .map(|v| {
            weights[v].ln() - 0.5 * vars.row(v).iter().map(|s| s.ln()).sum::<f64>() - half_log_2pi
        })
        .collect();
    let mut log_resp = DMatrix::zeros(n, k);
    let mut total = 0.0;
    for i in 0..n {
        for v in 0..k {
            let mut q = 0.0;
            for j in 0..d {
                q += (x[(i, j)] - means[(v, j)]).powi(2) / vars[(v, j)];
            }
            log_resp[(i, v)] = consts[v] - 0.5 * q;
        }
        let lse = log_sum_exp(log_resp.row(i).iter().copied());
        total += lse;
        for v in 0..k {
            log_resp[(i, v)] -= lse;
        }
    }
    (log_resp.map(f64::exp), total)
}

fn m_step(
    x: &DMatrix<f64>,
    resp: &DMatrix<f64>,
    weights: &mut [f64],
    means: &mut DMatrix<f64>,
    vars: &mut DMatrix<f64>,
) {
    let (n, d) = x.shape();
    for v in 0..weights.len() {
        let mass: f64 = resp.column(v).sum();
        weights[v] = mass / n as f64;
        if mass <= 0.0 {
            // empty component keeps its previous location
            continue;
        }
        for j in 0..d {
            let mu = (0..n).map(|i| resp[(i, v)] * x[(i, j)]).sum::<f64>() / mass;
            let var = (0..n).map(|i| resp[(i, v)] * (x[(i, j)] - mu).powi(2)).sum::<f64>() / mass;
            means[(v, j)] = mu;
            vars[(v, j)] = var.max(VARIANCE_FLOOR);
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
}

/// Fits `components` diagonal Gaussians to the rows of `x`.
pub fn fit_gmm(x: &DMatrix<f64>, components: usize, seed: u64) -> Result<GmmModel> {
    let (n, d) = x.shape();
    if components == 0 {
        return Err(Error::InvalidConfig("GMM needs at least one component".into()));
    }
    if components > n {
        return Err(Error::TooSmall {
            what: "samples for the requested GMM components",
            needed: components,
            got: n,
        });
    }
    let mut rng = SplitMix64::new(seed);
    let mut means = kmeans_pp(x, components, &mut rng);
    let assign = lloyd(x, &mut means);
    // initial parameters from the hard clusters; empty clusters start broad
    let mut hard = DMatrix::<f64>::zeros(n, components);
    for (i, &c) in assign.iter().enumerate() {
        hard[(i, c)] = 1.0;
    }
    let global_mean = x.row_mean();
    let global_var: Vec<f64> = (0..d)
        .map(|j| {
            let v = x.column(j).iter().map(|v| (v - global_mean[j]).powi(2)).sum::<f64>() / n as f64;
            v.max(VARIANCE_FLOOR)
        })
        .collect();
    let mut vars = DMatrix::from_fn(components, d, |_, j| global_var[j]);
    let mut weights = vec![1.0 / components as f64; components];
    m_step(x, &hard, &mut weights, &mut means, &mut vars);
    for w in weights.iter_mut() {
        // keep every component alive for the first E step
        *w = w.max(1.0 / (n as f64 * components as f64));
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let mut trace = Vec::new();
    let mut resp;
    let mut iteration = 0;
    loop {
        let (r, ll) = e_step(x, &weights, &means, &vars);
        resp = r;
        if !ll.is_finite() {
            return Err(Error::Numeric("GMM log-likelihood is not finite".into()));
        }
        let converged = trace
            .last()
            .is_some_and(|&prev: &f64| (ll - prev).abs() <= TOLERANCE * prev.abs().max(f64::MIN_POSITIVE));
        trace.push(ll);
        if converged || iteration == MAX_ITERATIONS {
            break;
        }
        m_step(x, &resp, &mut weights, &mut means, &mut vars);
        iteration += 1;
    }
    Ok(GmmModel {
        weights,
        means,
        variances: vars,
        responsibilities: resp,
        log_likelihood: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gen_class_gaussians;

    #[test]
    fn single_component_is_closed_form() {
        let set = gen_class_gaussians(3, 30, 4, 2.0, 1.0, 1).unwrap();
        let x = set.features();
        let g = fit_gmm(x, 1, 0).unwrap();
        assert_eq!(g.weights, vec![1.0]);
        let mean = x.row_mean();
        for j in 0..4 {
            assert!((g.means[(0, j)] - mean[j]).abs() < 1e-12);
            let var = x.column(j).iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / x.nrows() as f64;
            assert!((g.variances[(0, j)] - var.max(VARIANCE_FLOOR)).abs() < 1e-12);
        }
    }

    #[test]
    fn separated_blobs_get_confident_posteriors() {
        let set = gen_class_gaussians(2, 100, 3, 20.0, 1.0, 5).unwrap();
        let g = fit_gmm(set.features(), 2, 7).unwrap();
        // components may come out in either order
        let comp_of_class: Vec<usize> = set
            .partition()
            .iter()
            .map(|rows| if g.responsibilities[(rows[0], 0)] > 0.5 { 0 } else { 1 })
            .collect();
        assert_ne!(comp_of_class[0], comp_of_class[1]);
        for (i, &l) in set.labels().iter().enumerate() {
            assert!(g.responsibilities[(i, comp_of_class[l as usize])] >= 0.99);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let set = gen_class_gaussians(3, 40, 5, 1.0, 1.0, 2).unwrap();
        let a = fit_gmm(set.features(), 3, 11).unwrap();
        let b = fit_gmm(set.features(), 3, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn log_likelihood_non_decreasing() {
        for seed in 0..10 {
            let set = gen_class_gaussians(4, 30, 3, 1.0, 1.0, seed).unwrap();
            let g = fit_gmm(set.features(), 4, seed).unwrap();
            for w in g.log_likelihood.windows(2) {
                assert!(w[1] >= w[0] - 1e-8, "seed {seed}: {:?}", g.log_likelihood);
            }
            assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(g.variances.iter().all(|&v| v >= VARIANCE_FLOOR));
        }
    }

    #[test]
    fn too_many_components() {
        let x = DMatrix::from_fn(3, 2, |i, j| (i + j) as f64);
        assert!(fit_gmm(&x, 4, 0).is_err());
        assert!(fit_gmm(&x, 0, 0).is_err());
    }
}
