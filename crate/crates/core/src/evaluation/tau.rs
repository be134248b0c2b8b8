use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::report::ranks_descending;

/// Whose ranks set the pair weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Ranks of the ground truth only.
    TruthRanks,
    /// Average of the truth-weighted and score-weighted coefficients.
    #[default]
    Symmetric,
}

impl Weighting {
    pub fn as_str(self) -> &'static str {
        match self {
            Weighting::TruthRanks => "truth_ranks",
            Weighting::Symmetric => "symmetric",
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truth_ranks" | "truth" => Ok(Weighting::TruthRanks),
            "symmetric" => Ok(Weighting::Symmetric),
            other => Err(Error::InvalidConfig(format!("unknown weighting {other:?}"))),
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Hyperbolically weighted tau with pair weight `1/(1+r_i) + 1/(1+r_j)`,
/// `r` being 0-based descending ranks of `weight_by`.
fn tau_weighted_by(truth: &[f64], scores: &[f64], weight_by: &[f64]) -> f64 {
    let ranks = ranks_descending(weight_by);
    let inv: Vec<f64> = ranks.iter().map(|&r| 1.0 / (1.0 + r as f64)).collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..truth.len() {
        for j in i + 1..truth.len() {
            let w = inv[i] + inv[j];
            num += w * sign(truth[i] - truth[j]) * sign(scores[i] - scores[j]);
            den += w;
        }
    }
    num / den
}

/// Weighted Kendall tau between ground-truth values and metric scores.
/// Ties contribute zero to the numerator.
pub fn weighted_kendall_tau(truth: &[f64], scores: &[f64], weighting: Weighting) -> Result<f64> {
    if truth.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: scores.len(),
        });
    }
    if truth.len() < 2 {
        return Err(Error::TooSmall {
            what: "ranked items",
            needed: 2,
            got: truth.len(),
        });
    }
    if truth.iter().chain(scores).any(|v| v.is_nan()) {
        return Err(Error::Numeric("NaN in ranking input".into()));
    }
    let by_truth = tau_weighted_by(truth, scores, truth);
    Ok(match weighting {
        Weighting::TruthRanks => by_truth,
        Weighting::Symmetric => 0.5 * (by_truth + tau_weighted_by(truth, scores, scores)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SplitMix64;
    use proptest::prelude::*;

    #[test]
    fn perfect_and_reversed() {
        let t = [90.0, 80.0, 85.0, 70.0];
        for w in [Weighting::TruthRanks, Weighting::Symmetric] {
            assert_eq!(weighted_kendall_tau(&t, &[4.0, 2.0, 3.0, 1.0], w).unwrap(), 1.0);
            assert_eq!(weighted_kendall_tau(&t, &[1.0, 3.0, 2.0, 4.0], w).unwrap(), -1.0);
        }
    }

    #[test]
    fn hand_evaluated_three_items() {
        // truth ranks: item0 -> 0, item1 -> 1, item2 -> 2; scores swap 1 and 2
        let t = [3.0, 2.0, 1.0];
        let s = [3.0, 1.0, 2.0];
        // pairs (0,1): w = 1 + 1/2, concordant; (0,2): 1 + 1/3, concordant;
        // (1,2): 1/2 + 1/3, discordant
        let num = 1.5 + 4.0 / 3.0 - 5.0 / 6.0;
        let den = 1.5 + 4.0 / 3.0 + 5.0 / 6.0;
        let by_truth = weighted_kendall_tau(&t, &s, Weighting::TruthRanks).unwrap();
        assert!((by_truth - num / den).abs() < 1e-15);
        // score ranks: item0 -> 0, item2 -> 1, item1 -> 2
        let num_s = (1.0 + 1.0 / 3.0) + 1.5 - (1.0 / 3.0 + 0.5);
        let den_s = (1.0 + 1.0 / 3.0) + 1.5 + (1.0 / 3.0 + 0.5);
        let sym = weighted_kendall_tau(&t, &s, Weighting::Symmetric).unwrap();
        assert!((sym - 0.5 * (num / den + num_s / den_s)).abs() < 1e-15);
    }

    #[test]
    fn ties_contribute_zero() {
        let t = [1.0, 2.0];
        assert_eq!(weighted_kendall_tau(&t, &[5.0, 5.0], Weighting::TruthRanks).unwrap(), 0.0);
    }

    #[test]
    fn input_errors() {
        assert!(weighted_kendall_tau(&[1.0], &[1.0], Weighting::Symmetric).is_err());
        assert!(weighted_kendall_tau(&[1.0, 2.0], &[1.0], Weighting::Symmetric).is_err());
        assert!(weighted_kendall_tau(&[1.0, f64::NAN], &[1.0, 2.0], Weighting::Symmetric).is_err());
    }

    #[test]
    fn range_on_random_inputs() {
        let mut rng = SplitMix64::new(1);
        for _ in 0..500 {
            let l = 2 + rng.next_index(10);
            let t: Vec<f64> = (0..l).map(|_| rng.next_f64()).collect();
            let s: Vec<f64> = (0..l).map(|_| (rng.next_f64() * 4.0).round()).collect();
            let v = weighted_kendall_tau(&t, &s, Weighting::Symmetric).unwrap();
            assert!((-1.0..=1.0).contains(&v));
        }
    }

    proptest! {
        #[test]
        fn invariant_under_increasing_transforms(
            pairs in proptest::collection::vec((0.0f64..100.0, -5.0f64..5.0), 2..12),
            shift in -50.0f64..50.0,
        ) {
            let t: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let s: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let s2: Vec<f64> = s.iter().map(|v| v.exp() * 3.0 + 1.0).collect();
            let t2: Vec<f64> = t.iter().map(|v| v + shift).collect();
            for w in [Weighting::TruthRanks, Weighting::Symmetric] {
                let base = weighted_kendall_tau(&t, &s, w).unwrap();
                prop_assert!((weighted_kendall_tau(&t, &s2, w).unwrap() - base).abs() < 1e-12);
                prop_assert!((weighted_kendall_tau(&t2, &s, w).unwrap() - base).abs() < 1e-12);
            }
        }
    }
}
