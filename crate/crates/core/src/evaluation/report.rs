use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::tau::{weighted_kendall_tau, Weighting};
use crate::evaluation::truth::{Pool, Regime, TruthTable};
use crate::metrics::MetricId;
use crate::perturbation::PerturbMode;
use crate::pipeline::ScoreRecord;

/// 0-based ranks in descending order of `values` (rank 0 = largest). Equal
/// values keep their input order.
pub fn ranks_descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0; values.len()];
    for (rank, &i) in order.iter().enumerate() {
        ranks[i] = rank;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub id: String,
    pub score: f64,
    pub accuracy: f64,
    pub pred_rank: usize,
    pub truth_rank: usize,
}

/// Ranking quality of one metric on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub metric: MetricId,
    pub dataset: String,
    pub regime: Regime,
    pub pool: Pool,
    pub perturb_mode: PerturbMode,
    pub weighting: Weighting,
    pub tau_w: f64,
    pub models: Vec<ModelEntry>,
    pub wall_time_s: f64,
}

impl RankingReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: RankingReport = serde_json::from_str(text)?;
        if !(-1.0..=1.0).contains(&report.tau_w) {
            return Err(Error::Numeric(format!("tau_w {} outside [-1, 1]", report.tau_w)));
        }
        Ok(report)
    }

    /// Plot-ready `score,accuracy,model` rows.
    pub fn write_plot_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["score", "accuracy", "model"])?;
        for m in &self.models {
            w.write_record([m.score.to_string(), m.accuracy.to_string(), m.id.clone()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Ranks the scored models of one (metric, mode) and correlates the ranking
/// with the ground truth for `(dataset, regime, pool)`.
pub fn rank_and_report(
    scores: &[ScoreRecord],
    truth: &TruthTable,
    dataset: &str,
    regime: Regime,
    pool: Pool,
    weighting: Weighting,
) -> Result<RankingReport> {
    let first = scores.first().ok_or(Error::TooSmall {
        what: "scored models",
        needed: 2,
        got: 0,
    })?;
    if let Some(other) = scores
        .iter()
        .find(|r| r.metric != first.metric || r.mode != first.mode)
    {
        return Err(Error::InvalidConfig(format!(
            "cannot rank {}/{} together with {}/{}",
            first.metric, first.mode, other.metric, other.mode
        )));
    }
    let accuracy: Vec<f64> = scores
        .iter()
        .map(|r| {
            truth
                .get(&r.model_id, dataset, regime, pool)
                .ok_or_else(|| Error::MissingModel(r.model_id.clone()))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = scores.iter().map(|r| r.score).collect();
    let tau_w = weighted_kendall_tau(&accuracy, &values, weighting)?;
    let pred = ranks_descending(&values);
    let truth_ranks = ranks_descending(&accuracy);
    let models = scores
        .iter()
        .enumerate()
        .map(|(i, r)| ModelEntry {
            id: r.model_id.clone(),
            score: r.score,
            accuracy: accuracy[i],
            pred_rank: pred[i],
            truth_rank: truth_ranks[i],
        })
        .collect();
    Ok(RankingReport {
        metric: first.metric,
        dataset: dataset.to_string(),
        regime,
        pool,
        perturb_mode: first.mode,
        weighting,
        tau_w,
        models,
        wall_time_s: scores.iter().map(|r| r.wall_time_s).sum(),
    })
}

/// Mean tau_w per metric before and after, with relative change in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRow {
    pub metric: MetricId,
    pub before_mode: PerturbMode,
    pub after_mode: PerturbMode,
    pub datasets: usize,
    pub mean_before: f64,
    pub mean_after: f64,
    /// `(after - before) / |before| * 100`; `None` when the baseline mean is 0.
    pub relative_improvement_pct: Option<f64>,
}

/// Pairs reports by (metric, dataset) and summarises each metric.
pub fn improvement_summary(
    before: &[RankingReport],
    after: &[RankingReport],
) -> Result<Vec<ImprovementRow>> {
    let unpaired = |r: &RankingReport| Error::UnpairedReport {
        metric: r.metric.to_string(),
        dataset: r.dataset.clone(),
    };
    let mut after_by_key: BTreeMap<(MetricId, &str), &RankingReport> = BTreeMap::new();
    for r in after {
        if after_by_key.insert((r.metric, r.dataset.as_str()), r).is_some() {
            return Err(unpaired(r));
        }
    }
    // metric -> (before taus, after taus, modes)
    let mut groups: BTreeMap<MetricId, (Vec<f64>, Vec<f64>, PerturbMode, PerturbMode)> = BTreeMap::new();
    let mut seen = BTreeMap::new();
    for b in before {
        if seen.insert((b.metric, b.dataset.as_str()), ()).is_some() {
            return Err(unpaired(b));
        }
        let a = after_by_key
            .remove(&(b.metric, b.dataset.as_str()))
            .ok_or_else(|| unpaired(b))?;
        let g = groups
            .entry(b.metric)
            .or_insert_with(|| (Vec::new(), Vec::new(), b.perturb_mode, a.perturb_mode));
        g.0.push(b.tau_w);
        g.1.push(a.tau_w);
    }
    if let Some(r) = after_by_key.values().next() {
        return Err(unpaired(r));
    }
    Ok(groups
        .into_iter()
        .map(|(metric, (b, a, before_mode, after_mode))| {
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let (mb, ma) = (mean(&b), mean(&a));
            ImprovementRow {
                metric,
                before_mode,
                after_mode,
                datasets: b.len(),
                mean_before: mb,
                mean_after: ma,
                relative_improvement_pct: (mb != 0.0).then(|| (ma - mb) / mb.abs() * 100.0),
            }
        })
        .collect())
}
