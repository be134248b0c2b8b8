use std::time::Instant;

use anyhow::Result;
use serde::Serialize;
use serde_json::json;
use terank_core::metrics::score_embedding;
use terank_core::perturbation::sa_perturb;
use terank_core::{EmbeddingSet, MetricId, PerturbMode};

use crate::args::{BenchArgs, Format};
use crate::commands::{metric_params, perturb_config, Context};
use crate::inputs::load_all;
use crate::manifest::{write_records, RunManifest};

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub metric: MetricId,
    /// `raw` (full dimension, no reduction), `none` (reduced) or `sa`.
    pub mode: String,
    pub models: usize,
    pub mean_dim: f64,
    /// Reduction and perturbation; zero for `raw`.
    pub prep_seconds: f64,
    /// Metric alone on the prepared features. Fastest repeat, summed over models.
    pub metric_seconds: f64,
    pub total_seconds: f64,
    /// `metric_seconds` relative to the reduced, unperturbed run.
    pub ratio_to_none: f64,
}

/// Fastest of `repeats` runs of `f`.
fn time_min(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..repeats {
        let start = Instant::now();
        f()?;
        best = best.min(start.elapsed().as_secs_f64());
    }
    Ok(best)
}

pub fn run(ctx: &Context, args: &BenchArgs) -> Result<()> {
    let metrics = args.metrics.metrics();
    let pca = args.pca.target();
    let base = perturb_config(&args.perturb);
    base.validate()?;
    let format = ctx.format_or(Format::Csv);
    let config = json!({
        "seed": ctx.seed,
        "dataset": args.input.dataset,
        "metrics": metrics,
        "pca": pca,
        "perturb": args.perturb,
        "nleep_k": args.metrics.nleep_k,
        "lda_eps": args.metrics.lda_eps,
        "repeats": args.repeats,
        "format": format,
    });
    let mut manifest = RunManifest::new("bench", config, ctx.jobs, ctx.out.as_deref());
    let sets = load_all(&args.input, &mut manifest)?;

    // timings run on one thread so the modes are comparable
    let start = Instant::now();
    let mut prepared: Vec<(&str, Vec<EmbeddingSet>, f64)> = vec![("raw", sets.clone(), 0.0)];
    for (name, mode) in [("none", PerturbMode::None), ("sa", PerturbMode::Sa)] {
        let cfg = base.with_mode(mode);
        let mut out = Vec::new();
        let prep = time_min(args.repeats, || {
            out = sets.iter().map(|s| sa_perturb(s, pca, &cfg)).collect::<terank_core::Result<_>>()?;
            Ok(())
        })?;
        prepared.push((name, out, prep));
    }
    let mut rows = Vec::new();
    for &metric in &metrics {
        let mut timed = Vec::with_capacity(prepared.len());
        for (mode, feats, prep) in &prepared {
            let secs = time_min(args.repeats, || {
                for (i, set) in feats.iter().enumerate() {
                    score_embedding(set, metric, &metric_params(&args.metrics, ctx.seed, i))?;
                }
                Ok(())
            })?;
            let dim = feats.iter().map(|s| s.dim() as f64).sum::<f64>() / feats.len() as f64;
            timed.push((*mode, dim, *prep, secs));
        }
        let none = timed.iter().find(|t| t.0 == "none").map_or(1.0, |t| t.3);
        for (mode, dim, prep, secs) in timed {
            rows.push(BenchRow {
                metric,
                mode: mode.to_string(),
                models: sets.len(),
                mean_dim: dim,
                prep_seconds: prep,
                metric_seconds: secs,
                total_seconds: prep + secs,
                ratio_to_none: secs / none.max(f64::MIN_POSITIVE),
            });
        }
    }
    manifest.record_step("bench", start);
    write_records(&manifest, &rows, format, ctx.out.as_deref())?;
    if ctx.out.is_some() {
        println!("{:<7} {:<5} {:>8} {:>10} {:>10} {:>8}", "metric", "mode", "dim", "prep_s", "metric_s", "ratio");
        for r in &rows {
            println!(
                "{:<7} {:<5} {:>8.1} {:>10.4} {:>10.4} {:>8.3}",
                r.metric, r.mode, r.mean_dim, r.prep_seconds, r.metric_seconds, r.ratio_to_none
            );
        }
    }
    Ok(())
}
