use std::time::Instant;

use anyhow::Result;
use serde::Serialize;
use serde_json::json;
use terank_core::{rank_and_report, MetricId, PerturbConfig, PerturbMode};

use crate::args::{Format, SweepArgs};
use crate::commands::{load_truth_table, perturb_config, score_models, Context};
use crate::inputs::load_all;
use crate::manifest::{write_records, RunManifest};

#[derive(Debug, Serialize)]
struct SweepRow {
    varied: &'static str,
    alpha: f64,
    sigma: f64,
    metric: MetricId,
    tau_w: f64,
}

pub fn run(ctx: &Context, args: &SweepArgs) -> Result<()> {
    let metrics = args.metrics.metrics();
    let pca = args.pca.target();
    let base = perturb_config(&args.perturb).with_mode(PerturbMode::Sa);
    base.validate()?;
    let format = ctx.format_or(Format::Csv);
    let config = json!({
        "seed": ctx.seed,
        "dataset": args.input.dataset,
        "label_col": args.input.label_col,
        "metrics": metrics,
        "pca": pca,
        "nleep_k": args.metrics.nleep_k,
        "lda_eps": args.metrics.lda_eps,
        "perturb": args.perturb,
        "alpha_grid": args.alpha_grid,
        "sigma_grid": args.sigma_grid,
        "truth": args.truth,
        "format": format,
    });
    let mut manifest = RunManifest::new("sweep", config, ctx.jobs, ctx.out.as_deref());

    let start = Instant::now();
    let sets = load_all(&args.input, &mut manifest)?;
    let truth = load_truth_table(&args.truth, &mut manifest)?;
    manifest.record_step("load", start);

    // one hyper-parameter varies while the other stays at its flag value
    let settings: Vec<(&'static str, PerturbConfig)> = args
        .alpha_grid
        .iter()
        .map(|&alpha| ("alpha", PerturbConfig { alpha, ..base }))
        .chain(args.sigma_grid.iter().map(|&sigma| ("sigma", PerturbConfig { sigma, ..base })))
        .collect();

    let start = Instant::now();
    let mut rows = Vec::with_capacity(metrics.len() * settings.len());
    for &metric in &metrics {
        for (varied, cfg) in &settings {
            let records = score_models(&sets, metric, cfg, pca, &args.metrics, ctx.seed)?;
            let report = rank_and_report(
                &records,
                &truth,
                &args.input.dataset,
                args.truth.regime,
                args.truth.pool,
                args.truth.weighting,
            )?;
            rows.push(SweepRow {
                varied,
                alpha: cfg.alpha,
                sigma: cfg.sigma,
                metric,
                tau_w: report.tau_w,
            });
        }
    }
    manifest.record_step("sweep", start);
    write_records(&manifest, &rows, format, ctx.out.as_deref())
}
