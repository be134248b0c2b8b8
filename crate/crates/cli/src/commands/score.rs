use std::time::Instant;

use anyhow::Result;
use serde_json::json;

use crate::args::{modes, Format, ScoreArgs};
use crate::commands::{perturb_config, score_models, Context};
use crate::inputs::load_all;
use crate::manifest::{write_records, RunManifest};

pub fn run(ctx: &Context, args: &ScoreArgs) -> Result<()> {
    let metrics = args.metrics.metrics();
    let modes = modes(&args.mode);
    let pca = args.pca.target();
    let base = perturb_config(&args.perturb);
    base.validate()?;
    let format = ctx.format_or(Format::Json);

    let config = json!({
        "seed": ctx.seed,
        "dataset": args.input.dataset,
        "label_col": args.input.label_col,
        "metrics": metrics,
        "modes": modes,
        "perturb": args.perturb,
        "pca": pca,
        "nleep_k": args.metrics.nleep_k,
        "lda_eps": args.metrics.lda_eps,
        "format": format,
    });
    let mut manifest = RunManifest::new("score", config, ctx.jobs, ctx.out.as_deref());

    let start = Instant::now();
    let sets = load_all(&args.input, &mut manifest)?;
    manifest.record_step("load", start);

    let start = Instant::now();
    let mut records = Vec::with_capacity(sets.len() * metrics.len() * modes.len());
    for &metric in &metrics {
        for &mode in &modes {
            let cfg = base.with_mode(mode);
            records.extend(score_models(&sets, metric, &cfg, pca, &args.metrics, ctx.seed)?);
        }
    }
    manifest.record_step("score", start);

    write_records(&manifest, &records, format, ctx.out.as_deref())?;
    if ctx.out.is_some() {
        println!("{:<14} {:<7} {:<8} {:>14}", "model", "metric", "mode", "score");
        for r in &records {
            println!("{:<14} {:<7} {:<8} {:>14.6}", r.model_id, r.metric, r.mode, r.score);
        }
    }
    Ok(())
}
