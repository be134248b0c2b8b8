use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context as _, Result};
use serde::Serialize;
use serde_json::{json, Value};
use terank_core::{
    improvement_summary, rank_and_report, Error, MetricId, PerturbMode, RankingReport,
    ScoreRecord,
};

use crate::args::{EvaluateArgs, Format};
use crate::commands::{load_truth_table, Context};
use crate::manifest::{stable_digest, write_json, write_records, RecordsFile, RunManifest};
use crate::UsageError;

#[derive(Serialize)]
struct ReportFile<'a> {
    manifest: &'a RunManifest,
    report: &'a RankingReport,
}

/// Reads a score file; returns its records, the dataset it names and a
/// digest that ignores timing.
fn read_scores(path: &Path) -> Result<(Vec<ScoreRecord>, Option<String>, String)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(Error::from)
        .with_context(|| format!("{} is not a JSON score file", path.display()))?;
    let digest = stable_digest(&value);
    let file: RecordsFile<ScoreRecord> = serde_json::from_value(value)
        .map_err(Error::from)
        .with_context(|| format!("{} is not a JSON score file", path.display()))?;
    let dataset = file.manifest.config.get("dataset").and_then(Value::as_str).map(str::to_string);
    Ok((file.records, dataset, digest))
}

pub fn run(ctx: &Context, args: &EvaluateArgs) -> Result<()> {
    let dir = ctx.out_dir("evaluate")?;
    let format = ctx.format_or(Format::Json);
    let mut manifest = RunManifest::new("evaluate", Value::Null, ctx.jobs, ctx.out.as_deref());

    let start = Instant::now();
    let mut records = Vec::new();
    let mut datasets = BTreeSet::new();
    for path in &args.scores {
        let (recs, dataset, digest) = read_scores(path)?;
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        manifest.add_input(name, digest);
        datasets.extend(dataset);
        records.extend(recs);
    }
    let dataset = match (&args.dataset, datasets.len()) {
        (Some(d), _) => d.clone(),
        (None, 1) => datasets.into_iter().next().unwrap(),
        (None, 0) => bail!(UsageError("score files name no dataset; pass --dataset".into())),
        (None, _) => bail!(UsageError(format!(
            "score files name several datasets ({}); pass --dataset",
            datasets.into_iter().collect::<Vec<_>>().join(", ")
        ))),
    };
    let truth = load_truth_table(&args.truth, &mut manifest)?;
    manifest.config = json!({
        "dataset": dataset,
        "truth": args.truth,
        "format": format,
    });
    manifest.record_step("load", start);

    let start = Instant::now();
    let mut groups: BTreeMap<(MetricId, PerturbMode), Vec<ScoreRecord>> = BTreeMap::new();
    for r in records {
        let group = groups.entry((r.metric, r.mode)).or_default();
        if group.iter().any(|g| g.model_id == r.model_id) {
            return Err(Error::DuplicateKey(format!("{} {}/{}", r.model_id, r.metric, r.mode)).into());
        }
        group.push(r);
    }
    let mut reports = Vec::with_capacity(groups.len());
    for ((metric, mode), group) in &groups {
        let report = rank_and_report(
            group,
            &truth,
            &dataset,
            args.truth.regime,
            args.truth.pool,
            args.truth.weighting,
        )
        .with_context(|| format!("ranking {metric}/{mode}"))?;
        reports.push(report);
    }
    let mut summary = Vec::new();
    let baseline: Vec<RankingReport> =
        reports.iter().filter(|r| r.perturb_mode == PerturbMode::None).cloned().collect();
    for mode in PerturbMode::ALL.into_iter().filter(|m| m.is_perturbed()) {
        let after: Vec<RankingReport> =
            reports.iter().filter(|r| r.perturb_mode == mode).cloned().collect();
        let before: Vec<RankingReport> = baseline
            .iter()
            .filter(|b| after.iter().any(|a| a.metric == b.metric))
            .cloned()
            .collect();
        if !before.is_empty() {
            summary.extend(improvement_summary(&before, &after)?);
        }
    }
    manifest.record_step("rank", start);

    for report in &reports {
        let stem = format!("{}-{}", report.metric, report.perturb_mode);
        write_json(
            &dir.join(format!("report-{stem}.json")),
            &ReportFile {
                manifest: &manifest,
                report,
            },
        )?;
        let plot = dir.join(format!("plot-{stem}.csv"));
        let file = fs::File::create(&plot).with_context(|| format!("creating {}", plot.display()))?;
        report.write_plot_csv(file)?;
    }
    let ext = match format {
        Format::Json => "json",
        Format::Csv => "csv",
    };
    write_records(&manifest, &summary, format, Some(&dir.join(format!("summary.{ext}"))))?;

    println!("{:<7} {:<8} {:>8}", "metric", "mode", "tau_w");
    for r in &reports {
        println!("{:<7} {:<8} {:>8.4}", r.metric, r.perturb_mode, r.tau_w);
    }
    for row in &summary {
        let pct = row
            .relative_improvement_pct
            .map_or_else(|| "n/a".to_string(), |p| format!("{p:+.2}%"));
        println!(
            "{} {} vs {}: {:.4} -> {:.4} ({pct})",
            row.metric, row.after_mode, row.before_mode, row.mean_before, row.mean_after
        );
    }
    Ok(())
}
