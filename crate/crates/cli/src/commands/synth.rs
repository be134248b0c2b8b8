use std::fs;
use std::time::Instant;

use anyhow::{Context as _, Result};
use serde_json::json;
use terank_core::embeddings::save_emb1;
use terank_core::synth::gen_model_zoo;
use terank_core::ZooConfig;

use crate::args::SynthArgs;
use crate::commands::Context;
use crate::manifest::{file_digest, write_json, RunManifest};

pub fn run(ctx: &Context, args: &SynthArgs) -> Result<()> {
    let dir = ctx.out_dir("synth")?;
    let cfg = ZooConfig::from_ranges(
        args.models,
        args.classes,
        args.per_class,
        args.dim,
        args.rho_range,
        args.noise_range,
        ctx.seed,
    );
    let mut manifest = RunManifest::new(
        "synth",
        json!({ "seed": ctx.seed, "zoo": args }),
        ctx.jobs,
        ctx.out.as_deref(),
    );

    let start = Instant::now();
    let (sets, truth) = gen_model_zoo(&cfg)?;
    manifest.record_step("generate", start);

    let start = Instant::now();
    for set in &sets {
        let name = format!("{}.emb1", set.model_id());
        let path = dir.join(&name);
        save_emb1(set, &path)?;
        manifest.add_input(name, file_digest(&path)?);
    }
    let truth_path = dir.join("truth.csv");
    let file = fs::File::create(&truth_path)
        .with_context(|| format!("creating {}", truth_path.display()))?;
    truth.write_csv(file)?;
    manifest.add_input("truth.csv", file_digest(&truth_path)?);
    manifest.record_step("write", start);
    write_json(&dir.join("manifest.json"), &manifest)?;

    println!("{:<10} {:>8} {:>8} {:>9}", "model", "rho", "noise", "accuracy");
    for (m, r) in truth.records().iter().enumerate() {
        println!("{:<10} {:>8.3} {:>8.3} {:>8.2}%", r.model, cfg.rho[m], cfg.noise[m], r.accuracy);
    }
    Ok(())
}
