use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use terank_core::perturbation::{DEFAULT_ALPHA, DEFAULT_SIGMA};
use terank_core::{AttractDirection, MetricId, PcaTarget, PerturbMode, Pool, Regime, Weighting};

#[derive(Debug, Parser)]
#[command(name = "terank", version, about = "Rank pre-trained models by transferability")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Base seed; model i uses `seed ^ i`.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads [default: all cores].
    #[arg(long, global = true, value_parser = positive_usize)]
    pub jobs: Option<usize>,
    /// Output file, or directory for commands that write several files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every model with every requested metric and mode.
    Score(ScoreArgs),
    /// Rank scored models against ground truth.
    Evaluate(EvaluateArgs),
    /// Vary alpha, then sigma, and record tau_w for each setting.
    Sweep(SweepArgs),
    /// Generate a synthetic model zoo with nearest-centroid ground truth.
    Synth(SynthArgs),
    /// Time each metric on raw, reduced and perturbed features.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Embedding files (.emb1 or .csv) or directories holding them.
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    /// Label column of CSV inputs.
    #[arg(long, default_value = "label")]
    pub label_col: String,
    /// Dataset the embeddings were extracted from.
    #[arg(long, default_value = "synthetic")]
    pub dataset: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MetricArgs {
    /// Repeatable [default: all].
    #[arg(long, value_parser = parse_metric)]
    pub metric: Vec<MetricId>,
    /// GMM components for nleep [default: class count].
    #[arg(long, value_parser = positive_usize)]
    pub nleep_k: Option<usize>,
    /// LDA ridge as a fraction of mean within-class scatter.
    #[arg(long, value_parser = positive_f64, default_value_t = 1e-4)]
    pub lda_eps: f64,
}

impl MetricArgs {
    pub fn metrics(&self) -> Vec<MetricId> {
        if self.metric.is_empty() {
            MetricId::ALL.to_vec()
        } else {
            dedup(&self.metric)
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PcaArgs {
    /// Keep the fewest components reaching this energy fraction [default: 0.8].
    #[arg(long, value_parser = unit_interval, conflicts_with = "pca_rank")]
    pub pca_energy: Option<f64>,
    /// Keep exactly this many components (clamped to the data rank).
    #[arg(long, value_parser = positive_usize)]
    pub pca_rank: Option<usize>,
}

impl PcaArgs {
    pub fn target(&self) -> PcaTarget {
        match (self.pca_energy, self.pca_rank) {
            (_, Some(k)) => PcaTarget::Rank(k),
            (Some(e), None) => PcaTarget::Energy(e),
            (None, None) => PcaTarget::default(),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PerturbArgs {
    #[arg(long, value_parser = non_negative_f64, allow_hyphen_values = true, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, value_parser = non_negative_f64, allow_hyphen_values = true, default_value_t = DEFAULT_SIGMA)]
    pub sigma: f64,
    #[arg(long, value_parser = parse_direction, default_value = "toward")]
    pub attract_dir: AttractDirection,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub metrics: MetricArgs,
    #[command(flatten)]
    pub pca: PcaArgs,
    #[command(flatten)]
    pub perturb: PerturbArgs,
    /// none | spread | attract | sa, repeatable [default: none].
    #[arg(long, value_parser = parse_mode)]
    pub mode: Vec<PerturbMode>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TruthArgs {
    /// Ground-truth CSV [default: the bundled fine-tuning tables].
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_parser = parse_regime, default_value = "synthetic")]
    pub regime: Regime,
    #[arg(long, value_parser = parse_pool, default_value = "supervised")]
    pub pool: Pool,
    #[arg(long, value_parser = parse_weighting, default_value = "symmetric")]
    pub weighting: Weighting,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Score files written by `terank score`.
    #[arg(long, required = true)]
    pub scores: Vec<PathBuf>,
    #[command(flatten)]
    pub truth: TruthArgs,
    /// Dataset key in the truth table [default: the one recorded in the score file].
    #[arg(long)]
    pub dataset: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub metrics: MetricArgs,
    #[command(flatten)]
    pub pca: PcaArgs,
    #[command(flatten)]
    pub truth: TruthArgs,
    /// Alpha values tried with sigma held at --sigma.
    #[arg(long, value_delimiter = ',', value_parser = non_negative_f64, default_values_t = [0.001, 0.005, 0.01, 0.05])]
    pub alpha_grid: Vec<f64>,
    /// Sigma values tried with alpha held at --alpha.
    #[arg(long, value_delimiter = ',', value_parser = non_negative_f64, default_values_t = [0.5, 0.6, 0.7, 0.8, 0.9])]
    pub sigma_grid: Vec<f64>,
    #[command(flatten)]
    pub perturb: PerturbArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, value_parser = positive_usize, default_value_t = 8)]
    pub models: usize,
    #[arg(long, value_parser = positive_usize, default_value_t = 8)]
    pub classes: usize,
    #[arg(long, value_parser = positive_usize, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, value_parser = positive_usize, default_value_t = 16)]
    pub dim: usize,
    /// Centroid spread `a:b`, interpolated linearly across models.
    #[arg(long, value_parser = parse_range, default_value = "10:10")]
    pub rho_range: (f64, f64),
    /// Within-class noise `a:b`, interpolated linearly across models.
    #[arg(long, value_parser = parse_range, default_value = "11:26")]
    pub noise_range: (f64, f64),
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub metrics: MetricArgs,
    #[command(flatten)]
    pub pca: PcaArgs,
    #[command(flatten)]
    pub perturb: PerturbArgs,
    /// Timed runs per cell; the fastest is kept.
    #[arg(long, value_parser = positive_usize, default_value_t = 3)]
    pub repeats: usize,
}

fn dedup<T: PartialEq + Copy>(items: &[T]) -> Vec<T> {
    let mut out = Vec::new();
    for &x in items {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

pub fn modes(requested: &[PerturbMode]) -> Vec<PerturbMode> {
    if requested.is_empty() {
        vec![PerturbMode::None]
    } else {
        dedup(requested)
    }
}

fn parse_metric(s: &str) -> Result<MetricId, String> {
    s.parse().map_err(|_| "expected one of logme, gbc, nleep, lda".to_string())
}

fn parse_mode(s: &str) -> Result<PerturbMode, String> {
    s.parse().map_err(|_| "expected one of none, spread, attract, sa".to_string())
}

fn parse_direction(s: &str) -> Result<AttractDirection, String> {
    s.parse().map_err(|_| "expected toward or literal".to_string())
}

fn parse_regime(s: &str) -> Result<Regime, String> {
    s.parse().map_err(|_| "expected one of vanilla, lbft, lft, synthetic".to_string())
}

fn parse_pool(s: &str) -> Result<Pool, String> {
    s.parse().map_err(|_| "expected supervised or self_supervised".to_string())
}

fn parse_weighting(s: &str) -> Result<Weighting, String> {
    s.parse().map_err(|_| "expected symmetric or truth_ranks".to_string())
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

fn non_negative_f64(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v < 0.0 {
        return Err(format!("must be >= 0, got {v}"));
    }
    Ok(v)
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v <= 0.0 {
        return Err(format!("must be > 0, got {v}"));
    }
    Ok(v)
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if !(v > 0.0 && v <= 1.0) {
        return Err(format!("must lie in (0, 1], got {v}"));
    }
    Ok(v)
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(_) => Err(format!("{s:?} is not a positive integer")),
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected a:b")?;
    Ok((positive_f64(a)?, positive_f64(b)?))
}
