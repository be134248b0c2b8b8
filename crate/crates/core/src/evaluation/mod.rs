//! Ranking evaluation against fine-tuning ground truth.

mod report;
mod tau;
mod truth;

pub use report::{improvement_summary, rank_and_report, ranks_descending, ModelEntry, ImprovementRow, RankingReport};
pub use tau::{weighted_kendall_tau, Weighting};
pub use truth::{load_truth, Pool, Regime, TruthRecord, TruthTable, BUNDLED_TRUTH};
