//! Ranking metrics, evaluation runs and the trait–concept analysis.

mod harness;
mod metrics;
mod report;
mod traits;

pub use harness::{
    evaluate_model, run_ablation, run_comparison, run_entries, EvalOptions, RunEntry,
};
pub use metrics::{auc, f1_at_k, ndcg_at_k};
pub use report::{ModelMetrics, PerUserMetrics, RankingReport, RankingRow, ReportKind};
pub use traits::{
    pearson, trait_concept_correlation, ConceptCorrelation, PoleCorrelations, TraitConceptReport,
    DEFAULT_TOP_N,
};

#[cfg(test)]
mod tests;
