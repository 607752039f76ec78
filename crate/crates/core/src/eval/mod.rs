//! Leakage probe, link-prediction utility and group fairness metrics.

mod fairness;
mod ndcg;
mod probe;
mod report;
mod stats;

pub use fairness::{
    evaluation_pairs, fairness_dp_eo, fairness_from_probabilities, FairnessResult, LabeledPair,
};
pub use ndcg::{ndcg_at_k, ndcg_of_ranking, rank_candidates, NdcgResult};
pub use probe::{micro_f1, probe_micro_f1, ProbeConfig, ProbeResult};
pub use report::{
    evaluate, AttributeMetrics, EvalConfig, EvalReport, CSV_HEADER, FAIRNESS_DEFINITION,
};
pub use stats::{average_ranks, spearman};
