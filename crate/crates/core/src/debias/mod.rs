//! Ratio estimation, edge reweighting and the group-score regularizer.

mod ratios;
mod regularizer;
mod unbiased;

pub use ratios::{edge_weight, estimate_ratios, EdgeWeight, RatioSource, RatioTable};
pub use regularizer::{
    evaluate_regularizer, regularizer_scale, regularizer_term, sample_group_pairs,
    sample_member_pairs, GroupPair, GroupSample, GroupScore, PairGradient, RegularizerTerm,
};
pub use unbiased::{verify_unbiased_expectation, MAX_ENUMERATION_NODES};
