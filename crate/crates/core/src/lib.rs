//! Unbiased node embeddings for attributed graphs.
//!
//! The crate estimates how attribute value combinations modify structural edge
//! probabilities, reweights and regularizes embedding training so the learned
//! representation reflects a graph generated without the sensitive
//! attributes, and evaluates the result for leakage, utility and fairness.

pub mod biasgen;
pub mod debias;
pub mod embed;
pub mod error;
pub mod eval;
pub mod graph;
pub mod rng;

pub use debias::{estimate_ratios, RatioTable};
pub use embed::{train, EmbeddingModel, ModelKind, Regime, TrainConfig};
pub use error::{Result, UgeError};
pub use eval::{evaluate, EvalConfig, EvalReport};
pub use graph::{
    build_group_index, load_graph, split_edges, AttributeSchema, AttributedGraph, EdgeSplits,
    GroupIndex, GroupMode, Grouping, PairKey, ProfileIndex,
};
