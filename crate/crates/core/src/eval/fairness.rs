//! Demographic parity and equalized opportunity gaps of predicted edge
//! probabilities across unordered attribute-value combinations.

use std::collections::BTreeMap;

use crate::embed::{sigmoid, EmbeddingModel};
use crate::error::{Result, UgeError};
use crate::graph::{AttributedGraph, EdgeSplits};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledPair {
    pub u: u32,
    pub v: u32,
    pub positive: bool,
}

/// Held-out test positives and negatives of every node.
pub fn evaluation_pairs(splits: &EdgeSplits) -> Vec<LabeledPair> {
    let mut out = Vec::new();
    for (u, ex) in splits.nodes.iter().enumerate() {
        let u = u as u32;
        out.extend(ex.test_pos.iter().map(|&v| LabeledPair {
            u,
            v,
            positive: true,
        }));
        out.extend(ex.test_neg.iter().map(|&v| LabeledPair {
            u,
            v,
            positive: false,
        }));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessResult {
    /// `None` when fewer than two groups qualify.
    pub dp: Option<f64>,
    pub eo: Option<f64>,
    pub dp_groups: usize,
    pub eo_groups: usize,
    /// Groups dropped from either statistic for having too few pairs.
    pub excluded_groups: usize,
    pub pairs: usize,
}

#[derive(Default)]
struct Accumulator {
    all: (f64, usize),
    positive: (f64, usize),
}

fn max_gap(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    Some(hi - lo)
}

/// DP and EO from `(group key, probability, label)` records. A group enters
/// DP when it has at least `min_group_pairs` pairs and EO when it has at
/// least that many positive pairs.
pub fn fairness_from_probabilities<K: Ord + Clone>(
    records: impl IntoIterator<Item = (K, f64, bool)>,
    min_group_pairs: usize,
) -> FairnessResult {
    let mut groups: BTreeMap<K, Accumulator> = BTreeMap::new();
    let mut pairs = 0;
    for (key, p, positive) in records {
        pairs += 1;
        let acc = groups.entry(key).or_default();
        acc.all.0 += p;
        acc.all.1 += 1;
        if positive {
            acc.positive.0 += p;
            acc.positive.1 += 1;
        }
    }
    let mut rates = Vec::new();
    let mut tprs = Vec::new();
    let mut excluded = 0;
    for acc in groups.values() {
        let dp_ok = acc.all.1 >= min_group_pairs;
        let eo_ok = acc.positive.1 >= min_group_pairs;
        if dp_ok {
            rates.push(acc.all.0 / acc.all.1 as f64);
        }
        if eo_ok {
            tprs.push(acc.positive.0 / acc.positive.1 as f64);
        }
        excluded += usize::from(!(dp_ok && eo_ok));
    }
    FairnessResult {
        dp: max_gap(&rates),
        eo: max_gap(&tprs),
        dp_groups: rates.len(),
        eo_groups: tprs.len(),
        excluded_groups: excluded,
        pairs,
    }
}

/// DP/EO of sigmoid scores for one attribute, grouping pairs by the sorted
/// pair of endpoint values.
pub fn fairness_dp_eo(
    model: &EmbeddingModel,
    g: &AttributedGraph,
    pairs: &[LabeledPair],
    attr: usize,
    min_group_pairs: usize,
) -> Result<FairnessResult> {
    if attr >= g.schema().num_attributes() {
        return Err(UgeError::InvalidArgument(format!(
            "no attribute with index {attr}"
        )));
    }
    if min_group_pairs == 0 {
        return Err(UgeError::InvalidArgument(
            "min_group_pairs must be at least 1".into(),
        ));
    }
    if model.num_nodes() != g.num_nodes() {
        return Err(UgeError::SchemaMismatch(format!(
            "model has {} rows, graph {} nodes",
            model.num_nodes(),
            g.num_nodes()
        )));
    }
    let records = pairs.iter().map(|p| {
        let a = g.attributes(p.u as usize)[attr];
        let b = g.attributes(p.v as usize)[attr];
        let key = (a.min(b), a.max(b));
        let prob = sigmoid(model.score_unchecked(p.u as usize, p.v as usize));
        (key, prob, p.positive)
    });
    Ok(fairness_from_probabilities(records, min_group_pairs))
}
