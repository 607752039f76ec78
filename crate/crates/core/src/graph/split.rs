use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;

use super::AttributedGraph;
use crate::error::{Result, UgeError};
use crate::rng::{lane, stream, StreamRng};

/// Positive and negative examples of one node, split into train and test.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeExamples {
    pub train_pos: Vec<u32>,
    pub train_neg: Vec<u32>,
    pub test_pos: Vec<u32>,
    pub test_neg: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSplits {
    /// Indexed by node; skipped and isolated nodes have no examples.
    pub nodes: Vec<NodeExamples>,
    pub skipped: Vec<u32>,
    pub train_frac: f64,
    pub neg_ratio: usize,
}

impl EdgeSplits {
    pub fn node(&self, u: usize) -> &NodeExamples {
        &self.nodes[u]
    }

    pub fn num_train_positives(&self) -> usize {
        self.nodes.iter().map(|n| n.train_pos.len()).sum()
    }

    pub fn num_test_positives(&self) -> usize {
        self.nodes.iter().map(|n| n.test_pos.len()).sum()
    }
}

/// Builds per-node positive/negative examples and splits them into train and
/// test parts.
///
/// Each node draws from its own stream keyed by `(seed, node)`, so results do
/// not depend on the rayon pool size.
pub fn split_edges(
    g: &AttributedGraph,
    train_frac: f64,
    neg_ratio: usize,
    seed: u64,
) -> Result<EdgeSplits> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(UgeError::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_frac}"
        )));
    }
    if neg_ratio < 1 {
        return Err(UgeError::InvalidArgument(
            "negative ratio must be at least 1".into(),
        ));
    }
    let n = g.num_nodes();
    let per_node: Vec<Option<NodeExamples>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let deg = g.degree(u);
            if deg == 0 {
                return Some(NodeExamples::default());
            }
            if deg + 1 >= n {
                return None;
            }
            let mut rng = stream(seed, &[lane::SPLIT, u as u64]);
            let mut pos = g.neighbors(u).to_vec();
            let mut neg = sample_negatives(g, u, neg_ratio * deg, &mut rng);
            pos.shuffle(&mut rng);
            neg.shuffle(&mut rng);
            let (train_pos, test_pos) = cut(pos, train_frac);
            let (train_neg, test_neg) = cut(neg, train_frac);
            Some(NodeExamples {
                train_pos,
                train_neg,
                test_pos,
                test_neg,
            })
        })
        .collect();

    let mut skipped = Vec::new();
    let nodes = per_node
        .into_iter()
        .enumerate()
        .map(|(u, ex)| {
            ex.unwrap_or_else(|| {
                skipped.push(u as u32);
                NodeExamples::default()
            })
        })
        .collect();
    if !skipped.is_empty() {
        log::warn!(
            "skipped {} node(s) adjacent to every other node (no negatives available)",
            skipped.len()
        );
    }
    Ok(EdgeSplits {
        nodes,
        skipped,
        train_frac,
        neg_ratio,
    })
}

fn cut(mut v: Vec<u32>, frac: f64) -> (Vec<u32>, Vec<u32>) {
    let n_train = (frac * v.len() as f64).floor() as usize;
    let test = v.split_off(n_train);
    (v, test)
}

fn is_candidate(g: &AttributedGraph, u: usize, v: usize) -> bool {
    v != u && !g.has_edge(u, v)
}

/// Draws `count` non-neighbors of `u` (never `u` itself). Sampling is without
/// replacement when enough non-neighbors exist, with replacement otherwise.
pub(crate) fn sample_negatives(
    g: &AttributedGraph,
    u: usize,
    count: usize,
    rng: &mut StreamRng,
) -> Vec<u32> {
    let n = g.num_nodes();
    let available = n - 1 - g.degree(u);
    if count <= available {
        if count * 2 <= available {
            // sparse case: rejection with a seen-set
            let mut seen = HashSet::with_capacity(count);
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let v = rng.gen_range(0..n);
                if is_candidate(g, u, v) && seen.insert(v) {
                    out.push(v as u32);
                }
            }
            out
        } else {
            let pool: Vec<u32> = (0..n)
                .filter(|&v| is_candidate(g, u, v))
                .map(|v| v as u32)
                .collect();
            index::sample(rng, pool.len(), count)
                .into_iter()
                .map(|i| pool[i])
                .collect()
        }
    } else {
        (0..count)
            .map(|_| loop {
                let v = rng.gen_range(0..n);
                if is_candidate(g, u, v) {
                    break v as u32;
                }
            })
            .collect()
    }
}
