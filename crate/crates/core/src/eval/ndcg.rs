use rayon::prelude::*;

use crate::embed::EmbeddingModel;
use crate::error::{Result, UgeError};
use crate::graph::{sample_negatives, AttributedGraph, EdgeSplits};
use crate::rng::{lane, stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdcgResult {
    pub value: f64,
    pub evaluated_nodes: usize,
}

/// Orders candidates by score descending, ties by node id ascending.
pub fn rank_candidates(candidates: &mut [(u32, f64)]) {
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// NDCG@k of a ranked list of binary relevances.
pub fn ndcg_of_ranking(relevant: &[bool], k: usize) -> f64 {
    let gain = |i: usize| 1.0 / ((i + 2) as f64).log2();
    let dcg: f64 = relevant
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, r)| **r)
        .map(|(i, _)| gain(i))
        .sum();
    let n_rel = relevant.iter().filter(|r| **r).count().min(k);
    let idcg: f64 = (0..n_rel).map(gain).sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Mean NDCG@k over nodes with at least one test positive. Each node ranks
/// its test positives together with uniformly sampled non-neighbors, padding
/// the list to `list_size`.
pub fn ndcg_at_k(
    model: &EmbeddingModel,
    g: &AttributedGraph,
    splits: &EdgeSplits,
    k: usize,
    list_size: usize,
    seed: u64,
) -> Result<NdcgResult> {
    if k == 0 || k > list_size {
        return Err(UgeError::InvalidArgument(format!(
            "need 0 < k <= list_size, got k={k}, list_size={list_size}"
        )));
    }
    if model.num_nodes() != g.num_nodes() || splits.nodes.len() != g.num_nodes() {
        return Err(UgeError::SchemaMismatch(format!(
            "model has {} rows, graph {} nodes, splits {} nodes",
            model.num_nodes(),
            g.num_nodes(),
            splits.nodes.len()
        )));
    }
    let per_node: Vec<Option<f64>> = (0..g.num_nodes())
        .into_par_iter()
        .map(|u| {
            let pos = &splits.node(u).test_pos;
            if pos.is_empty() {
                return None;
            }
            let available = g.num_nodes() - 1 - g.degree(u);
            let wanted = list_size.saturating_sub(pos.len()).min(available);
            let mut rng = stream(seed, &[lane::NDCG, u as u64]);
            let negs = sample_negatives(g, u, wanted, &mut rng);
            let mut cands: Vec<(u32, f64)> = pos
                .iter()
                .chain(&negs)
                .map(|&v| (v, model.score_unchecked(u, v as usize)))
                .collect();
            rank_candidates(&mut cands);
            let relevant: Vec<bool> = cands.iter().map(|(v, _)| pos.contains(v)).collect();
            Some(ndcg_of_ranking(&relevant, k))
        })
        .collect();
    let values: Vec<f64> = per_node.into_iter().flatten().collect();
    if values.is_empty() {
        return Err(UgeError::Degenerate("no node has a test positive".into()));
    }
    Ok(NdcgResult {
        value: values.iter().sum::<f64>() / values.len() as f64,
        evaluated_nodes: values.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_cases() {
        let mut list = vec![false; 100];
        list[0] = true;
        assert_eq!(ndcg_of_ranking(&list, 10), 1.0);
        list.swap(0, 1);
        assert!((ndcg_of_ranking(&list, 10) - 1.0 / 3f64.log2()).abs() < 1e-12);
        list.swap(1, 10);
        assert_eq!(ndcg_of_ranking(&list, 10), 0.0);
    }

    #[test]
    fn ties_break_by_node_id() {
        let mut c = vec![(5, 1.0), (2, 1.0), (9, 3.0), (1, -1.0)];
        rank_candidates(&mut c);
        let order: Vec<u32> = c.iter().map(|x| x.0).collect();
        assert_eq!(order, vec![9, 2, 5, 1]);
    }

    proptest! {
        #[test]
        fn promoting_a_positive_never_hurts(
            rel in proptest::collection::vec(any::<bool>(), 2..60),
            at in 1usize..60,
        ) {
            let mut rel = rel;
            let at = 1 + at % (rel.len() - 1);
            rel[at] = true;
            rel[at - 1] = false;
            let before = ndcg_of_ranking(&rel, 10);
            let mut moved = rel.clone();
            moved.swap(at, at - 1);
            prop_assert!(ndcg_of_ranking(&moved, 10) >= before);
            prop_assert!((0.0..=1.0).contains(&before));
        }
    }
}
