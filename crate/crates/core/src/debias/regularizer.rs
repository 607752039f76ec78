//! Group-score regularizer.
//!
//! For a full key `c` with non-sensitive parent `c~`, `Q_c` is the mean score
//! over member pairs of `c` and `Q_c~` the mean over member pairs of `c~`,
//! both estimated from uniformly sampled member pairs. The penalty is
//! `Σ |Q_c - Q_c~|` (or the squared difference) over sampled groups.

use rand::seq::index;
use rand::Rng;

use crate::error::{Result, UgeError};
use crate::graph::{Grouping, PairKey, ProfileIndex};
use crate::rng::{lane, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupPair {
    pub full: PairKey,
    pub nonsensitive: PairKey,
}

/// Mean score of one group over its sampled member pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupScore {
    pub key: PairKey,
    pub q_value: f64,
    pub sample_size: usize,
}

/// Sampled member pairs of one full key and of its non-sensitive parent.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample {
    pub group: GroupPair,
    pub full_pairs: Vec<(u32, u32)>,
    pub nonsensitive_pairs: Vec<(u32, u32)>,
}

/// Derivative of the penalty with respect to one pair score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGradient {
    pub u: u32,
    pub v: u32,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerTerm {
    pub value: f64,
    pub scores: Vec<(GroupScore, GroupScore)>,
    pub contributions: Vec<PairGradient>,
}

impl RegularizerTerm {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            scores: Vec::new(),
            contributions: Vec::new(),
        }
    }
}

/// Samples `max(1, round(fraction * #full keys))` full keys without
/// replacement, each paired with its non-sensitive parent. Keys come back in
/// index order.
pub fn sample_group_pairs(grouping: &Grouping, fraction: f64, seed: u64) -> Result<Vec<GroupPair>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(UgeError::InvalidArgument(format!(
            "group sampling fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let full = grouping.full();
    let n_keys = full.num_keys();
    if n_keys == 0 {
        return Ok(Vec::new());
    }
    let m = ((fraction * n_keys as f64).round() as usize).clamp(1, n_keys);
    let mut rng = stream(seed, &[lane::GROUP_PAIRS]);
    let mut picked = index::sample(&mut rng, n_keys, m).into_vec();
    picked.sort_unstable();
    Ok(picked
        .into_iter()
        .map(|i| {
            let key = full.key_at(i);
            GroupPair {
                full: key,
                nonsensitive: grouping.project(key),
            }
        })
        .collect())
}

fn draw_members(
    index: &ProfileIndex,
    key: PairKey,
    count: usize,
    rng: &mut impl Rng,
) -> Vec<(u32, u32)> {
    let left = index.members(key.left);
    let right = index.members(key.right);
    if left.is_empty() || right.is_empty() {
        return Vec::new();
    }
    (0..count)
        .map(|_| {
            (
                left[rng.gen_range(0..left.len())],
                right[rng.gen_range(0..right.len())],
            )
        })
        .collect()
}

/// Draws `pairs_per_group` ordered member pairs (self-pairs allowed, as in the
/// pair universe) for each group and its parent. Groups without members are
/// skipped with a warning.
pub fn sample_member_pairs(
    grouping: &Grouping,
    groups: &[GroupPair],
    pairs_per_group: usize,
    seed: u64,
) -> Vec<GroupSample> {
    let mut out = Vec::with_capacity(groups.len());
    for (i, g) in groups.iter().enumerate() {
        let mut rng = stream(seed, &[lane::MEMBER_PAIRS, i as u64]);
        let full_pairs = draw_members(grouping.full(), g.full, pairs_per_group, &mut rng);
        let (full, ns) = (grouping.full(), grouping.nonsensitive());
        // when the sensitive attributes do not split the parent group the two
        // means are identical by definition; reuse the draw so the term is 0
        let same_members = full.size(g.full.left) == ns.size(g.nonsensitive.left)
            && full.size(g.full.right) == ns.size(g.nonsensitive.right);
        let nonsensitive_pairs = if same_members {
            full_pairs.clone()
        } else {
            draw_members(ns, g.nonsensitive, pairs_per_group, &mut rng)
        };
        if full_pairs.is_empty() || nonsensitive_pairs.is_empty() {
            log::warn!("regularizer group {} has no member pairs; skipped", g.full);
            continue;
        }
        out.push(GroupSample {
            group: *g,
            full_pairs,
            nonsensitive_pairs,
        });
    }
    out
}

/// Factor turning a sum over `sampled` group pairs into an estimate of the
/// total discrepancy per non-sensitive key: `full keys / (non-sensitive keys
/// × sampled)`. Keeps the penalty comparable across schemas and sampling
/// fractions.
pub fn regularizer_scale(grouping: &Grouping, sampled: usize) -> f64 {
    if sampled == 0 {
        return 0.0;
    }
    grouping.full().num_keys() as f64 / (grouping.nonsensitive().num_keys() as f64 * sampled as f64)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Evaluates the penalty summed over the sampled group pairs and its
/// derivative with respect to every sampled pair score. Ties take
/// subgradient zero.
pub fn evaluate_regularizer<F>(score: F, samples: &[GroupSample], squared: bool) -> RegularizerTerm
where
    F: Fn(usize, usize) -> f64,
{
    let mut term = RegularizerTerm::zero();
    for s in samples {
        let mean = |pairs: &[(u32, u32)]| {
            pairs
                .iter()
                .map(|&(u, v)| score(u as usize, v as usize))
                .sum::<f64>()
                / pairs.len() as f64
        };
        let q_full = mean(&s.full_pairs);
        let q_ns = mean(&s.nonsensitive_pairs);
        let diff = q_full - q_ns;
        let (value, slope) = if squared {
            (diff * diff, 2.0 * diff)
        } else {
            (diff.abs(), sign(diff))
        };
        term.value += value;
        term.scores.push((
            GroupScore {
                key: s.group.full,
                q_value: q_full,
                sample_size: s.full_pairs.len(),
            },
            GroupScore {
                key: s.group.nonsensitive,
                q_value: q_ns,
                sample_size: s.nonsensitive_pairs.len(),
            },
        ));
        if slope == 0.0 {
            continue;
        }
        let cf = slope / s.full_pairs.len() as f64;
        let cn = -slope / s.nonsensitive_pairs.len() as f64;
        term.contributions
            .extend(
                s.full_pairs
                    .iter()
                    .map(|&(u, v)| PairGradient { u, v, coeff: cf }),
            );
        term.contributions
            .extend(
                s.nonsensitive_pairs
                    .iter()
                    .map(|&(u, v)| PairGradient { u, v, coeff: cn }),
            );
    }
    term
}

/// Samples member pairs for the given groups and evaluates the penalty.
pub fn regularizer_term<F>(
    score: F,
    grouping: &Grouping,
    groups: &[GroupPair],
    pairs_per_group: usize,
    seed: u64,
    squared: bool,
) -> RegularizerTerm
where
    F: Fn(usize, usize) -> f64,
{
    let samples = sample_member_pairs(grouping, groups, pairs_per_group, seed);
    evaluate_regularizer(score, &samples, squared)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{AttributeSchema, AttributedGraph};

    fn grouping_with_keys(values: usize, n: usize) -> Grouping {
        let dict = (0..values).map(|i| format!("v{i}")).collect();
        let mut schema = AttributeSchema::new(vec!["a".into()], vec![dict]).unwrap();
        schema.set_sensitive(&["a"]).unwrap();
        let codes: Vec<u32> = (0..n).map(|i| (i % values) as u32).collect();
        let ids = (0..n).map(|i| i.to_string()).collect();
        let (g, _) = AttributedGraph::from_edges(ids, schema, codes, []).unwrap();
        Grouping::from_graph(&g)
    }

    #[test]
    fn group_count_rounds_and_floors_at_one() {
        // 7 profiles give 49 keys; round(4.9) = 5
        let g7 = grouping_with_keys(7, 70);
        assert_eq!(sample_group_pairs(&g7, 0.1, 1).unwrap().len(), 5);
        // 6 profiles give 36 keys; round(3.6) = 4
        let g6 = grouping_with_keys(6, 60);
        assert_eq!(sample_group_pairs(&g6, 0.1, 1).unwrap().len(), 4);
        let g2 = grouping_with_keys(2, 10);
        assert_eq!(sample_group_pairs(&g2, 0.1, 1).unwrap().len(), 1);
    }

    #[test]
    fn scale_counts_keys_per_parent() {
        // one sensitive attribute with 3 values: 9 full keys, 1 parent key
        let g = grouping_with_keys(3, 30);
        assert_eq!(regularizer_scale(&g, 9), 1.0);
        assert_eq!(regularizer_scale(&g, 3), 3.0);
        assert_eq!(regularizer_scale(&g, 0), 0.0);
    }

    #[test]
    fn full_fraction_is_exhaustive_and_deterministic() {
        let g = grouping_with_keys(3, 30);
        let all = sample_group_pairs(&g, 1.0, 4).unwrap();
        assert_eq!(all.len(), 9);
        assert_eq!(all, sample_group_pairs(&g, 1.0, 99).unwrap());
        let a = sample_group_pairs(&g, 0.5, 4).unwrap();
        assert_eq!(a, sample_group_pairs(&g, 0.5, 4).unwrap());
        for p in &a {
            assert_eq!(p.nonsensitive, PairKey::new(0, 0));
        }
        assert!(sample_group_pairs(&g, 0.0, 1).is_err());
    }

    #[test]
    fn constant_scores_give_zero() {
        let g = grouping_with_keys(2, 20);
        let groups = sample_group_pairs(&g, 1.0, 0).unwrap();
        let t = regularizer_term(|_, _| 0.7, &g, &groups, 16, 3, false);
        assert_eq!(t.value, 0.0);
        assert!(t.contributions.is_empty());
    }

    #[test]
    fn hand_case_and_tie() {
        let group = GroupPair {
            full: PairKey::new(0, 1),
            nonsensitive: PairKey::new(0, 0),
        };
        let sample = GroupSample {
            group,
            full_pairs: vec![(0, 1), (2, 3)],
            nonsensitive_pairs: vec![(4, 5)],
        };
        let score = |u: usize, _v: usize| if u < 4 { 0.8 } else { 0.6 };
        let t = evaluate_regularizer(score, std::slice::from_ref(&sample), false);
        assert!((t.value - 0.2).abs() < 1e-12);
        assert_eq!(t.contributions.len(), 3);
        assert_eq!(t.contributions[0].coeff, 0.5);
        assert_eq!(t.contributions[2].coeff, -1.0);
        let sq = evaluate_regularizer(score, std::slice::from_ref(&sample), true);
        assert!((sq.value - 0.04).abs() < 1e-12);

        let tie = evaluate_regularizer(|_, _| 0.6, std::slice::from_ref(&sample), false);
        assert_eq!(tie.value, 0.0);
        assert!(tie.contributions.is_empty());

        let twice = evaluate_regularizer(score, &[sample.clone(), sample], false);
        assert!((twice.value - 0.4).abs() < 1e-12);
        assert_eq!(twice.contributions[0].coeff, 0.5);
    }

    #[test]
    fn member_pairs_respect_groups() {
        let g = grouping_with_keys(3, 30);
        let groups = sample_group_pairs(&g, 1.0, 0).unwrap();
        let samples = sample_member_pairs(&g, &groups, 50, 8);
        assert_eq!(samples.len(), 9);
        for s in &samples {
            assert_eq!(s.full_pairs.len(), 50);
            for &(u, v) in &s.full_pairs {
                assert_eq!(g.full().key_of(u as usize, v as usize), s.group.full);
            }
        }
        assert_eq!(samples, sample_member_pairs(&g, &groups, 50, 8));
    }

    #[test]
    fn unsplit_groups_contribute_nothing() {
        let dict = vec!["x".to_string(), "y".to_string()];
        let schema = AttributeSchema::new(vec!["a".into()], vec![dict]).unwrap();
        let codes: Vec<u32> = (0..10).map(|i| (i % 2) as u32).collect();
        let ids = (0..10).map(|i| i.to_string()).collect();
        let (g, _) = AttributedGraph::from_edges(ids, schema, codes, []).unwrap();
        let grouping = Grouping::from_graph(&g);
        let groups = sample_group_pairs(&grouping, 1.0, 0).unwrap();
        let t = regularizer_term(|u, v| (u * 7 + v) as f64, &grouping, &groups, 32, 1, false);
        assert_eq!(t.value, 0.0);
    }

    #[test]
    fn penalty_is_non_negative() {
        let g = grouping_with_keys(4, 40);
        let groups = sample_group_pairs(&g, 0.5, 2).unwrap();
        for seed in 0..20 {
            let t = regularizer_term(
                |u, v| ((u * 31 + v * 17 + seed) % 13) as f64 / 13.0,
                &g,
                &groups,
                8,
                seed as u64,
                false,
            );
            assert!(t.value >= 0.0);
            let zero = t.scores.iter().all(|(a, b)| a.q_value == b.q_value);
            assert_eq!(t.value == 0.0, zero);
        }
    }
}
