//! Two-level positive sampling: pick a sensitive-value group of neighbors
//! uniformly, then a member of that group uniformly.

use rand::Rng;

use crate::error::{Result, UgeError};
use crate::graph::{AttributedGraph, GroupMode, ProfileIndex};

/// Indexes nodes by the combination of their sensitive attribute values.
pub(crate) fn sensitive_profiles(g: &AttributedGraph) -> ProfileIndex {
    let schema = g.schema();
    ProfileIndex::from_columns(
        g.attribute_codes(),
        schema.num_attributes(),
        g.num_nodes(),
        schema.sensitive_attributes(),
        GroupMode::Full,
    )
}

/// Candidates partitioned into groups, in order of first appearance.
pub(crate) fn partition(candidates: &[u32], profiles: &ProfileIndex) -> Vec<Vec<u32>> {
    let mut keys: Vec<u32> = Vec::new();
    let mut groups: Vec<Vec<u32>> = Vec::new();
    for &v in candidates {
        let p = profiles.profile_of(v as usize);
        match keys.iter().position(|&k| k == p) {
            Some(i) => groups[i].push(v),
            None => {
                keys.push(p);
                groups.push(vec![v]);
            }
        }
    }
    groups
}

pub(crate) fn draw<R: Rng>(groups: &[Vec<u32>], rng: &mut R) -> u32 {
    let group = &groups[rng.gen_range(0..groups.len())];
    group[rng.gen_range(0..group.len())]
}

/// Samples one neighbor of `u` by first choosing a sensitive-value group
/// uniformly and then a member of it uniformly.
pub fn fairwalk_positive_sampler<R: Rng>(
    g: &AttributedGraph,
    u: usize,
    rng: &mut R,
) -> Result<u32> {
    if u >= g.num_nodes() {
        return Err(UgeError::NodeOutOfRange {
            node: u,
            n: g.num_nodes(),
        });
    }
    if g.degree(u) == 0 {
        return Err(UgeError::Degenerate(format!(
            "node {} is isolated; no positive to sample",
            g.original_id(u)
        )));
    }
    let groups = partition(g.neighbors(u), &sensitive_profiles(g));
    Ok(draw(&groups, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::AttributeSchema;
    use crate::rng::stream;

    fn star(f: usize, m: usize, sensitive: bool) -> AttributedGraph {
        let mut schema =
            AttributeSchema::new(vec!["gender".into()], vec![vec!["F".into(), "M".into()]])
                .unwrap();
        if sensitive {
            schema.set_sensitive(&["gender"]).unwrap();
        }
        let n = 1 + f + m;
        let codes = (0..n).map(|i| u32::from(i > f)).collect();
        let ids = (0..n).map(|i| i.to_string()).collect();
        let edges = (1..n as u32).map(|v| (0, v));
        AttributedGraph::from_edges(ids, schema, codes, edges)
            .unwrap()
            .0
    }

    #[test]
    fn minority_group_gets_half_the_mass() {
        let g = star(9, 1, true);
        let mut rng = stream(1, &[]);
        let draws = 100_000;
        let hits = (0..draws)
            .filter(|_| fairwalk_positive_sampler(&g, 0, &mut rng).unwrap() == 10)
            .count();
        let p = 0.5;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((hits as f64 / draws as f64 - p).abs() < 3.0 * sigma);
        // uniform over neighbors would give 0.1
        let uniform = (0..draws)
            .filter(|_| g.neighbors(0)[rng.gen_range(0..10)] == 10)
            .count();
        let sigma_u = (0.1 * 0.9 / draws as f64).sqrt();
        assert!((uniform as f64 / draws as f64 - 0.1).abs() < 3.0 * sigma_u);
    }

    #[test]
    fn two_level_law_per_member() {
        let g = star(3, 2, true);
        let mut rng = stream(4, &[]);
        let draws = 100_000;
        let mut counts = [0usize; 6];
        for _ in 0..draws {
            counts[fairwalk_positive_sampler(&g, 0, &mut rng).unwrap() as usize] += 1;
        }
        for (v, &c) in counts.iter().enumerate().skip(1) {
            let p = if v <= 3 { 0.5 / 3.0 } else { 0.25 };
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            assert!(
                (c as f64 / draws as f64 - p).abs() < 3.0 * sigma,
                "node {v}"
            );
        }
    }

    #[test]
    fn single_group_is_uniform() {
        let g = star(9, 1, false);
        let groups = partition(g.neighbors(0), &sensitive_profiles(&g));
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0], g.neighbors(0));
    }

    #[test]
    fn isolated_node_rejected() {
        let schema = AttributeSchema::new(vec!["a".into()], vec![vec!["x".into()]]).unwrap();
        let ids = (0..3).map(|i| i.to_string()).collect();
        let (g, _) = AttributedGraph::from_edges(ids, schema, vec![0; 3], [(0, 1)]).unwrap();
        let mut rng = stream(0, &[]);
        assert!(fairwalk_positive_sampler(&g, 2, &mut rng).is_err());
    }
}
