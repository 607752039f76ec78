//! Attribute-profile grouping of nodes and node pairs.
//!
//! A profile is the tuple of a node's codes on a set of attribute columns
//! (all columns in full mode, only non-sensitive ones otherwise). A
//! combination key is the ordered pair of profiles of two nodes. Pair counts
//! range over all ordered pairs of `V x V`, self-pairs included, so they sum
//! to `N^2`; edge counts range over ordered edges and sum to `2|E|`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use super::{AttributeSchema, AttributedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupMode {
    Full,
    NonSensitive,
}

/// Ordered pair of profile ids within one [`ProfileIndex`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairKey {
    pub left: u32,
    pub right: u32,
}

impl PairKey {
    pub fn new(left: u32, right: u32) -> Self {
        Self { left, right }
    }

    pub fn flipped(self) -> Self {
        Self {
            left: self.right,
            right: self.left,
        }
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.left, self.right)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileIndex {
    mode: GroupMode,
    columns: Vec<usize>,
    profiles: Vec<Vec<u32>>,
    lookup: HashMap<Vec<u32>, u32>,
    node_profile: Vec<u32>,
    members: Vec<Vec<u32>>,
}

impl ProfileIndex {
    /// Indexes the profiles of `n` nodes whose codes are stored row-major in
    /// `codes`.
    pub fn new(schema: &AttributeSchema, codes: &[u32], n: usize, mode: GroupMode) -> Self {
        let k = schema.num_attributes();
        let columns = match mode {
            GroupMode::Full => (0..k).collect(),
            GroupMode::NonSensitive => (0..k).filter(|&a| !schema.is_sensitive(a)).collect(),
        };
        Self::from_columns(codes, k, n, columns, mode)
    }

    pub fn from_graph(g: &AttributedGraph, mode: GroupMode) -> Self {
        Self::new(g.schema(), g.attribute_codes(), g.num_nodes(), mode)
    }

    /// Indexes profiles restricted to an explicit column subset.
    pub fn from_columns(
        codes: &[u32],
        k: usize,
        n: usize,
        columns: Vec<usize>,
        mode: GroupMode,
    ) -> Self {
        let project =
            |u: usize| -> Vec<u32> { columns.iter().map(|&c| codes[u * k + c]).collect() };
        // sorted profile order keeps ids independent of node order
        let mut distinct: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
        for u in 0..n {
            distinct.entry(project(u)).or_insert(0);
        }
        let profiles: Vec<Vec<u32>> = distinct.keys().cloned().collect();
        let lookup: HashMap<Vec<u32>, u32> = profiles
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i as u32))
            .collect();
        let node_profile: Vec<u32> = (0..n).map(|u| lookup[&project(u)]).collect();
        let mut members = vec![Vec::new(); profiles.len()];
        for (u, &p) in node_profile.iter().enumerate() {
            members[p as usize].push(u as u32);
        }
        Self {
            mode,
            columns,
            profiles,
            lookup,
            node_profile,
            members,
        }
    }

    pub fn mode(&self) -> GroupMode {
        self.mode
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn num_nodes(&self) -> usize {
        self.node_profile.len()
    }

    pub fn num_profiles(&self) -> usize {
        self.profiles.len()
    }

    pub fn num_keys(&self) -> usize {
        self.profiles.len() * self.profiles.len()
    }

    pub fn profile_of(&self, u: usize) -> u32 {
        self.node_profile[u]
    }

    pub fn profile_codes(&self, p: u32) -> &[u32] {
        &self.profiles[p as usize]
    }

    pub fn members(&self, p: u32) -> &[u32] {
        &self.members[p as usize]
    }

    pub fn size(&self, p: u32) -> usize {
        self.members[p as usize].len()
    }

    /// Finds the profile of a full code row (one code per schema attribute).
    pub fn lookup_row(&self, row: &[u32]) -> Option<u32> {
        let key: Vec<u32> = self
            .columns
            .iter()
            .map(|&c| row.get(c).copied())
            .collect::<Option<_>>()?;
        self.lookup.get(&key).copied()
    }

    pub fn lookup_profile(&self, codes: &[u32]) -> Option<u32> {
        self.lookup.get(codes).copied()
    }

    pub fn key_of(&self, u: usize, v: usize) -> PairKey {
        PairKey::new(self.node_profile[u], self.node_profile[v])
    }

    pub fn key_index(&self, key: PairKey) -> usize {
        key.left as usize * self.profiles.len() + key.right as usize
    }

    pub fn key_at(&self, index: usize) -> PairKey {
        let p = self.profiles.len();
        PairKey::new((index / p) as u32, (index % p) as u32)
    }

    pub fn keys(&self) -> impl Iterator<Item = PairKey> + '_ {
        (0..self.num_keys()).map(|i| self.key_at(i))
    }

    /// Ordered pair count of a key, self-pairs included.
    pub fn pair_count(&self, key: PairKey) -> u64 {
        self.size(key.left) as u64 * self.size(key.right) as u64
    }

    pub fn profile_label(&self, p: u32, schema: &AttributeSchema) -> String {
        if self.columns.is_empty() {
            return "*".to_string();
        }
        self.columns
            .iter()
            .zip(&self.profiles[p as usize])
            .map(|(&attr, &code)| schema.values(attr)[code as usize].as_str())
            .collect::<Vec<_>>()
            .join("/")
    }

    pub fn key_label(&self, key: PairKey, schema: &AttributeSchema) -> String {
        format!(
            "{}|{}",
            self.profile_label(key.left, schema),
            self.profile_label(key.right, schema)
        )
    }

    /// Parses a label of the form `v1/v2|w1/w2` back into a key. Values are
    /// matched against the schema dictionaries of this index's columns.
    pub fn parse_key(&self, label: &str, schema: &AttributeSchema) -> Option<PairKey> {
        let (l, r) = label.split_once('|')?;
        Some(PairKey::new(
            self.parse_profile(l.trim(), schema)?,
            self.parse_profile(r.trim(), schema)?,
        ))
    }

    pub fn parse_profile(&self, label: &str, schema: &AttributeSchema) -> Option<u32> {
        if self.columns.is_empty() {
            return (label == "*")
                .then_some(0)
                .filter(|_| !self.profiles.is_empty());
        }
        let parts: Vec<&str> = label.split('/').collect();
        if parts.len() != self.columns.len() {
            return None;
        }
        let codes: Vec<u32> = self
            .columns
            .iter()
            .zip(parts)
            .map(|(&attr, v)| schema.code_of(attr, v.trim()))
            .collect::<Option<_>>()?;
        self.lookup_profile(&codes)
    }
}

/// Per-key pair and edge statistics for one grouping mode.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupIndex {
    profiles: ProfileIndex,
    pair_counts: Vec<u64>,
    edge_counts: Vec<u64>,
}

pub fn build_group_index(g: &AttributedGraph, mode: GroupMode) -> GroupIndex {
    GroupIndex::from_profiles(g, ProfileIndex::from_graph(g, mode))
}

impl GroupIndex {
    /// Counts pairs and ordered edges of `g` under an arbitrary profile index
    /// built over the same nodes.
    pub fn from_profiles(g: &AttributedGraph, profiles: ProfileIndex) -> GroupIndex {
        let pair_counts: Vec<u64> = profiles.keys().map(|k| profiles.pair_count(k)).collect();
        let mut edge_counts = vec![0u64; profiles.num_keys()];
        for u in 0..g.num_nodes() {
            for &v in g.neighbors(u) {
                edge_counts[profiles.key_index(profiles.key_of(u, v as usize))] += 1;
            }
        }
        GroupIndex {
            profiles,
            pair_counts,
            edge_counts,
        }
    }

    pub fn profiles(&self) -> &ProfileIndex {
        &self.profiles
    }

    pub fn mode(&self) -> GroupMode {
        self.profiles.mode()
    }

    pub fn num_keys(&self) -> usize {
        self.pair_counts.len()
    }

    pub fn keys(&self) -> impl Iterator<Item = PairKey> + '_ {
        self.profiles.keys()
    }

    pub fn key_of(&self, u: usize, v: usize) -> PairKey {
        self.profiles.key_of(u, v)
    }

    pub fn pair_count(&self, key: PairKey) -> u64 {
        self.pair_counts[self.profiles.key_index(key)]
    }

    pub fn edge_count(&self, key: PairKey) -> u64 {
        self.edge_counts[self.profiles.key_index(key)]
    }

    pub fn total_pairs(&self) -> u64 {
        self.pair_counts.iter().sum()
    }

    pub fn total_edges(&self) -> u64 {
        self.edge_counts.iter().sum()
    }
}

/// Full and non-sensitive profile indices over the same nodes, with the
/// projection from full profiles onto their non-sensitive parent.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    full: ProfileIndex,
    nonsensitive: ProfileIndex,
    projection: Vec<u32>,
}

impl Grouping {
    pub fn new(schema: &AttributeSchema, codes: &[u32], n: usize) -> Self {
        let full = ProfileIndex::new(schema, codes, n, GroupMode::Full);
        let nonsensitive = ProfileIndex::new(schema, codes, n, GroupMode::NonSensitive);
        let projection = (0..full.num_profiles() as u32)
            .map(|p| {
                let u = full.members(p)[0] as usize;
                nonsensitive.profile_of(u)
            })
            .collect();
        Self {
            full,
            nonsensitive,
            projection,
        }
    }

    pub fn from_graph(g: &AttributedGraph) -> Self {
        Self::new(g.schema(), g.attribute_codes(), g.num_nodes())
    }

    pub fn full(&self) -> &ProfileIndex {
        &self.full
    }

    pub fn nonsensitive(&self) -> &ProfileIndex {
        &self.nonsensitive
    }

    pub fn project_profile(&self, p: u32) -> u32 {
        self.projection[p as usize]
    }

    /// Parent non-sensitive key of a full key.
    pub fn project(&self, key: PairKey) -> PairKey {
        PairKey::new(
            self.project_profile(key.left),
            self.project_profile(key.right),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::t1;
    use proptest::prelude::*;

    #[test]
    fn t1_full_mode_counts() {
        let g = t1();
        let idx = build_group_index(&g, GroupMode::Full);
        let f = idx.profiles().parse_profile("F", g.schema()).unwrap();
        let m = idx.profiles().parse_profile("M", g.schema()).unwrap();
        // brute force over the 9 ordered pairs
        let mut pairs = HashMap::new();
        let mut edges = HashMap::new();
        for u in 0..3 {
            for v in 0..3 {
                let key = (g.attributes(u)[0], g.attributes(v)[0]);
                *pairs.entry(key).or_insert(0u64) += 1;
                if g.has_edge(u, v) {
                    *edges.entry(key).or_insert(0u64) += 1;
                }
            }
        }
        assert_eq!(pairs[&(0, 0)], 4);
        assert_eq!(edges[&(0, 0)], 2);
        for (l, r, np, ne) in [(f, f, 4, 2), (f, m, 2, 1), (m, f, 2, 1), (m, m, 1, 0)] {
            let k = PairKey::new(l, r);
            assert_eq!(idx.pair_count(k), np);
            assert_eq!(idx.edge_count(k), ne);
            let (gl, gr) = (
                idx.profiles().profile_codes(l)[0],
                idx.profiles().profile_codes(r)[0],
            );
            assert_eq!(pairs[&(gl, gr)], np);
            assert_eq!(edges.get(&(gl, gr)).copied().unwrap_or(0), ne);
        }
    }

    #[test]
    fn t1_nonsensitive_single_key() {
        let g = t1().with_sensitive(&["gender"]).unwrap();
        let idx = build_group_index(&g, GroupMode::NonSensitive);
        assert_eq!(idx.num_keys(), 1);
        let k = PairKey::new(0, 0);
        assert_eq!(idx.pair_count(k), 9);
        assert_eq!(idx.edge_count(k), 4);
        assert_eq!(idx.profiles().key_label(k, g.schema()), "*|*");
    }

    #[test]
    fn key_labels_round_trip() {
        let g = t1();
        let idx = ProfileIndex::from_graph(&g, GroupMode::Full);
        for k in idx.keys() {
            let label = idx.key_label(k, g.schema());
            assert_eq!(idx.parse_key(&label, g.schema()), Some(k));
        }
        assert_eq!(idx.parse_key("F|X", g.schema()), None);
    }

    fn random_graph() -> impl Strategy<Value = AttributedGraph> {
        (1usize..50).prop_flat_map(|n| {
            (
                proptest::collection::vec((0u32..3, 0u32..2), n),
                proptest::collection::vec((0..n as u32, 0..n as u32), 0..200),
                proptest::collection::vec(any::<bool>(), 2),
            )
                .prop_map(move |(attrs, edges, mask)| {
                    let schema = AttributeSchema::new(
                        vec!["a".into(), "b".into()],
                        vec![
                            vec!["x".into(), "y".into(), "z".into()],
                            vec!["p".into(), "q".into()],
                        ],
                    )
                    .unwrap();
                    let codes = attrs.iter().flat_map(|&(a, b)| [a, b]).collect();
                    let ids = (0..n).map(|i| i.to_string()).collect();
                    let (g, _) = AttributedGraph::from_edges(ids, schema, codes, edges).unwrap();
                    g.with_sensitive_mask(&mask).unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn partition_identities(g in random_graph()) {
            let n = g.num_nodes() as u64;
            for mode in [GroupMode::Full, GroupMode::NonSensitive] {
                let idx = build_group_index(&g, mode);
                prop_assert_eq!(idx.total_pairs(), n * n);
                prop_assert_eq!(idx.total_edges(), g.num_directed_edges() as u64);
            }
            // every full key lands in exactly one non-sensitive key, and the
            // projected counts add up
            let grouping = Grouping::from_graph(&g);
            let full = build_group_index(&g, GroupMode::Full);
            let ns = build_group_index(&g, GroupMode::NonSensitive);
            let mut acc = vec![(0u64, 0u64); ns.num_keys()];
            for k in full.keys() {
                let i = ns.profiles().key_index(grouping.project(k));
                acc[i].0 += full.pair_count(k);
                acc[i].1 += full.edge_count(k);
            }
            for k in ns.keys() {
                let i = ns.profiles().key_index(k);
                prop_assert_eq!(acc[i], (ns.pair_count(k), ns.edge_count(k)));
            }
        }
    }
}
