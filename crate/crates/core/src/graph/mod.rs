//! Attributed graph storage, loading, grouping and train/test splitting.

mod groups;
mod io;
mod split;

use std::collections::HashMap;

pub use groups::{build_group_index, GroupIndex, GroupMode, Grouping, PairKey, ProfileIndex};
pub use io::{
    load_graph, read_graph, read_graph_binary, save_graph_binary, write_attribute_file,
    write_edge_file, LoadStats, LoadedGraph, BINARY_MAGIC,
};
pub(crate) use split::sample_negatives;
pub use split::{split_edges, EdgeSplits, NodeExamples};

use crate::error::{Result, UgeError};

/// Names, value dictionaries and sensitivity flags of the categorical node
/// attributes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSchema {
    names: Vec<String>,
    values: Vec<Vec<String>>,
    sensitive: Vec<bool>,
}

impl AttributeSchema {
    /// Builds a schema with no sensitive attributes.
    pub fn new(names: Vec<String>, values: Vec<Vec<String>>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(UgeError::InvalidArgument(format!(
                "{} attribute names but {} value dictionaries",
                names.len(),
                values.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(UgeError::InvalidArgument(format!(
                    "duplicate attribute name `{name}`"
                )));
            }
            let dict = &values[i];
            for (j, v) in dict.iter().enumerate() {
                if dict[..j].contains(v) {
                    return Err(UgeError::InvalidArgument(format!(
                        "duplicate value `{v}` for attribute `{name}`"
                    )));
                }
            }
        }
        let sensitive = vec![false; names.len()];
        Ok(Self {
            names,
            values,
            sensitive,
        })
    }

    pub fn num_attributes(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, attr: usize) -> &str {
        &self.names[attr]
    }

    pub fn values(&self, attr: usize) -> &[String] {
        &self.values[attr]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn code_of(&self, attr: usize, value: &str) -> Option<u32> {
        self.values[attr]
            .iter()
            .position(|v| v == value)
            .map(|c| c as u32)
    }

    pub fn is_sensitive(&self, attr: usize) -> bool {
        self.sensitive[attr]
    }

    pub fn sensitive_mask(&self) -> &[bool] {
        &self.sensitive
    }

    pub fn sensitive_attributes(&self) -> Vec<usize> {
        (0..self.names.len())
            .filter(|&i| self.sensitive[i])
            .collect()
    }

    /// Marks exactly the named attributes as sensitive.
    pub fn set_sensitive<S: AsRef<str>>(&mut self, names: &[S]) -> Result<()> {
        let mut mask = vec![false; self.names.len()];
        for n in names {
            let idx = self
                .index_of(n.as_ref())
                .ok_or_else(|| UgeError::UnknownAttribute(n.as_ref().to_string()))?;
            mask[idx] = true;
        }
        self.sensitive = mask;
        Ok(())
    }

    pub fn set_sensitive_mask(&mut self, mask: &[bool]) -> Result<()> {
        if mask.len() != self.names.len() {
            return Err(UgeError::InvalidArgument(format!(
                "sensitive mask has length {}, schema has {} attributes",
                mask.len(),
                self.names.len()
            )));
        }
        self.sensitive = mask.to_vec();
        Ok(())
    }

    pub(crate) fn intern(&mut self, attr: usize, value: &str) -> u32 {
        match self.code_of(attr, value) {
            Some(c) => c,
            None => {
                self.values[attr].push(value.to_string());
                (self.values[attr].len() - 1) as u32
            }
        }
    }

    fn check_codes(&self, codes: &[u32], n: usize) -> Result<()> {
        let k = self.num_attributes();
        if codes.len() != n * k {
            return Err(UgeError::InvalidArgument(format!(
                "attribute matrix has {} entries, expected {n}x{k}",
                codes.len()
            )));
        }
        for (i, &c) in codes.iter().enumerate() {
            let attr = i % k.max(1);
            if c as usize >= self.values[attr].len() {
                return Err(UgeError::InvalidArgument(format!(
                    "code {c} out of range for attribute `{}`",
                    self.names[attr]
                )));
            }
        }
        Ok(())
    }
}

/// Counts of edge-list entries removed while canonicalizing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CanonStats {
    pub self_loops: usize,
    pub duplicates: usize,
}

/// Immutable undirected attributed graph in CSR form.
///
/// Neighbor lists are strictly sorted, symmetric and free of self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    codes: Vec<u32>,
    schema: AttributeSchema,
    ids: Vec<String>,
}

impl AttributedGraph {
    /// Builds the canonical graph from raw undirected edges, dropping
    /// self-loops and duplicates.
    pub fn from_edges<I>(
        ids: Vec<String>,
        schema: AttributeSchema,
        codes: Vec<u32>,
        edges: I,
    ) -> Result<(Self, CanonStats)>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let n = ids.len();
        schema.check_codes(&codes, n)?;
        let mut stats = CanonStats::default();
        let mut lists: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (u, v) in edges {
            for x in [u, v] {
                if x as usize >= n {
                    return Err(UgeError::NodeOutOfRange {
                        node: x as usize,
                        n,
                    });
                }
            }
            if u == v {
                stats.self_loops += 1;
                continue;
            }
            lists[u as usize].push(v);
            lists[v as usize].push(u);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for list in &mut lists {
            list.sort_unstable();
            let before = list.len();
            list.dedup();
            // each duplicate undirected edge shows up once in each endpoint list
            stats.duplicates += before - list.len();
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        stats.duplicates /= 2;
        Ok((
            Self {
                offsets,
                neighbors,
                codes,
                schema,
                ids,
            },
            stats,
        ))
    }

    pub(crate) fn from_csr(
        ids: Vec<String>,
        schema: AttributeSchema,
        codes: Vec<u32>,
        offsets: Vec<usize>,
        neighbors: Vec<u32>,
    ) -> Result<Self> {
        let n = ids.len();
        schema.check_codes(&codes, n)?;
        let bad = |m: &str| Err(UgeError::Format(m.to_string()));
        if offsets.len() != n + 1 || offsets[0] != 0 || offsets[n] != neighbors.len() {
            return bad("offsets inconsistent with neighbor array");
        }
        let g = Self {
            offsets,
            neighbors,
            codes,
            schema,
            ids,
        };
        for u in 0..n {
            if g.offsets[u] > g.offsets[u + 1] {
                return bad("offsets not monotone");
            }
            let list = g.neighbors(u);
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return bad("neighbor list not strictly sorted");
            }
            for &v in list {
                if v as usize >= n || v as usize == u || !g.has_edge(v as usize, u) {
                    return bad("adjacency not symmetric or has self-loop");
                }
            }
        }
        Ok(g)
    }

    pub fn num_nodes(&self) -> usize {
        self.ids.len()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Number of ordered edges, each undirected edge counted in both directions.
    pub fn num_directed_edges(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    /// Iterates undirected edges once each, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| (v as usize) > u)
                .map(move |&v| (u as u32, v))
        })
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    /// Returns the graph with the named attributes marked sensitive.
    pub fn with_sensitive<S: AsRef<str>>(mut self, names: &[S]) -> Result<Self> {
        self.schema.set_sensitive(names)?;
        Ok(self)
    }

    pub fn with_sensitive_mask(mut self, mask: &[bool]) -> Result<Self> {
        self.schema.set_sensitive_mask(mask)?;
        Ok(self)
    }

    /// Attribute codes of node `u`, one per attribute.
    pub fn attributes(&self, u: usize) -> &[u32] {
        let k = self.schema.num_attributes();
        &self.codes[u * k..(u + 1) * k]
    }

    pub fn attribute_codes(&self) -> &[u32] {
        &self.codes
    }

    /// One attribute column as a label vector.
    pub fn attribute_column(&self, attr: usize) -> Vec<u32> {
        (0..self.num_nodes())
            .map(|u| self.attributes(u)[attr])
            .collect()
    }

    pub fn original_id(&self, u: usize) -> &str {
        &self.ids[u]
    }

    pub fn original_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id_lookup(&self) -> HashMap<&str, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect()
    }

    pub(crate) fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub(crate) fn neighbor_array(&self) -> &[u32] {
        &self.neighbors
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Three nodes with genders F, F, M and edges 1-2, 1-3.
    pub fn t1() -> AttributedGraph {
        let schema =
            AttributeSchema::new(vec!["gender".into()], vec![vec!["F".into(), "M".into()]])
                .unwrap();
        let ids = vec!["1".into(), "2".into(), "3".into()];
        let (g, _) =
            AttributedGraph::from_edges(ids, schema, vec![0, 0, 1], [(0, 1), (0, 2)]).unwrap();
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalization_drops_loops_and_duplicates() {
        let schema = AttributeSchema::new(vec!["a".into()], vec![vec!["x".into()]]).unwrap();
        let ids = (0..4).map(|i| i.to_string()).collect();
        let (g, stats) = AttributedGraph::from_edges(
            ids,
            schema,
            vec![0; 4],
            [(0, 1), (1, 0), (2, 2), (3, 1), (0, 1)],
        )
        .unwrap();
        assert_eq!(stats.self_loops, 1);
        assert_eq!(stats.duplicates, 2);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.neighbors(1), &[0, 3]);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 3)]);
    }

    #[test]
    fn schema_rejects_unknown_sensitive_name() {
        let mut s = AttributeSchema::new(vec!["a".into()], vec![vec![]]).unwrap();
        assert!(matches!(
            s.set_sensitive(&["b"]),
            Err(UgeError::UnknownAttribute(_))
        ));
        s.set_sensitive(&["a"]).unwrap();
        assert_eq!(s.sensitive_attributes(), vec![0]);
    }

    #[test]
    fn out_of_range_code_is_rejected() {
        let schema = AttributeSchema::new(vec!["a".into()], vec![vec!["x".into()]]).unwrap();
        let r = AttributedGraph::from_edges(vec!["0".into()], schema, vec![1], []);
        assert!(r.is_err());
    }

    #[test]
    fn t1_counts() {
        let g = fixtures::t1();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_directed_edges(), 4);
        assert_eq!(g.schema().num_attributes(), 1);
    }
}
