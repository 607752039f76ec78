use std::io::Write;

use crate::biasgen::TrueRatios;
use crate::error::{Result, UgeError};
use crate::graph::{
    AttributeSchema, AttributedGraph, GroupIndex, GroupMode, Grouping, PairKey, ProfileIndex,
};

/// Where the ratios of a table came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioSource {
    Estimated,
    Factorized,
    Planted,
}

/// Per-key estimates of `R` (full keys) and `R~` (non-sensitive keys) plus the
/// resulting loss weights `R~ / R`, precomputed once per full key.
#[derive(Debug, Clone)]
pub struct RatioTable {
    schema: AttributeSchema,
    grouping: Grouping,
    full_ratios: Vec<f64>,
    nonsensitive_ratios: Vec<f64>,
    weights: Vec<f64>,
    pair_counts: Vec<u64>,
    edge_counts: Option<Vec<u64>>,
    alpha: f64,
    source: RatioSource,
}

/// Loss weight of one node pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeWeight {
    pub weight: f64,
    /// Set when the pair's full-key ratio is zero; the weight is then 0.
    pub zero_ratio: bool,
}

/// Smoothed maximum-likelihood ratio of edge share to pair share.
fn smoothed_ratio(
    edges: u64,
    total_edges: u64,
    pairs: u64,
    total_pairs: u64,
    alpha: f64,
    n_keys: usize,
) -> Option<f64> {
    let edge_den = total_edges as f64 + alpha * n_keys as f64;
    let pair_num = pairs as f64 + alpha;
    if pair_num <= 0.0 || edge_den <= 0.0 {
        return None;
    }
    let edge_share = (edges as f64 + alpha) / edge_den;
    let pair_share = pair_num / (total_pairs as f64 + alpha * n_keys as f64);
    Some(edge_share / pair_share)
}

fn ratios_of(index: &GroupIndex, alpha: f64, schema: &AttributeSchema) -> Result<Vec<f64>> {
    let n_keys = index.num_keys();
    index
        .keys()
        .map(|k| {
            smoothed_ratio(
                index.edge_count(k),
                index.total_edges(),
                index.pair_count(k),
                index.total_pairs(),
                alpha,
                n_keys,
            )
            .ok_or_else(|| {
                if index.pair_count(k) == 0 {
                    UgeError::ZeroPairGroup(index.profiles().key_label(k, schema))
                } else {
                    UgeError::Degenerate("graph has no edges and no smoothing".into())
                }
            })
        })
        .collect()
}

/// Estimates `R` and `R~` from the observed graph with additive smoothing
/// `alpha` applied to every count.
///
/// `R~` uses observed edges grouped by non-sensitive keys, which is valid when
/// sensitive attributes only re-route edges within non-sensitive groups. With
/// `factorized`, attributes are treated as independent: `R` becomes the
/// product of single-attribute ratios over the sensitive attributes and
/// `R~ = 1`.
pub fn estimate_ratios(g: &AttributedGraph, factorized: bool, alpha: f64) -> Result<RatioTable> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(UgeError::InvalidArgument(format!(
            "smoothing must be finite and non-negative, got {alpha}"
        )));
    }
    let schema = g.schema().clone();
    let grouping = Grouping::from_graph(g);
    let full_index = crate::graph::build_group_index(g, GroupMode::Full);

    let (full_ratios, nonsensitive_ratios, source) = if factorized {
        let k = schema.num_attributes();
        let mut per_attr = Vec::new();
        for attr in schema.sensitive_attributes() {
            let profiles = ProfileIndex::from_columns(
                g.attribute_codes(),
                k,
                g.num_nodes(),
                vec![attr],
                GroupMode::Full,
            );
            let index = GroupIndex::from_profiles(g, profiles);
            let ratios = ratios_of(&index, alpha, &schema)?;
            per_attr.push((attr, index, ratios));
        }
        let full = grouping.full();
        let full_ratios = full
            .keys()
            .map(|key| {
                per_attr
                    .iter()
                    .map(|(attr, index, ratios)| {
                        let a = full.profile_codes(key.left)[*attr];
                        let b = full.profile_codes(key.right)[*attr];
                        let p = index.profiles();
                        let sub = PairKey::new(
                            p.lookup_profile(&[a]).expect("value present"),
                            p.lookup_profile(&[b]).expect("value present"),
                        );
                        ratios[p.key_index(sub)]
                    })
                    .product::<f64>()
            })
            .collect();
        let ns = vec![1.0; grouping.nonsensitive().num_keys()];
        (full_ratios, ns, RatioSource::Factorized)
    } else {
        let ns_index = crate::graph::build_group_index(g, GroupMode::NonSensitive);
        (
            ratios_of(&full_index, alpha, &schema)?,
            ratios_of(&ns_index, alpha, &schema)?,
            RatioSource::Estimated,
        )
    };

    let pair_counts = full_index
        .keys()
        .map(|k| full_index.pair_count(k))
        .collect();
    let edge_counts = full_index
        .keys()
        .map(|k| full_index.edge_count(k))
        .collect();
    Ok(RatioTable::assemble(
        schema,
        grouping,
        full_ratios,
        nonsensitive_ratios,
        pair_counts,
        Some(edge_counts),
        alpha,
        source,
    ))
}

impl RatioTable {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        schema: AttributeSchema,
        grouping: Grouping,
        full_ratios: Vec<f64>,
        nonsensitive_ratios: Vec<f64>,
        pair_counts: Vec<u64>,
        edge_counts: Option<Vec<u64>>,
        alpha: f64,
        source: RatioSource,
    ) -> Self {
        let weights = grouping
            .full()
            .keys()
            .zip(&full_ratios)
            .map(|(key, &r)| {
                let parent = grouping.nonsensitive().key_index(grouping.project(key));
                let r_tilde = nonsensitive_ratios[parent];
                if r_tilde == r {
                    1.0
                } else if r > 0.0 {
                    r_tilde / r
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            schema,
            grouping,
            full_ratios,
            nonsensitive_ratios,
            weights,
            pair_counts,
            edge_counts,
            alpha,
            source,
        }
    }

    /// Wraps analytic ratios of a planted construction.
    pub fn from_true_ratios(truth: &TrueRatios, schema: &AttributeSchema) -> Self {
        let full = truth.grouping.full();
        let pair_counts = full.keys().map(|k| full.pair_count(k)).collect();
        Self::assemble(
            schema.clone(),
            truth.grouping.clone(),
            truth.full.clone(),
            truth.nonsensitive.clone(),
            pair_counts,
            None,
            0.0,
            RatioSource::Planted,
        )
    }

    pub fn grouping(&self) -> &Grouping {
        &self.grouping
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn source(&self) -> RatioSource {
        self.source
    }

    pub fn full_ratio(&self, key: PairKey) -> f64 {
        self.full_ratios[self.grouping.full().key_index(key)]
    }

    pub fn nonsensitive_ratio(&self, key: PairKey) -> f64 {
        self.nonsensitive_ratios[self.grouping.nonsensitive().key_index(key)]
    }

    pub fn key_weight(&self, key: PairKey) -> EdgeWeight {
        let i = self.grouping.full().key_index(key);
        EdgeWeight {
            weight: self.weights[i],
            zero_ratio: self.full_ratios[i] == 0.0 && self.weights[i] == 0.0,
        }
    }

    /// Estimated probability that a random edge carries the key, i.e. the
    /// numerator of `R`.
    pub fn edge_share(&self, key: PairKey) -> Option<f64> {
        let edges = self.edge_counts.as_ref()?;
        let i = self.grouping.full().key_index(key);
        let total: u64 = edges.iter().sum();
        Some((edges[i] as f64 + self.alpha) / (total as f64 + self.alpha * edges.len() as f64))
    }

    /// Estimated probability that a random ordered pair carries the key.
    pub fn pair_share(&self, key: PairKey) -> f64 {
        let i = self.grouping.full().key_index(key);
        let total: u64 = self.pair_counts.iter().sum();
        (self.pair_counts[i] as f64 + self.alpha)
            / (total as f64 + self.alpha * self.pair_counts.len() as f64)
    }

    /// Checks that the table was built over the same nodes and attributes.
    pub fn check_graph(&self, g: &AttributedGraph) -> Result<()> {
        let full = self.grouping.full();
        if full.num_nodes() != g.num_nodes() {
            return Err(UgeError::SchemaMismatch(format!(
                "table covers {} nodes, graph has {}",
                full.num_nodes(),
                g.num_nodes()
            )));
        }
        for u in 0..g.num_nodes() {
            if full.lookup_row(g.attributes(u)) != Some(full.profile_of(u)) {
                return Err(UgeError::SchemaMismatch(format!(
                    "attributes of node {} differ",
                    g.original_id(u)
                )));
            }
        }
        Ok(())
    }

    /// Weight of a pair by node index, for a graph already validated with
    /// [`RatioTable::check_graph`].
    pub fn node_weight(&self, u: usize, v: usize) -> f64 {
        let full = self.grouping.full();
        self.weights[full.key_index(full.key_of(u, v))]
    }

    fn key_for_rows(&self, a: &[u32], b: &[u32]) -> Result<PairKey> {
        let full = self.grouping.full();
        let missing = || UgeError::MissingKey(format!("{a:?}|{b:?}"));
        Ok(PairKey::new(
            full.lookup_row(a).ok_or_else(missing)?,
            full.lookup_row(b).ok_or_else(missing)?,
        ))
    }

    /// Writes `key,R,R_tilde,weight,pair_count,edge_count` rows.
    pub fn write_csv<W: Write>(&self, header: &[String], mut w: W) -> Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "key,R,R_tilde,weight,pair_count,edge_count")?;
        let full = self.grouping.full();
        for (i, key) in full.keys().enumerate() {
            let ns = self.grouping.project(key);
            let edges = self
                .edge_counts
                .as_ref()
                .map(|e| e[i].to_string())
                .unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                full.key_label(key, &self.schema),
                self.full_ratios[i],
                self.nonsensitive_ratio(ns),
                self.weights[i],
                self.pair_counts[i],
                edges
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loss weight `R~(a~_uv) / R(a_uv)` of the ordered pair `(u, v)`.
pub fn edge_weight(
    table: &RatioTable,
    g: &AttributedGraph,
    u: usize,
    v: usize,
) -> Result<EdgeWeight> {
    for x in [u, v] {
        if x >= g.num_nodes() {
            return Err(UgeError::NodeOutOfRange {
                node: x,
                n: g.num_nodes(),
            });
        }
    }
    let key = table.key_for_rows(g.attributes(u), g.attributes(v))?;
    let w = table.key_weight(key);
    if w.zero_ratio {
        log::debug!("pair ({u}, {v}) falls in a zero-ratio group");
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::t1;

    fn key(table: &RatioTable, label: &str) -> PairKey {
        table
            .grouping()
            .full()
            .parse_key(label, table.schema())
            .unwrap()
    }

    #[test]
    fn t1_unsmoothed() {
        let g = t1().with_sensitive(&["gender"]).unwrap();
        let t = estimate_ratios(&g, false, 0.0).unwrap();
        // (2/4)/(4/9), (1/4)/(2/9), 0, and a single non-sensitive group
        assert!((t.full_ratio(key(&t, "F|F")) - 1.125).abs() < 1e-12);
        assert!((t.full_ratio(key(&t, "F|M")) - 1.125).abs() < 1e-12);
        assert!((t.full_ratio(key(&t, "M|F")) - 1.125).abs() < 1e-12);
        assert_eq!(t.full_ratio(key(&t, "M|M")), 0.0);
        assert!((t.nonsensitive_ratio(PairKey::new(0, 0)) - 1.0).abs() < 1e-12);

        let w = edge_weight(&t, &g, 0, 1).unwrap();
        assert!((w.weight - 1.0 / 1.125).abs() < 1e-12);
        assert!(!w.zero_ratio);
        let w = edge_weight(&t, &g, 2, 2).unwrap();
        assert_eq!(w.weight, 0.0);
        assert!(w.zero_ratio);
    }

    #[test]
    fn no_sensitive_attributes_give_unit_weights() {
        let g = t1();
        for alpha in [0.0, 0.5] {
            let t = estimate_ratios(&g, false, alpha).unwrap();
            for k in t.grouping().full().keys() {
                assert_eq!(
                    t.full_ratio(k),
                    t.nonsensitive_ratio(t.grouping().project(k))
                );
            }
            for u in 0..3 {
                for v in 0..3 {
                    assert_eq!(edge_weight(&t, &g, u, v).unwrap().weight, 1.0);
                }
            }
        }
    }

    #[test]
    fn shares_normalize() {
        let g = t1().with_sensitive(&["gender"]).unwrap();
        let t = estimate_ratios(&g, false, 0.5).unwrap();
        let keys: Vec<_> = t.grouping().full().keys().collect();
        let edge_total: f64 = keys.iter().map(|&k| t.edge_share(k).unwrap()).sum();
        let pair_total: f64 = keys.iter().map(|&k| t.pair_share(k)).sum();
        let weighted: f64 = keys
            .iter()
            .map(|&k| t.pair_share(k) * t.full_ratio(k))
            .sum();
        assert!((edge_total - 1.0).abs() < 1e-12);
        assert!((pair_total - 1.0).abs() < 1e-12);
        assert!((weighted - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schema_mismatch_detected() {
        let g = t1();
        let t = estimate_ratios(&g, false, 0.5).unwrap();
        let schema = AttributeSchema::new(
            vec!["gender".into()],
            vec![vec!["F".into(), "M".into(), "X".into()]],
        )
        .unwrap();
        let (other, _) =
            AttributedGraph::from_edges(vec!["a".into(), "b".into()], schema, vec![2, 0], [(0, 1)])
                .unwrap();
        assert!(matches!(
            edge_weight(&t, &other, 0, 1),
            Err(UgeError::MissingKey(_))
        ));
        assert!(t.check_graph(&other).is_err());
        assert!(t.check_graph(&g).is_ok());
    }

    #[test]
    fn csv_has_one_row_per_key() {
        let g = t1().with_sensitive(&["gender"]).unwrap();
        let t = estimate_ratios(&g, false, 0.0).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&[], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "key,R,R_tilde,weight,pair_count,edge_count");
        assert_eq!(lines.len(), 5);
        assert!(lines.contains(&"F|F,1.125,1,0.8888888888888888,4,2"));
    }
}
