//! Synthetic attributed graphs with planted attribute effects.
//!
//! Edges come from a Chung–Lu structural prior `P_M(u,v) = min(1, w_u w_v / Σw)`
//! whose probabilities are multiplied by a planted factor `ρ` chosen per full
//! attribute combination key. The bias-free counterpart replaces `ρ` by its
//! pair-count-weighted average over the sensitive attributes. Both samplers
//! clip products above one; clipping is counted and logged.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Result, UgeError};
use crate::graph::{AttributeSchema, AttributedGraph, Grouping, PairKey, ProfileIndex};
use crate::rng::{lane, stream};

#[derive(Debug, Clone)]
pub struct GenModelParams {
    weights: Vec<f64>,
    weight_sum: f64,
    schema: AttributeSchema,
    codes: Vec<u32>,
    ids: Vec<String>,
    profiles: ProfileIndex,
    planted: Vec<f64>,
    seed: u64,
}

impl GenModelParams {
    /// Creates parameters with every planted ratio set to 1.
    pub fn new(
        weights: Vec<f64>,
        schema: AttributeSchema,
        codes: Vec<u32>,
        seed: u64,
    ) -> Result<Self> {
        let n = weights.len();
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(UgeError::InvalidArgument(format!(
                "structural weights must be positive and finite, found {w}"
            )));
        }
        let ids = (0..n).map(|i| i.to_string()).collect();
        // validates the code matrix against the schema
        AttributedGraph::from_edges(
            (0..n).map(|i| i.to_string()).collect(),
            schema.clone(),
            codes.clone(),
            [],
        )?;
        let profiles = ProfileIndex::new(&schema, &codes, n, crate::graph::GroupMode::Full);
        let planted = vec![1.0; profiles.num_keys()];
        let weight_sum = weights.iter().sum();
        Ok(Self {
            weights,
            weight_sum,
            schema,
            codes,
            ids,
            profiles,
            planted,
            seed,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn attributes(&self, u: usize) -> &[u32] {
        let k = self.schema.num_attributes();
        &self.codes[u * k..(u + 1) * k]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Full-mode profile index over the node attributes.
    pub fn profiles(&self) -> &ProfileIndex {
        &self.profiles
    }

    pub fn planted_ratio(&self, key: PairKey) -> f64 {
        self.planted[self.profiles.key_index(key)]
    }

    pub fn set_ratio(&mut self, key: PairKey, rho: f64) -> Result<()> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(UgeError::InvalidArgument(format!(
                "planted ratio must be finite and non-negative, got {rho}"
            )));
        }
        if key.left as usize >= self.profiles.num_profiles()
            || key.right as usize >= self.profiles.num_profiles()
        {
            return Err(UgeError::MissingKey(key.to_string()));
        }
        let i = self.profiles.key_index(key);
        self.planted[i] = rho;
        Ok(())
    }

    /// Sets the ratio of a key written as `v1/v2|w1/w2` in schema values.
    pub fn set_ratio_by_label(&mut self, label: &str, rho: f64) -> Result<()> {
        let key = self
            .profiles
            .parse_key(label, &self.schema)
            .ok_or_else(|| UgeError::MissingKey(label.to_string()))?;
        self.set_ratio(key, rho)
    }

    /// Multiplies every key's ratio by `same` when both endpoints share the
    /// value of `attr`, and by `cross` otherwise.
    pub fn apply_homophily(&mut self, attr: usize, same: f64, cross: f64) -> Result<()> {
        if attr >= self.schema.num_attributes() {
            return Err(UgeError::InvalidArgument(format!("attribute index {attr}")));
        }
        let col = self
            .profiles
            .columns()
            .iter()
            .position(|&c| c == attr)
            .expect("full index covers every column");
        for i in 0..self.planted.len() {
            let key = self.profiles.key_at(i);
            let a = self.profiles.profile_codes(key.left)[col];
            let b = self.profiles.profile_codes(key.right)[col];
            let f = if a == b { same } else { cross };
            self.set_ratio(key, self.planted[i] * f)?;
        }
        Ok(())
    }

    fn check_node(&self, u: usize) -> Result<()> {
        if u >= self.num_nodes() {
            return Err(UgeError::NodeOutOfRange {
                node: u,
                n: self.num_nodes(),
            });
        }
        Ok(())
    }

    /// Unclipped Chung–Lu product `w_u w_v / Σw`.
    fn raw_prior(&self, u: usize, v: usize) -> f64 {
        self.weights[u] * self.weights[v] / self.weight_sum
    }

    fn prior(&self, u: usize, v: usize) -> f64 {
        self.raw_prior(u, v).min(1.0)
    }

    /// `min(1, P_M(u,v) ρ)` without the intermediate clip of the prior.
    pub(crate) fn modified_prob(&self, u: usize, v: usize, rho: f64) -> f64 {
        (self.raw_prior(u, v) * rho).min(1.0)
    }
}

/// Chung–Lu weights with the given mean. With an exponent `γ > 1` the weights
/// follow `w_i ∝ (i + 1)^(-1/(γ-1))`, giving a power-law degree sequence;
/// without one all weights are equal.
pub fn chung_lu_weights(n: usize, mean_degree: f64, exponent: Option<f64>) -> Result<Vec<f64>> {
    if !(mean_degree > 0.0 && mean_degree.is_finite()) || n == 0 {
        return Err(UgeError::InvalidArgument(format!(
            "need n > 0 and positive mean degree, got n={n}, mean={mean_degree}"
        )));
    }
    let raw: Vec<f64> = match exponent {
        None => vec![1.0; n],
        Some(g) if g > 1.0 => (0..n)
            .map(|i| ((i + 1) as f64).powf(-1.0 / (g - 1.0)))
            .collect(),
        Some(g) => {
            return Err(UgeError::InvalidArgument(format!(
                "degree exponent must exceed 1, got {g}"
            )))
        }
    };
    let mean = raw.iter().sum::<f64>() / n as f64;
    Ok(raw.into_iter().map(|w| w * mean_degree / mean).collect())
}

/// Chung–Lu prior `P_M(E_uv = 1)`.
pub fn structural_edge_prob(params: &GenModelParams, u: usize, v: usize) -> Result<f64> {
    params.check_node(u)?;
    params.check_node(v)?;
    if u == v {
        return Err(UgeError::SelfPair(u));
    }
    Ok(params.prior(u, v))
}

/// Expected degree of `u` under the structural prior alone.
pub fn expected_structural_degree(params: &GenModelParams, u: usize) -> f64 {
    (0..params.num_nodes())
        .filter(|&v| v != u)
        .map(|v| params.prior(u, v))
        .sum()
}

#[derive(Debug, Clone)]
pub struct GeneratedGraph {
    pub graph: AttributedGraph,
    /// Unordered pairs whose modified probability exceeded one.
    pub clipped_pairs: u64,
}

fn sample_with<F>(params: &GenModelParams, multiplier: F, what: &str) -> Result<GeneratedGraph>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let n = params.num_nodes();
    let rows: Vec<(Vec<u32>, u64)> = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut rng = stream(params.seed, &[lane::GENERATE, u as u64]);
            let mut out = Vec::new();
            let mut clipped = 0;
            for v in u + 1..n {
                let mut p = params.raw_prior(u, v) * multiplier(u, v);
                if p > 1.0 {
                    clipped += 1;
                    p = 1.0;
                }
                let draw: f64 = rng.gen();
                if draw < p {
                    out.push(v as u32);
                }
            }
            (out, clipped)
        })
        .collect();
    let clipped_pairs = rows.iter().map(|r| r.1).sum();
    if clipped_pairs > 0 {
        log::warn!("{what}: clipped {clipped_pairs} pair probabilities at 1");
    }
    let edges = rows
        .iter()
        .enumerate()
        .flat_map(|(u, (vs, _))| vs.iter().map(move |&v| (u as u32, v)));
    let (graph, _) = AttributedGraph::from_edges(
        params.ids.clone(),
        params.schema.clone(),
        params.codes.clone(),
        edges,
    )?;
    Ok(GeneratedGraph {
        graph,
        clipped_pairs,
    })
}

/// Samples the observed graph: each unordered pair `u < v` is an edge with
/// probability `min(1, P_M(u,v) ρ(a_u, a_v))`.
pub fn sample_biased_graph(params: &GenModelParams) -> Result<GeneratedGraph> {
    sample_with(
        params,
        |u, v| params.planted[params.profiles.key_index(params.profiles.key_of(u, v))],
        "biased sampler",
    )
}

/// Planted ratios marginalized over the sensitive attributes.
#[derive(Debug, Clone)]
pub struct MarginalRatios {
    pub grouping: Grouping,
    /// Indexed by non-sensitive key index.
    pub ratios: Vec<f64>,
}

impl MarginalRatios {
    pub fn ratio(&self, key: PairKey) -> f64 {
        self.ratios[self.grouping.nonsensitive().key_index(key)]
    }

    fn of_pair(&self, u: usize, v: usize) -> f64 {
        let ns = self.grouping.nonsensitive();
        self.ratios[ns.key_index(ns.key_of(u, v))]
    }
}

pub fn bias_free_ratios(
    params: &GenModelParams,
    sensitive_mask: &[bool],
) -> Result<MarginalRatios> {
    let mut schema = params.schema.clone();
    schema.set_sensitive_mask(sensitive_mask)?;
    let grouping = Grouping::new(&schema, &params.codes, params.num_nodes());
    let full = grouping.full();
    let ns = grouping.nonsensitive();
    let mut mass = vec![0.0; ns.num_keys()];
    let mut weighted = vec![0.0; ns.num_keys()];
    for key in full.keys() {
        let parent = ns.key_index(grouping.project(key));
        let count = full.pair_count(key) as f64;
        mass[parent] += count;
        // full and params indices agree: both are sorted full profiles
        weighted[parent] += count * params.planted_ratio(key);
    }
    let ratios = weighted
        .iter()
        .zip(&mass)
        .map(|(w, m)| if *m > 0.0 { w / m } else { 1.0 })
        .collect();
    Ok(MarginalRatios { grouping, ratios })
}

/// Samples the bias-free graph whose pair probabilities use the marginalized
/// ratios. Shares random streams with [`sample_biased_graph`].
pub fn sample_bias_free_graph(
    params: &GenModelParams,
    sensitive_mask: &[bool],
) -> Result<GeneratedGraph> {
    let marginal = bias_free_ratios(params, sensitive_mask)?;
    sample_with(params, |u, v| marginal.of_pair(u, v), "bias-free sampler")
}

/// Analytic ratios implied by the planted construction.
///
/// For a key `c`, `R(c) = (T_c / S_c) / Z` where `S_c` sums the structural
/// prior over the non-self pairs of `c`, `T_c` sums the clipped modified
/// probabilities over the same pairs, and `Z = ΣT / ΣS` is the global edge
/// rate of the observed graph relative to the prior. Non-sensitive ratios use
/// the marginalized factors over the same pairs and the same `Z`, reflecting
/// that sensitive attributes only re-route edges.
#[derive(Debug, Clone)]
pub struct TrueRatios {
    pub grouping: Grouping,
    pub planted: Vec<f64>,
    pub marginal: Vec<f64>,
    pub full: Vec<f64>,
    pub nonsensitive: Vec<f64>,
    pub normalizer: f64,
    /// True when any pair probability was clipped at one.
    pub clipped: bool,
}

impl TrueRatios {
    pub fn full_ratio(&self, key: PairKey) -> f64 {
        self.full[self.grouping.full().key_index(key)]
    }

    pub fn nonsensitive_ratio(&self, key: PairKey) -> f64 {
        self.nonsensitive[self.grouping.nonsensitive().key_index(key)]
    }
}

struct KeyMass {
    prior: f64,
    modified: f64,
    clipped: bool,
}

/// Sums the prior and the clipped modified probability over the non-self
/// pairs of one group key. Uses closed forms unless clipping can occur.
fn key_mass(params: &GenModelParams, left: &[u32], right: &[u32], same: bool, rho: f64) -> KeyMass {
    let w = &params.weights;
    let sum = |m: &[u32]| m.iter().map(|&u| w[u as usize]).sum::<f64>();
    let max = |m: &[u32]| m.iter().map(|&u| w[u as usize]).fold(0.0, f64::max);
    if max(left) * max(right) * rho.max(1.0) / params.weight_sum <= 1.0 {
        let mut prior = sum(left) * sum(right);
        if same {
            prior -= left.iter().map(|&u| w[u as usize].powi(2)).sum::<f64>();
        }
        prior /= params.weight_sum;
        return KeyMass {
            prior,
            modified: prior * rho,
            clipped: false,
        };
    }
    let mut out = KeyMass {
        prior: 0.0,
        modified: 0.0,
        clipped: false,
    };
    for &u in left {
        for &v in right {
            if u == v {
                continue;
            }
            let raw = params.raw_prior(u as usize, v as usize);
            out.prior += raw.min(1.0);
            let m = raw * rho;
            out.clipped |= m > 1.0;
            out.modified += m.min(1.0);
        }
    }
    out
}

pub fn true_ratios(params: &GenModelParams, sensitive_mask: &[bool]) -> Result<TrueRatios> {
    let marginal = bias_free_ratios(params, sensitive_mask)?;
    let grouping = marginal.grouping.clone();
    let full = grouping.full();
    let ns = grouping.nonsensitive();
    let mut clipped = false;

    let mut full_mass = Vec::with_capacity(full.num_keys());
    for key in full.keys() {
        let m = key_mass(
            params,
            full.members(key.left),
            full.members(key.right),
            key.left == key.right,
            params.planted_ratio(key),
        );
        clipped |= m.clipped;
        full_mass.push(m);
    }
    let mut ns_mass = Vec::with_capacity(ns.num_keys());
    for key in ns.keys() {
        let m = key_mass(
            params,
            ns.members(key.left),
            ns.members(key.right),
            key.left == key.right,
            marginal.ratio(key),
        );
        clipped |= m.clipped;
        ns_mass.push(m);
    }
    let total_prior: f64 = full_mass.iter().map(|m| m.prior).sum();
    let total_modified: f64 = full_mass.iter().map(|m| m.modified).sum();
    let normalizer = if total_prior > 0.0 && total_modified > 0.0 {
        total_modified / total_prior
    } else {
        1.0
    };
    let ratio = |m: &KeyMass, rho: f64| {
        if m.prior > 0.0 {
            m.modified / m.prior / normalizer
        } else {
            rho / normalizer
        }
    };
    let planted: Vec<f64> = full.keys().map(|k| params.planted_ratio(k)).collect();
    let full_r = full_mass
        .iter()
        .zip(&planted)
        .map(|(m, &rho)| ratio(m, rho))
        .collect();
    let ns_r = ns_mass
        .iter()
        .zip(&marginal.ratios)
        .map(|(m, &rho)| ratio(m, rho))
        .collect();
    if clipped {
        log::warn!("true ratios: clipping at one affects the planted construction");
    }
    Ok(TrueRatios {
        grouping,
        planted,
        marginal: marginal.ratios,
        full: full_r,
        nonsensitive: ns_r,
        normalizer,
        clipped,
    })
}

/// Analytic `R` of one full key (see [`TrueRatios`]); sensitivity does not
/// affect full-key ratios.
pub fn true_ratio(params: &GenModelParams, key: PairKey) -> Result<f64> {
    let p = params.profiles.num_profiles() as u32;
    if key.left >= p || key.right >= p {
        return Err(UgeError::MissingKey(key.to_string()));
    }
    let mask = vec![false; params.schema.num_attributes()];
    Ok(true_ratios(params, &mask)?.full_ratio(key))
}

/// Draws every node's attribute values independently and uniformly from the
/// schema's dictionaries. Returns the row-major code matrix.
pub fn uniform_attribute_codes(schema: &AttributeSchema, n: usize, seed: u64) -> Result<Vec<u32>> {
    let k = schema.num_attributes();
    if let Some(attr) = (0..k).find(|&a| schema.values(a).is_empty()) {
        return Err(UgeError::InvalidArgument(format!(
            "attribute `{}` has no values",
            schema.name(attr)
        )));
    }
    let mut rng = stream(seed, &[lane::ATTRIBUTES]);
    let mut codes = Vec::with_capacity(n * k);
    for _ in 0..n {
        for attr in 0..k {
            codes.push(rng.gen_range(0..schema.values(attr).len() as u32));
        }
    }
    Ok(codes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gender_schema() -> AttributeSchema {
        AttributeSchema::new(vec!["gender".into()], vec![vec!["F".into(), "M".into()]]).unwrap()
    }

    fn balanced(n: usize, w: f64) -> GenModelParams {
        let codes = (0..n).map(|i| (i % 2) as u32).collect();
        GenModelParams::new(vec![w; n], gender_schema(), codes, 1).unwrap()
    }

    #[test]
    fn structural_probability_cases() {
        let p = balanced(10, 2.0);
        assert!((structural_edge_prob(&p, 0, 1).unwrap() - 0.2).abs() < 1e-15);
        let codes = vec![0, 0, 1, 1];
        let p = GenModelParams::new(vec![3.0, 4.0, 1.0, 2.0], gender_schema(), codes.clone(), 0)
            .unwrap();
        assert_eq!(structural_edge_prob(&p, 0, 1).unwrap(), 1.0);
        let p = GenModelParams::new(vec![1.0, 2.0, 8.0, 9.0], gender_schema(), codes, 0).unwrap();
        assert!((structural_edge_prob(&p, 0, 1).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(
            structural_edge_prob(&p, 2, 2),
            Err(UgeError::SelfPair(2))
        ));
        assert!(structural_edge_prob(&p, 0, 7).is_err());
    }

    #[test]
    fn uniform_codes_cover_dictionaries() {
        let s = AttributeSchema::new(
            vec!["a".into(), "b".into()],
            vec![
                vec!["x".into(), "y".into()],
                (0..5).map(|i| i.to_string()).collect(),
            ],
        )
        .unwrap();
        let codes = uniform_attribute_codes(&s, 2000, 3).unwrap();
        assert_eq!(codes.len(), 4000);
        assert_eq!(codes, uniform_attribute_codes(&s, 2000, 3).unwrap());
        let ones = codes.iter().step_by(2).filter(|&&c| c == 1).count();
        // Binomial(2000, 0.5): 4 sd is about 89
        assert!((ones as f64 - 1000.0).abs() < 90.0, "{ones}");
        assert!(codes.iter().skip(1).step_by(2).all(|&c| c < 5));
        let empty = AttributeSchema::new(vec!["e".into()], vec![vec![]]).unwrap();
        assert!(uniform_attribute_codes(&empty, 3, 0).is_err());
    }

    #[test]
    fn rejects_bad_weights_and_ratios() {
        let s = gender_schema();
        assert!(GenModelParams::new(vec![1.0, 0.0], s.clone(), vec![0, 1], 0).is_err());
        let mut p = GenModelParams::new(vec![1.0, 1.0], s, vec![0, 1], 0).unwrap();
        assert!(p.set_ratio_by_label("F|M", -1.0).is_err());
        assert!(matches!(
            p.set_ratio_by_label("F|X", 1.0),
            Err(UgeError::MissingKey(k)) if k == "F|X"
        ));
    }

    #[test]
    fn zero_ratio_forbids_edges() {
        let mut p = balanced(200, 20.0);
        p.set_ratio_by_label("M|M", 0.0).unwrap();
        let g = sample_biased_graph(&p).unwrap().graph;
        assert!(g.num_edges() > 0);
        for (u, v) in g.edges() {
            assert!(!(u % 2 == 1 && v % 2 == 1));
        }
    }

    #[test]
    fn marginal_of_symmetric_homophily() {
        let mut p = balanced(100, 1.0);
        p.set_ratio_by_label("F|F", 2.0).unwrap();
        p.set_ratio_by_label("F|M", 0.5).unwrap();
        p.set_ratio_by_label("M|F", 0.5).unwrap();
        p.set_ratio_by_label("M|M", 2.0).unwrap();
        let m = bias_free_ratios(&p, &[true]).unwrap();
        assert_eq!(m.ratios.len(), 1);
        assert!((m.ratios[0] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn marginal_is_identity_without_sensitive_attributes() {
        let mut p = balanced(30, 1.0);
        p.set_ratio_by_label("F|M", 0.3).unwrap();
        let m = bias_free_ratios(&p, &[false]).unwrap();
        for k in p.profiles().keys() {
            assert_eq!(m.ratio(k), p.planted_ratio(k));
        }
        let a = sample_biased_graph(&p).unwrap().graph;
        let b = sample_bias_free_graph(&p, &[false]).unwrap().graph;
        assert_eq!(a, b);
    }

    #[test]
    fn unit_ratios_give_unit_truth() {
        let codes = (0..40).map(|i| (i % 3 == 0) as u32).collect();
        let w = (0..40).map(|i| 1.0 + (i % 7) as f64).collect();
        let p = GenModelParams::new(w, gender_schema(), codes, 3).unwrap();
        for k in p.profiles().keys() {
            assert!((true_ratio(&p, k).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_key_truth_is_one() {
        let schema = AttributeSchema::new(vec!["a".into()], vec![vec!["x".into()]]).unwrap();
        let mut p = GenModelParams::new(vec![2.0; 10], schema, vec![0; 10], 0).unwrap();
        p.set_ratio(PairKey::new(0, 0), 3.7).unwrap();
        assert!((true_ratio(&p, PairKey::new(0, 0)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn homophily_multiplies_by_attribute_match() {
        let mut p = balanced(4, 1.0);
        p.apply_homophily(0, 3.0, 0.5).unwrap();
        let f = p.profiles().parse_profile("F", p.schema()).unwrap();
        let m = p.profiles().parse_profile("M", p.schema()).unwrap();
        assert_eq!(p.planted_ratio(PairKey::new(f, f)), 3.0);
        assert_eq!(p.planted_ratio(PairKey::new(f, m)), 0.5);
    }

    #[test]
    fn chung_lu_weight_mean() {
        let w = chung_lu_weights(1000, 12.0, Some(2.5)).unwrap();
        let mean = w.iter().sum::<f64>() / 1000.0;
        assert!((mean - 12.0).abs() < 1e-9);
        assert!(w[0] > w[999]);
        assert!(chung_lu_weights(10, 1.0, Some(0.5)).is_err());
    }
}
