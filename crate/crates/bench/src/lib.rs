//! Shared fixtures for the benchmarks.

use uge_core::biasgen::{
    chung_lu_weights, sample_biased_graph, uniform_attribute_codes, GenModelParams,
};
use uge_core::AttributeSchema;

/// Parameters of a planted graph with a binary sensitive attribute and
/// `communities` non-sensitive groups.
pub fn planted_params(n: usize, mean_degree: f64, communities: usize, seed: u64) -> GenModelParams {
    let mut schema = AttributeSchema::new(
        vec!["gender".into(), "community".into()],
        vec![
            vec!["F".into(), "M".into()],
            (0..communities).map(|i| format!("c{i}")).collect(),
        ],
    )
    .expect("valid schema");
    schema.set_sensitive(&["gender"]).expect("gender exists");
    let codes = uniform_attribute_codes(&schema, n, seed).expect("non-empty dictionaries");
    let weights = chung_lu_weights(n, mean_degree, None).expect("positive mean degree");
    let mut params = GenModelParams::new(weights, schema, codes, seed).expect("consistent shapes");
    params
        .apply_homophily(0, 3.0, 1.0 / 3.0)
        .expect("attribute 0");
    params
        .apply_homophily(1, 30.0, 1.0 / 30f64.sqrt())
        .expect("attribute 1");
    params
}

pub fn planted_graph(
    n: usize,
    mean_degree: f64,
    communities: usize,
    seed: u64,
) -> uge_core::AttributedGraph {
    let params = planted_params(n, mean_degree, communities, seed);
    sample_biased_graph(&params)
        .expect("sampling succeeds")
        .graph
}
