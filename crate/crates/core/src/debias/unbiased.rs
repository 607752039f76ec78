//! Exact check that reweighting observed edges recovers the bias-free
//! expected loss on small planted graphs.

use crate::biasgen::{bias_free_ratios, GenModelParams};
use crate::error::{Result, UgeError};

use super::RatioTable;

/// Largest graph for which the pair enumeration is allowed.
pub const MAX_ENUMERATION_NODES: usize = 64;

/// Returns `(lhs, rhs)` where
///
/// * `lhs = Σ_{u≠v} L(u,v) w(u,v) P_o(u,v)` is the reweighted expected loss
///   under the observed (planted) edge distribution, and
/// * `rhs = Σ_{u≠v} L(u,v) P~(u,v)` the expected loss under the bias-free
///   distribution.
///
/// `loss` is a row-major `N x N` matrix over ordered pairs; its diagonal is
/// ignored. The sensitive attributes are taken from the table's schema.
pub fn verify_unbiased_expectation(
    params: &GenModelParams,
    table: &RatioTable,
    loss: &[f64],
) -> Result<(f64, f64)> {
    let n = params.num_nodes();
    if n > MAX_ENUMERATION_NODES {
        return Err(UgeError::TooLarge(n, MAX_ENUMERATION_NODES));
    }
    if loss.len() != n * n {
        return Err(UgeError::InvalidArgument(format!(
            "loss matrix has {} entries, expected {}",
            loss.len(),
            n * n
        )));
    }
    if table.grouping().full().num_nodes() != n {
        return Err(UgeError::SchemaMismatch(format!(
            "table covers {} nodes, generator has {n}",
            table.grouping().full().num_nodes()
        )));
    }
    let marginal = bias_free_ratios(params, table.schema().sensitive_mask())?;
    let profiles = params.profiles();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            let l = loss[u * n + v];
            let rho = params.planted_ratio(profiles.key_of(u, v));
            let ns = marginal.grouping.nonsensitive();
            let rho_tilde = marginal.ratio(ns.key_of(u, v));
            lhs += l * table.node_weight(u, v) * params.modified_prob(u, v, rho);
            rhs += l * params.modified_prob(u, v, rho_tilde);
        }
    }
    Ok((lhs, rhs))
}
