use std::io::Write;

use serde::{Deserialize, Serialize};

use super::fairness::{evaluation_pairs, fairness_dp_eo};
use super::ndcg::ndcg_at_k;
use super::probe::{probe_micro_f1, ProbeConfig};
use crate::embed::EmbeddingModel;
use crate::error::{Result, UgeError};
use crate::graph::{AttributedGraph, EdgeSplits};
use crate::rng::derive_seed;

/// Labels the DP/EO reading used in reports.
pub const FAIRNESS_DEFINITION: &str =
    "max gap of mean sigmoid(score) over unordered attribute-value pairs; EO over test positives";

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub k: usize,
    pub list_size: usize,
    pub probe: ProbeConfig,
    pub min_group_pairs: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k: 10,
            list_size: 100,
            probe: ProbeConfig::default(),
            min_group_pairs: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeMetrics {
    pub attribute: String,
    pub micro_f1: f64,
    pub dp: Option<f64>,
    pub eo: Option<f64>,
    pub fairness_groups: usize,
    pub excluded_groups: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub regime: String,
    pub model: String,
    pub ndcg_at_k: f64,
    pub k: usize,
    pub list_size: usize,
    pub attributes: Vec<AttributeMetrics>,
    pub evaluated_nodes: usize,
    pub evaluated_pairs: usize,
    pub fairness_definition: String,
    pub config_hash: String,
    pub seed: u64,
}

pub const CSV_HEADER: &str =
    "regime,attribute,micro_f1,ndcg,dp,eo,evaluated_nodes,evaluated_pairs,excluded_groups,config_hash,seed";

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| UgeError::Format(format!("report: {e}")))
    }

    pub fn metrics(&self, attribute: &str) -> Option<&AttributeMetrics> {
        self.attributes.iter().find(|a| a.attribute == attribute)
    }

    /// One CSV row per sensitive attribute (a single row with an empty
    /// attribute when there is none), matching [`CSV_HEADER`].
    pub fn write_csv_rows<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let base = |attr: &str, f1: String, dp: String, eo: String, excl: usize| {
            vec![
                self.regime.clone(),
                attr.to_string(),
                f1,
                self.ndcg_at_k.to_string(),
                dp,
                eo,
                self.evaluated_nodes.to_string(),
                self.evaluated_pairs.to_string(),
                excl.to_string(),
                self.config_hash.clone(),
                self.seed.to_string(),
            ]
        };
        let rows: Vec<Vec<String>> = if self.attributes.is_empty() {
            vec![base("", String::new(), String::new(), String::new(), 0)]
        } else {
            self.attributes
                .iter()
                .map(|a| {
                    base(
                        &a.attribute,
                        a.micro_f1.to_string(),
                        opt(a.dp),
                        opt(a.eo),
                        a.excluded_groups,
                    )
                })
                .collect()
        };
        for r in rows {
            w.write_record(&r)
                .map_err(|e| UgeError::Format(format!("csv: {e}")))?;
        }
        Ok(())
    }
}

/// Probe Micro-F1 and DP/EO for every sensitive attribute plus NDCG@k.
pub fn evaluate(
    model: &EmbeddingModel,
    g: &AttributedGraph,
    splits: &EdgeSplits,
    cfg: &EvalConfig,
    regime: &str,
    config_hash: &str,
) -> Result<EvalReport> {
    if model.num_nodes() != g.num_nodes() {
        return Err(UgeError::SchemaMismatch(format!(
            "embeddings have {} rows, graph has {} nodes",
            model.num_nodes(),
            g.num_nodes()
        )));
    }
    let ndcg = ndcg_at_k(model, g, splits, cfg.k, cfg.list_size, cfg.seed)?;
    let pairs = evaluation_pairs(splits);
    let schema = g.schema();
    let mut attributes = Vec::new();
    for attr in schema.sensitive_attributes() {
        let labels = g.attribute_column(attr);
        let probe = probe_micro_f1(
            model,
            &labels,
            &cfg.probe,
            derive_seed(cfg.seed, &[attr as u64]),
        )?;
        let fair = fairness_dp_eo(model, g, &pairs, attr, cfg.min_group_pairs)?;
        attributes.push(AttributeMetrics {
            attribute: schema.name(attr).to_string(),
            micro_f1: probe.micro_f1,
            dp: fair.dp,
            eo: fair.eo,
            fairness_groups: fair.dp_groups,
            excluded_groups: fair.excluded_groups,
        });
    }
    Ok(EvalReport {
        regime: regime.to_string(),
        model: model.kind().to_string(),
        ndcg_at_k: ndcg.value,
        k: cfg.k,
        list_size: cfg.list_size,
        attributes,
        evaluated_nodes: ndcg.evaluated_nodes,
        evaluated_pairs: pairs.len(),
        fairness_definition: FAIRNESS_DEFINITION.to_string(),
        config_hash: config_hash.to_string(),
        seed: cfg.seed,
    })
}
