//! Text embedding files and their metadata sidecars.
//!
//! Embedding lines are `<original_id> <d floats>` in shortest round-trip
//! notation; `#` lines are comments. The sidecar holds `key=value` lines.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::model::{EmbeddingModel, ModelKind};
use super::train::Regime;
use crate::error::{Result, UgeError};
use crate::graph::AttributedGraph;

/// Writes one `id x1 x2 ...` line per node in shortest round-trip notation.
pub fn write_embeddings<W: Write>(
    model: &EmbeddingModel,
    ids: &[String],
    header: &[String],
    mut w: W,
) -> Result<()> {
    if ids.len() != model.num_nodes() {
        return Err(UgeError::InvalidArgument(format!(
            "{} ids for {} embedding rows",
            ids.len(),
            model.num_nodes()
        )));
    }
    for line in header {
        writeln!(w, "# {line}")?;
    }
    for (u, id) in ids.iter().enumerate() {
        write!(w, "{id}")?;
        for x in model.row(u) {
            write!(w, " {x:e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads embeddings and orders rows by the graph's node indices. Every node
/// must appear exactly once with `dim` values.
pub fn read_embeddings<R: BufRead>(
    r: R,
    name: &str,
    g: &AttributedGraph,
    dim: usize,
    kind: ModelKind,
) -> Result<EmbeddingModel> {
    let lookup = g.id_lookup();
    let n = g.num_nodes();
    let mut data = vec![0.0; n * dim];
    let mut seen = vec![false; n];
    let parse_err = |line: usize, message: String| UgeError::Parse {
        file: name.to_string(),
        line,
        message,
    };
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut tokens = text.split_whitespace();
        let id = tokens.next().unwrap_or_default();
        let &u = lookup
            .get(id)
            .ok_or_else(|| parse_err(i + 1, format!("node `{id}` is not in the graph")))?;
        if seen[u] {
            return Err(parse_err(i + 1, format!("node `{id}` appears twice")));
        }
        seen[u] = true;
        let values: Vec<f64> = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| parse_err(i + 1, format!("bad value `{t}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(UgeError::SchemaMismatch(format!(
                "{name} line {}: {} values, expected dimension {dim}",
                i + 1,
                values.len()
            )));
        }
        data[u * dim..(u + 1) * dim].copy_from_slice(&values);
    }
    if let Some(u) = seen.iter().position(|s| !s) {
        return Err(UgeError::SchemaMismatch(format!(
            "{name} has no embedding for node `{}` ({} of {n} rows present)",
            g.original_id(u),
            seen.iter().filter(|s| **s).count()
        )));
    }
    EmbeddingModel::from_data(n, dim, kind, data)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingMeta {
    pub dim: usize,
    pub regime: Regime,
    pub kind: ModelKind,
    pub seed: u64,
    pub config_hash: String,
}

impl EmbeddingMeta {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "dim={}", self.dim)?;
        writeln!(w, "regime={}", self.regime)?;
        writeln!(w, "model={}", self.kind)?;
        writeln!(w, "seed={}", self.seed)?;
        writeln!(w, "config_hash={}", self.config_hash)?;
        Ok(())
    }

    pub fn read<R: BufRead>(r: R, name: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in r.lines() {
            let line = line?;
            if let Some((k, v)) = line.split_once('=') {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |k: &str| {
            map.get(k)
                .cloned()
                .ok_or_else(|| UgeError::Format(format!("{name}: missing `{k}`")))
        };
        let num = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|_| UgeError::Format(format!("{name}: `{k}` is not an integer")))
        };
        Ok(Self {
            dim: num("dim")? as usize,
            regime: get("regime")?.parse()?,
            kind: get("model")?.parse()?,
            seed: num("seed")?,
            config_hash: get("config_hash")?,
        })
    }
}
