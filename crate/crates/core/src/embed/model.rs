use std::fmt;
use std::str::FromStr;

use crate::error::{Result, UgeError};

/// Loss family the embeddings were trained with. Both score pairs by the dot
/// product of their rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModelKind {
    /// Skip-gram style edge classifier with binary cross-entropy.
    #[default]
    DotBce,
    /// Matrix factorization with the pairwise logistic loss.
    MfBpr,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::DotBce => "dot-product-bce",
            ModelKind::MfBpr => "mf-bpr",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = UgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot-product-bce" | "bce" | "node2vec" => Ok(ModelKind::DotBce),
            "mf-bpr" | "bpr" | "mf" => Ok(ModelKind::MfBpr),
            other => Err(UgeError::InvalidArgument(format!(
                "unknown model kind `{other}` (expected dot-product-bce or mf-bpr)"
            ))),
        }
    }
}

/// Row-major `N x d` embedding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    data: Vec<f64>,
    n: usize,
    dim: usize,
    kind: ModelKind,
}

impl EmbeddingModel {
    pub fn zeros(n: usize, dim: usize, kind: ModelKind) -> Self {
        Self {
            data: vec![0.0; n * dim],
            n,
            dim,
            kind,
        }
    }

    pub fn from_data(n: usize, dim: usize, kind: ModelKind, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != n * dim {
            return Err(UgeError::InvalidArgument(format!(
                "embedding data has {} values, expected {n} x {dim}",
                data.len()
            )));
        }
        Ok(Self { data, n, dim, kind })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.data[u * self.dim..(u + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Dot product of rows `u` and `v`.
    pub fn score(&self, u: usize, v: usize) -> Result<f64> {
        for node in [u, v] {
            if node >= self.n {
                return Err(UgeError::NodeOutOfRange { node, n: self.n });
            }
        }
        Ok(self.score_unchecked(u, v))
    }

    #[inline]
    pub(crate) fn score_unchecked(&self, u: usize, v: usize) -> f64 {
        dot(self.row(u), self.row(v))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
