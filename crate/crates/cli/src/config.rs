//! Experiment configuration, read from a TOML file.
//!
//! ```toml
//! seed = 7
//! output = "run"                 # relative to the config file
//! sensitive = ["gender"]
//! regimes = ["none", "uge-c"]
//!
//! [generator]                    # or [data] with `edges` and `attributes`
//! nodes = 1000
//! mean_degree = 6.0
//!
//! [[generator.attribute]]
//! name = "gender"
//! values = ["F", "M"]
//! homophily = [3.0, 0.3333333333333333]
//!
//! [train]
//! epochs = 200
//! ```
//!
//! Every other section (`split`, `ratios`, `train`, `eval`, `sweep`) is
//! optional and falls back to the library defaults.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uge_core::embed::{ModelKind, Regime, Resample, TrainConfig};
use uge_core::eval::{EvalConfig, ProbeConfig};
use uge_core::rng::derive_seed;

use crate::error::{CliError, Result};

const GENERATE_SEED: u64 = 1;
const SPLIT_SEED: u64 = 2;
const TRAIN_SEED: u64 = 3;
const EVAL_SEED: u64 = 4;

/// Regularization weights tried by `sweep` unless the config lists its own.
pub const DEFAULT_LAMBDAS: [f64; 10] = [0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7, 1.9];

fn default_regimes() -> Vec<String> {
    Regime::ALL.iter().map(|r| r.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Not part of the config hash: moving a run does not change it.
    #[serde(skip_serializing)]
    pub output: PathBuf,
    #[serde(default)]
    pub sensitive: Vec<String>,
    #[serde(default = "default_regimes")]
    pub regimes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSection>,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub ratios: RatioSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(skip)]
    base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub edges: PathBuf,
    pub attributes: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub nodes: usize,
    pub mean_degree: f64,
    /// Power-law exponent of the Chung–Lu weights; equal weights if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree_exponent: Option<f64>,
    #[serde(rename = "attribute")]
    pub attributes: Vec<GenAttribute>,
    /// Planted ratios by key label (`F|M`, or `F/c0|M/c1` with several
    /// attributes). Applied after homophily and replacing it.
    #[serde(default)]
    pub ratios: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenAttribute {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
    /// Shorthand for `values = [name0, name1, ...]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// `[same, cross]` multipliers on the planted ratios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homophily: Option<[f64; 2]>,
}

impl GenAttribute {
    pub fn resolved_values(&self) -> Vec<String> {
        match (&self.values, self.count) {
            (Some(v), _) => v.clone(),
            (None, Some(c)) => (0..c).map(|i| format!("{}{i}", self.name)).collect(),
            (None, None) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub train_frac: f64,
    pub neg_ratio: usize,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            train_frac: 0.9,
            neg_ratio: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatioSection {
    pub estimate: bool,
    pub factorized: bool,
    pub alpha: f64,
}

impl Default for RatioSection {
    fn default() -> Self {
        Self {
            estimate: true,
            factorized: false,
            alpha: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub model: String,
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub lambda: f64,
    pub reg_fraction: f64,
    pub pairs_per_group: usize,
    pub reg_squared: bool,
    pub resample: String,
    pub batch_size: usize,
    pub weight_negatives: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            model: t.kind.to_string(),
            dim: t.dim,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            lambda: t.lambda,
            reg_fraction: t.reg_fraction,
            pairs_per_group: t.pairs_per_group,
            reg_squared: t.reg_squared,
            resample: t.resample.to_string(),
            batch_size: t.batch_size,
            weight_negatives: t.weight_negatives,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub k: usize,
    pub list_size: usize,
    pub min_group_pairs: usize,
    pub probe_train_frac: f64,
    pub probe_l2: f64,
    pub probe_learning_rate: f64,
    pub probe_iterations: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        let e = EvalConfig::default();
        Self {
            k: e.k,
            list_size: e.list_size,
            min_group_pairs: e.min_group_pairs,
            probe_train_frac: e.probe.train_frac,
            probe_l2: e.probe.l2,
            probe_learning_rate: e.probe.learning_rate,
            probe_iterations: e.probe.iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub regime: String,
    pub lambdas: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            regime: Regime::UgeC.to_string(),
            lambdas: DEFAULT_LAMBDAS.to_vec(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl ExperimentConfig {
    /// Reads and validates a config file. Relative paths inside it resolve
    /// against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Self::from_toml(&text, base)
            .map_err(|e| invalid(format!("{}: {}", path.display(), message(&e))))
    }

    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| invalid(e.message().to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_base_dir(mut self, base_dir: impl Into<PathBuf>) -> Self {
        self.base_dir = base_dir.into();
        self
    }

    /// Canonical TOML of every setting that influences results (the output
    /// location excluded).
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of [`Self::canonical`], as lowercase hex.
    pub fn config_hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data, &self.generator) {
            (Some(_), Some(_)) => {
                return Err(invalid("give either [data] or [generator], not both"))
            }
            (None, None) => return Err(invalid("missing [data] or [generator] section")),
            _ => {}
        }
        if let Some(g) = &self.generator {
            validate_generator(g, &self.sensitive)?;
        }
        let regimes = self.regimes()?;
        if regimes.is_empty() {
            return Err(invalid("regime list is empty"));
        }
        let mut seen = BTreeSet::new();
        for r in &regimes {
            if !seen.insert(*r) {
                return Err(invalid(format!("regime `{r}` listed twice")));
            }
        }
        let mut names = BTreeSet::new();
        for s in &self.sensitive {
            if !names.insert(s) {
                return Err(invalid(format!("sensitive attribute `{s}` listed twice")));
            }
        }
        if !(self.split.train_frac > 0.0 && self.split.train_frac < 1.0) {
            return Err(invalid(format!(
                "split.train_frac must lie in (0, 1), got {}",
                self.split.train_frac
            )));
        }
        if self.split.neg_ratio == 0 {
            return Err(invalid("split.neg_ratio must be at least 1"));
        }
        if !(self.ratios.alpha >= 0.0 && self.ratios.alpha.is_finite()) {
            return Err(invalid(format!(
                "ratios.alpha must be non-negative, got {}",
                self.ratios.alpha
            )));
        }
        self.train_config(Regime::NoDebias)?.validate()?;
        for r in &regimes {
            if r.uses_weights() && !self.ratios.estimate {
                return Err(invalid(format!(
                    "regime `{r}` needs ratio estimation; set ratios.estimate = true"
                )));
            }
        }
        let e = &self.eval;
        if e.k == 0 || e.list_size < e.k {
            return Err(invalid(format!(
                "eval needs 0 < k <= list_size, got k={} list_size={}",
                e.k, e.list_size
            )));
        }
        if e.min_group_pairs == 0 {
            return Err(invalid("eval.min_group_pairs must be at least 1"));
        }
        if !(e.probe_train_frac > 0.0 && e.probe_train_frac < 1.0) {
            return Err(invalid("eval.probe_train_frac must lie in (0, 1)"));
        }
        let rate_ok = e.probe_learning_rate > 0.0;
        let l2_ok = e.probe_l2 >= 0.0;
        if e.probe_iterations == 0 || !rate_ok || !l2_ok {
            return Err(invalid(
                "eval probe needs iterations > 0, learning rate > 0 and l2 >= 0",
            ));
        }
        self.sweep_regime()?;
        if self.sweep.lambdas.is_empty() {
            return Err(invalid("sweep.lambdas is empty"));
        }
        if let Some(l) = self
            .sweep
            .lambdas
            .iter()
            .find(|l| !(**l >= 0.0 && l.is_finite()))
        {
            return Err(invalid(format!(
                "sweep lambda {l} is not a non-negative number"
            )));
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.output)
    }

    pub fn edge_path(&self) -> PathBuf {
        match &self.data {
            Some(d) => self.base_dir.join(&d.edges),
            None => self.output_dir().join(crate::commands::EDGE_FILE),
        }
    }

    pub fn attribute_path(&self) -> PathBuf {
        match &self.data {
            Some(d) => self.base_dir.join(&d.attributes),
            None => self.output_dir().join(crate::commands::ATTRIBUTE_FILE),
        }
    }

    pub fn regimes(&self) -> Result<Vec<Regime>> {
        self.regimes
            .iter()
            .map(|r| r.parse().map_err(CliError::from))
            .collect()
    }

    pub fn sweep_regime(&self) -> Result<Regime> {
        Ok(self.sweep.regime.parse()?)
    }

    pub fn generator_seed(&self) -> u64 {
        derive_seed(self.seed, &[GENERATE_SEED])
    }

    pub fn split_seed(&self) -> u64 {
        derive_seed(self.seed, &[SPLIT_SEED])
    }

    /// Training settings for `regime`. Every regime shares the training
    /// seed, so runs differ only in their objective.
    pub fn train_config(&self, regime: Regime) -> Result<TrainConfig> {
        let t = &self.train;
        Ok(TrainConfig {
            regime,
            kind: t.model.parse::<ModelKind>()?,
            dim: t.dim,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            lambda: t.lambda,
            reg_fraction: t.reg_fraction,
            pairs_per_group: t.pairs_per_group,
            reg_squared: t.reg_squared,
            resample: t.resample.parse::<Resample>()?,
            batch_size: t.batch_size,
            weight_negatives: t.weight_negatives,
            seed: derive_seed(self.seed, &[TRAIN_SEED]),
        })
    }

    pub fn eval_config(&self) -> EvalConfig {
        let e = &self.eval;
        EvalConfig {
            k: e.k,
            list_size: e.list_size,
            probe: ProbeConfig {
                train_frac: e.probe_train_frac,
                l2: e.probe_l2,
                learning_rate: e.probe_learning_rate,
                iterations: e.probe_iterations,
            },
            min_group_pairs: e.min_group_pairs,
            seed: derive_seed(self.seed, &[EVAL_SEED]),
        }
    }
}

fn message(e: &CliError) -> &str {
    match e {
        CliError::Validation(m) | CliError::Runtime(m) => m,
    }
}

fn validate_generator(g: &GeneratorSection, sensitive: &[String]) -> Result<()> {
    if g.nodes < 2 {
        return Err(invalid("generator.nodes must be at least 2"));
    }
    if !(g.mean_degree > 0.0 && g.mean_degree.is_finite()) {
        return Err(invalid("generator.mean_degree must be positive"));
    }
    if g.attributes.is_empty() {
        return Err(invalid(
            "generator needs at least one [[generator.attribute]]",
        ));
    }
    let mut names = BTreeSet::new();
    for a in &g.attributes {
        if !names.insert(a.name.as_str()) {
            return Err(invalid(format!(
                "generator attribute `{}` defined twice",
                a.name
            )));
        }
        match (&a.values, a.count) {
            (Some(_), Some(_)) => {
                return Err(invalid(format!(
                    "attribute `{}`: give values or count, not both",
                    a.name
                )))
            }
            (None, None) => return Err(invalid(format!("attribute `{}` has no values", a.name))),
            _ => {}
        }
        if a.resolved_values().is_empty() {
            return Err(invalid(format!("attribute `{}` has no values", a.name)));
        }
        if let Some([same, cross]) = a.homophily {
            if !(same >= 0.0 && cross >= 0.0 && same.is_finite() && cross.is_finite()) {
                return Err(invalid(format!(
                    "attribute `{}`: homophily factors must be non-negative",
                    a.name
                )));
            }
        }
    }
    if let Some(s) = sensitive.iter().find(|s| !names.contains(s.as_str())) {
        return Err(invalid(format!(
            "sensitive attribute `{s}` is not a generator attribute"
        )));
    }
    Ok(())
}
