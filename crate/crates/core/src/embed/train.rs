use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use super::adam::{adam_step, AdamState};
use super::fairwalk::{draw, partition, sensitive_profiles};
use super::loss::{bce_edge_loss, bpr_loss};
use super::model::{EmbeddingModel, ModelKind};
use crate::debias::RatioTable;
use crate::debias::{
    evaluate_regularizer, regularizer_scale, sample_group_pairs, sample_member_pairs, GroupSample,
};
use crate::error::{Result, UgeError};
use crate::graph::{AttributedGraph, EdgeSplits, Grouping};
use crate::rng::{derive_seed, lane, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    NoDebias,
    UgeW,
    UgeR,
    UgeC,
    Fairwalk,
    Random,
}

impl Regime {
    pub const ALL: [Regime; 6] = [
        Regime::NoDebias,
        Regime::UgeW,
        Regime::UgeR,
        Regime::UgeC,
        Regime::Fairwalk,
        Regime::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::NoDebias => "none",
            Regime::UgeW => "uge-w",
            Regime::UgeR => "uge-r",
            Regime::UgeC => "uge-c",
            Regime::Fairwalk => "fairwalk",
            Regime::Random => "random",
        }
    }

    pub fn uses_weights(self) -> bool {
        matches!(self, Regime::UgeW | Regime::UgeC)
    }

    pub fn uses_regularizer(self) -> bool {
        matches!(self, Regime::UgeR | Regime::UgeC)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = UgeError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" | "no-debias" => Regime::NoDebias,
            "uge-w" => Regime::UgeW,
            "uge-r" => Regime::UgeR,
            "uge-c" => Regime::UgeC,
            "fairwalk" => Regime::Fairwalk,
            "random" => Regime::Random,
            other => {
                return Err(UgeError::InvalidArgument(format!(
                "unknown regime `{other}` (expected none, uge-w, uge-r, uge-c, fairwalk or random)"
            )))
            }
        })
    }
}

/// When regularizer group pairs are redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resample {
    #[default]
    Epoch,
    Step,
}

impl FromStr for Resample {
    type Err = UgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epoch" => Ok(Resample::Epoch),
            "step" => Ok(Resample::Step),
            other => Err(UgeError::InvalidArgument(format!(
                "unknown resample mode `{other}` (expected epoch or step)"
            ))),
        }
    }
}

impl fmt::Display for Resample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Resample::Epoch => "epoch",
            Resample::Step => "step",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub regime: Regime,
    pub kind: ModelKind,
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub lambda: f64,
    /// Fraction of full keys whose group pairs enter the regularizer.
    pub reg_fraction: f64,
    pub pairs_per_group: usize,
    pub reg_squared: bool,
    pub resample: Resample,
    /// Slots per optimizer step; 0 means one full-batch step per epoch.
    pub batch_size: usize,
    pub weight_negatives: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            regime: Regime::NoDebias,
            kind: ModelKind::DotBce,
            dim: 16,
            epochs: 800,
            learning_rate: 0.01,
            weight_decay: 0.0005,
            lambda: 0.5,
            reg_fraction: 0.1,
            pairs_per_group: 128,
            reg_squared: false,
            resample: Resample::Epoch,
            batch_size: 0,
            weight_negatives: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(UgeError::InvalidArgument(m));
        if self.dim == 0 {
            return bad("embedding dimension must be positive".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(self.reg_fraction > 0.0 && self.reg_fraction <= 1.0) {
            return bad(format!(
                "reg_fraction must lie in (0, 1], got {}",
                self.reg_fraction
            ));
        }
        if self.pairs_per_group == 0 {
            return bad("pairs_per_group must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct BceTerm {
    u: u32,
    v: u32,
    label: bool,
    weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct BprTerm {
    u: u32,
    pos: u32,
    neg: u32,
    weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    /// Weighted data loss averaged over slots.
    pub data_loss: f64,
    /// Regularizer value, normalized per non-sensitive key.
    pub reg_value: f64,
    /// `data_loss + λ reg_value`.
    pub total: f64,
}

/// The training loss of one optimizer step with all sampled quantities
/// (positives, negatives, weights, regularizer pairs) fixed.
#[derive(Debug, Clone)]
pub struct Objective {
    kind: ModelKind,
    bce: Vec<BceTerm>,
    bpr: Vec<BprTerm>,
    slots: usize,
    lambda: f64,
    squared: bool,
    reg: Vec<GroupSample>,
    reg_scale: f64,
}

fn add_scaled(grad: &mut [f64], model: &EmbeddingModel, u: usize, v: usize, c: f64) {
    let d = model.dim();
    let (zu, zv) = (model.row(u), model.row(v));
    for (g, x) in grad[u * d..(u + 1) * d].iter_mut().zip(zv) {
        *g += c * x;
    }
    for (g, x) in grad[v * d..(v + 1) * d].iter_mut().zip(zu) {
        *g += c * x;
    }
}

impl Objective {
    pub fn num_slots(&self) -> usize {
        self.slots
    }

    pub fn num_terms(&self) -> usize {
        self.bce.len() + self.bpr.len()
    }

    pub fn regularizer_samples(&self) -> &[GroupSample] {
        &self.reg
    }

    pub fn evaluate(&self, model: &EmbeddingModel) -> ObjectiveValue {
        self.run(model, None)
    }

    /// Writes the gradient of the total loss into `grad` (overwritten).
    pub fn gradient(&self, model: &EmbeddingModel, grad: &mut [f64]) -> ObjectiveValue {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.run(model, Some(grad))
    }

    fn run(&self, model: &EmbeddingModel, mut grad: Option<&mut [f64]>) -> ObjectiveValue {
        let norm = if self.slots > 0 {
            1.0 / self.slots as f64
        } else {
            0.0
        };
        let mut data = 0.0;
        match self.kind {
            ModelKind::DotBce => {
                for t in &self.bce {
                    let (u, v) = (t.u as usize, t.v as usize);
                    let (l, dl) = bce_edge_loss(model.score_unchecked(u, v), t.label);
                    data += t.weight * l;
                    if let Some(g) = grad.as_deref_mut() {
                        add_scaled(g, model, u, v, norm * t.weight * dl);
                    }
                }
            }
            ModelKind::MfBpr => {
                for t in &self.bpr {
                    let (u, p, n) = (t.u as usize, t.pos as usize, t.neg as usize);
                    let (l, dp, dn) =
                        bpr_loss(model.score_unchecked(u, p), model.score_unchecked(u, n));
                    data += t.weight * l;
                    if let Some(g) = grad.as_deref_mut() {
                        add_scaled(g, model, u, p, norm * t.weight * dp);
                        add_scaled(g, model, u, n, norm * t.weight * dn);
                    }
                }
            }
        }
        let data_loss = data * norm;
        let mut reg_value = 0.0;
        if self.lambda > 0.0 && !self.reg.is_empty() {
            let term =
                evaluate_regularizer(|u, v| model.score_unchecked(u, v), &self.reg, self.squared);
            reg_value = self.reg_scale * term.value;
            if let Some(g) = grad {
                let c_reg = self.lambda * self.reg_scale;
                for c in &term.contributions {
                    add_scaled(g, model, c.u as usize, c.v as usize, c_reg * c.coeff);
                }
            }
        }
        ObjectiveValue {
            data_loss,
            reg_value,
            total: data_loss + self.lambda * reg_value,
        }
    }
}

/// One positive slot: node `u`, its `index`-th training positive and the
/// positive actually used (differs from the listed one under fairwalk).
#[derive(Debug, Clone, Copy)]
struct Slot {
    u: u32,
    index: u32,
    pos: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub data_loss: f64,
    pub reg_value: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn write_csv<W: Write>(&self, header: &[String], mut w: W) -> Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "epoch,loss,reg_term,total")?;
        for r in &self.records {
            writeln!(w, "{},{},{},{}", r.epoch, r.data_loss, r.reg_value, r.total)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: EmbeddingModel,
    pub log: TrainLog,
}

/// Validated training inputs. Builds the per-step objectives and runs the
/// optimizer.
pub struct Trainer<'a> {
    g: &'a AttributedGraph,
    splits: &'a EdgeSplits,
    table: Option<&'a RatioTable>,
    cfg: TrainConfig,
    grouping: Option<Grouping>,
    fair_groups: Option<Vec<Vec<Vec<u32>>>>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        g: &'a AttributedGraph,
        splits: &'a EdgeSplits,
        table: Option<&'a RatioTable>,
        cfg: &TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if splits.nodes.len() != g.num_nodes() {
            return Err(UgeError::SchemaMismatch(format!(
                "splits cover {} nodes, graph has {}",
                splits.nodes.len(),
                g.num_nodes()
            )));
        }
        let table = if cfg.regime.uses_weights() {
            let t = table.ok_or_else(|| UgeError::MissingRatioTable(cfg.regime.to_string()))?;
            t.check_graph(g)?;
            Some(t)
        } else {
            None
        };
        let grouping =
            (cfg.regime.uses_regularizer() && cfg.lambda > 0.0).then(|| Grouping::from_graph(g));
        let fair_groups = (cfg.regime == Regime::Fairwalk).then(|| {
            let profiles = sensitive_profiles(g);
            splits
                .nodes
                .iter()
                .map(|ex| partition(&ex.train_pos, &profiles))
                .collect()
        });
        Ok(Self {
            g,
            splits,
            table,
            cfg: cfg.clone(),
            grouping,
            fair_groups,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    fn slots(&self, epoch: usize) -> Vec<Slot> {
        let mut out = Vec::with_capacity(self.splits.num_train_positives());
        for (u, ex) in self.splits.nodes.iter().enumerate() {
            if ex.train_pos.is_empty() {
                continue;
            }
            let mut rng = self
                .fair_groups
                .as_ref()
                .map(|_| stream(self.cfg.seed, &[lane::FAIRWALK, epoch as u64, u as u64]));
            for (i, &v) in ex.train_pos.iter().enumerate() {
                let pos = match (&self.fair_groups, rng.as_mut()) {
                    (Some(groups), Some(r)) => draw(&groups[u], r),
                    _ => v,
                };
                out.push(Slot {
                    u: u as u32,
                    index: i as u32,
                    pos,
                });
            }
        }
        out
    }

    fn weight(&self, u: u32, v: u32) -> f64 {
        match self.table {
            Some(t) => t.node_weight(u as usize, v as usize),
            None => 1.0,
        }
    }

    fn reg_samples(&self, epoch: usize, step: usize) -> Result<(Vec<GroupSample>, f64)> {
        let Some(grouping) = &self.grouping else {
            return Ok((Vec::new(), 0.0));
        };
        let step = match self.cfg.resample {
            Resample::Epoch => 0,
            Resample::Step => step,
        };
        let seed = derive_seed(self.cfg.seed, &[epoch as u64, step as u64]);
        let groups = sample_group_pairs(grouping, self.cfg.reg_fraction, seed)?;
        let samples = sample_member_pairs(grouping, &groups, self.cfg.pairs_per_group, seed);
        Ok((samples, regularizer_scale(grouping, groups.len())))
    }

    fn objective_for(&self, slots: &[Slot], epoch: usize, step: usize) -> Result<Objective> {
        let (reg, reg_scale) = self.reg_samples(epoch, step)?;
        let weight_neg = self.cfg.weight_negatives && self.table.is_some();
        let mut bce = Vec::new();
        let mut bpr = Vec::new();
        for s in slots {
            let ex = self.splits.node(s.u as usize);
            let w_pos = self.weight(s.u, s.pos);
            let stride = ex.train_pos.len();
            let negs = ex
                .train_neg
                .iter()
                .skip(s.index as usize)
                .step_by(stride)
                .copied();
            match self.cfg.kind {
                ModelKind::DotBce => {
                    bce.push(BceTerm {
                        u: s.u,
                        v: s.pos,
                        label: true,
                        weight: w_pos,
                    });
                    for n in negs {
                        bce.push(BceTerm {
                            u: s.u,
                            v: n,
                            label: false,
                            weight: if weight_neg { self.weight(s.u, n) } else { 1.0 },
                        });
                    }
                }
                ModelKind::MfBpr => {
                    for n in negs {
                        let w_neg = if weight_neg { self.weight(s.u, n) } else { 1.0 };
                        bpr.push(BprTerm {
                            u: s.u,
                            pos: s.pos,
                            neg: n,
                            weight: w_pos * w_neg,
                        });
                    }
                }
            }
        }
        Ok(Objective {
            kind: self.cfg.kind,
            bce,
            bpr,
            slots: slots.len(),
            lambda: if self.grouping.is_some() {
                self.cfg.lambda
            } else {
                0.0
            },
            squared: self.cfg.reg_squared,
            reg,
            reg_scale,
        })
    }

    /// The full-batch objective of `epoch`.
    pub fn epoch_objective(&self, epoch: usize) -> Result<Objective> {
        let slots = self.slots(epoch);
        self.objective_for(&slots, epoch, 0)
    }

    /// Initial embeddings, uniform in `[-1/√d, 1/√d]`.
    pub fn initial_model(&self) -> EmbeddingModel {
        let (n, d) = (self.g.num_nodes(), self.cfg.dim);
        let bound = 1.0 / (d as f64).sqrt();
        let mut rng = stream(self.cfg.seed, &[lane::INIT]);
        let data = (0..n * d).map(|_| rng.gen_range(-bound..=bound)).collect();
        EmbeddingModel::from_data(n, d, self.cfg.kind, data).expect("shape is consistent")
    }

    pub fn run(&self) -> Result<TrainOutcome> {
        let (n, d) = (self.g.num_nodes(), self.cfg.dim);
        if self.cfg.regime == Regime::Random {
            let mut rng = stream(self.cfg.seed, &[lane::INIT]);
            let data = (0..n * d).map(|_| rng.gen::<f64>()).collect();
            return Ok(TrainOutcome {
                model: EmbeddingModel::from_data(n, d, self.cfg.kind, data)?,
                log: TrainLog::default(),
            });
        }
        let mut model = self.initial_model();
        let mut adam = AdamState::new(n * d);
        let mut grad = vec![0.0; n * d];
        let mut log = TrainLog::default();
        for epoch in 0..self.cfg.epochs {
            let mut slots = self.slots(epoch);
            let batch = if self.cfg.batch_size == 0 {
                slots.len().max(1)
            } else {
                slots.shuffle(&mut stream(self.cfg.seed, &[lane::SHUFFLE, epoch as u64]));
                self.cfg.batch_size
            };
            let mut record = EpochRecord {
                epoch,
                data_loss: 0.0,
                reg_value: 0.0,
                total: 0.0,
            };
            let chunks: Vec<&[Slot]> = if slots.is_empty() {
                vec![&slots[..]]
            } else {
                slots.chunks(batch).collect()
            };
            let steps = chunks.len() as f64;
            for (step, chunk) in chunks.into_iter().enumerate() {
                let objective = self.objective_for(chunk, epoch, step)?;
                let value = objective.gradient(&model, &mut grad);
                if !value.total.is_finite() {
                    return Err(UgeError::NonFinite(format!(
                        "loss {} at epoch {epoch}, step {step}",
                        value.total
                    )));
                }
                adam_step(
                    &mut adam,
                    model.data_mut(),
                    &grad,
                    self.cfg.learning_rate,
                    self.cfg.weight_decay,
                )?;
                record.data_loss += value.data_loss / steps;
                record.reg_value += value.reg_value / steps;
                record.total += value.total / steps;
            }
            log::debug!(
                "{} epoch {epoch}: loss {:.6} reg {:.6}",
                self.cfg.regime,
                record.data_loss,
                record.reg_value
            );
            log.records.push(record);
        }
        Ok(TrainOutcome { model, log })
    }
}

/// Trains embeddings under `cfg.regime`. Weighted regimes require a ratio
/// table built over the same graph.
pub fn train(
    g: &AttributedGraph,
    splits: &EdgeSplits,
    table: Option<&RatioTable>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    Trainer::new(g, splits, table, cfg)?.run()
}
