//! Multinomial logistic regression probe predicting a node attribute from
//! its embedding.

use rand::seq::SliceRandom;

use crate::embed::EmbeddingModel;
use crate::error::{Result, UgeError};
use crate::rng::{lane, stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub train_frac: f64,
    pub l2: f64,
    pub learning_rate: f64,
    pub iterations: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            train_frac: 0.8,
            l2: 1e-4,
            learning_rate: 0.1,
            iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub micro_f1: f64,
    pub accuracy: f64,
    pub classes: usize,
    pub train_nodes: usize,
    pub test_nodes: usize,
    /// `confusion[true][predicted]` over the held-out nodes.
    pub confusion: Vec<Vec<usize>>,
}

/// Micro-averaged F1 from a confusion matrix.
pub fn micro_f1(confusion: &[Vec<usize>]) -> f64 {
    let c = confusion.len();
    let tp: usize = (0..c).map(|i| confusion[i][i]).sum();
    let fp: usize = (0..c)
        .map(|j| {
            (0..c)
                .filter(|&i| i != j)
                .map(|i| confusion[i][j])
                .sum::<usize>()
        })
        .sum();
    let fn_: usize = (0..c)
        .map(|i| {
            (0..c)
                .filter(|&j| j != i)
                .map(|j| confusion[i][j])
                .sum::<usize>()
        })
        .sum();
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    2.0 * precision * recall / (precision + recall)
}

struct Softmax {
    weights: Vec<f64>,
    bias: Vec<f64>,
    dim: usize,
    classes: usize,
}

impl Softmax {
    fn probabilities(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate().take(self.classes) {
            let w = &self.weights[c * self.dim..(c + 1) * self.dim];
            *o = self.bias[c] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max).exp();
            total += *o;
        }
        out.iter_mut().for_each(|o| *o /= total);
    }

    fn predict(&self, x: &[f64], scratch: &mut [f64]) -> usize {
        self.probabilities(x, scratch);
        // first maximal class on ties
        let mut best = 0;
        for c in 1..self.classes {
            if scratch[c] > scratch[best] {
                best = c;
            }
        }
        best
    }
}

/// Trains the probe on a seeded `train_frac` share of the nodes and reports
/// Micro-F1 on the rest. Features are standardized with training-set
/// statistics.
pub fn probe_micro_f1(
    model: &EmbeddingModel,
    labels: &[u32],
    cfg: &ProbeConfig,
    seed: u64,
) -> Result<ProbeResult> {
    let n = model.num_nodes();
    let d = model.dim();
    if labels.len() != n {
        return Err(UgeError::SchemaMismatch(format!(
            "{} labels for {n} embeddings",
            labels.len()
        )));
    }
    if !(cfg.train_frac > 0.0 && cfg.train_frac < 1.0) {
        return Err(UgeError::InvalidArgument(format!(
            "probe train fraction must lie in (0, 1), got {}",
            cfg.train_frac
        )));
    }
    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let class_of = |l: u32| classes.binary_search(&l).expect("label is present");
    let c = classes.len();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, &[lane::PROBE]));
    let n_train = (cfg.train_frac * n as f64).floor() as usize;
    let (train, test) = order.split_at(n_train);
    if test.is_empty() {
        return Err(UgeError::Degenerate("probe has no held-out nodes".into()));
    }
    let mut train_classes: Vec<usize> = train.iter().map(|&u| class_of(labels[u])).collect();
    train_classes.sort_unstable();
    train_classes.dedup();
    if train_classes.len() < 2 {
        return Err(UgeError::Degenerate(
            "probe training set contains a single class".into(),
        ));
    }

    let mut mean = vec![0.0; d];
    for &u in train {
        for (m, x) in mean.iter_mut().zip(model.row(u)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= train.len() as f64);
    let mut std = vec![0.0; d];
    for &u in train {
        for k in 0..d {
            std[k] += (model.row(u)[k] - mean[k]).powi(2);
        }
    }
    for s in std.iter_mut() {
        *s = (*s / train.len() as f64).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    let features = |u: usize| -> Vec<f64> {
        model
            .row(u)
            .iter()
            .enumerate()
            .map(|(k, x)| (x - mean[k]) / std[k])
            .collect()
    };
    let train_x: Vec<Vec<f64>> = train.iter().map(|&u| features(u)).collect();
    let train_y: Vec<usize> = train.iter().map(|&u| class_of(labels[u])).collect();

    let mut clf = Softmax {
        weights: vec![0.0; c * d],
        bias: vec![0.0; c],
        dim: d,
        classes: c,
    };
    let mut p = vec![0.0; c];
    let mut gw = vec![0.0; c * d];
    let mut gb = vec![0.0; c];
    let inv = 1.0 / train_x.len() as f64;
    for _ in 0..cfg.iterations {
        gw.iter_mut().for_each(|g| *g = 0.0);
        gb.iter_mut().for_each(|g| *g = 0.0);
        for (x, &y) in train_x.iter().zip(&train_y) {
            clf.probabilities(x, &mut p);
            for cl in 0..c {
                let err = p[cl] - if cl == y { 1.0 } else { 0.0 };
                gb[cl] += err * inv;
                for k in 0..d {
                    gw[cl * d + k] += err * x[k] * inv;
                }
            }
        }
        for (w, g) in clf.weights.iter_mut().zip(&gw) {
            *w -= cfg.learning_rate * (g + cfg.l2 * *w);
        }
        for (b, g) in clf.bias.iter_mut().zip(&gb) {
            *b -= cfg.learning_rate * g;
        }
    }

    let mut confusion = vec![vec![0usize; c]; c];
    let mut correct = 0;
    for &u in test {
        let truth = class_of(labels[u]);
        let pred = clf.predict(&features(u), &mut p);
        confusion[truth][pred] += 1;
        correct += usize::from(truth == pred);
    }
    let accuracy = correct as f64 / test.len() as f64;
    let f1 = micro_f1(&confusion);
    assert!(
        (f1 - accuracy).abs() <= 1e-12,
        "micro-F1 {f1} differs from accuracy {accuracy}"
    );
    Ok(ProbeResult {
        micro_f1: f1,
        accuracy,
        classes: c,
        train_nodes: train.len(),
        test_nodes: test.len(),
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::ModelKind;
    use rand::Rng;

    fn random_model(n: usize, d: usize, seed: u64) -> EmbeddingModel {
        let mut rng = stream(seed, &[1]);
        let data = (0..n * d).map(|_| rng.gen::<f64>()).collect();
        EmbeddingModel::from_data(n, d, ModelKind::DotBce, data).unwrap()
    }

    #[test]
    fn separable_classes_are_perfect() {
        let n = 200;
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y = (i % 2) as u32;
            let offset = if y == 0 { -2.0 } else { 2.0 };
            data.extend([offset + (i as f64 * 0.01).sin() * 0.1, (i as f64).cos()]);
            labels.push(y);
        }
        let m = EmbeddingModel::from_data(n, 2, ModelKind::DotBce, data).unwrap();
        let r = probe_micro_f1(&m, &labels, &ProbeConfig::default(), 3).unwrap();
        assert_eq!(r.micro_f1, 1.0);
        assert_eq!(r.train_nodes, 160);
        assert_eq!(r.test_nodes, 40);
    }

    #[test]
    fn random_embeddings_are_at_chance() {
        let n = 1000;
        let labels: Vec<u32> = (0..n).map(|i| (i % 2) as u32).collect();
        let mean: f64 = (0..20)
            .map(|s| {
                probe_micro_f1(&random_model(n, 16, s), &labels, &ProbeConfig::default(), s)
                    .unwrap()
                    .micro_f1
            })
            .sum::<f64>()
            / 20.0;
        assert!((mean - 0.5).abs() <= 0.05, "{mean}");
        let labels3: Vec<u32> = (0..n).map(|i| (i % 3) as u32).collect();
        let m = probe_micro_f1(
            &random_model(n, 16, 99),
            &labels3,
            &ProbeConfig::default(),
            1,
        )
        .unwrap();
        assert_eq!(m.classes, 3);
        assert!((m.micro_f1 - 1.0 / 3.0).abs() < 0.1, "{}", m.micro_f1);
    }

    #[test]
    fn micro_f1_equals_accuracy_on_confusions() {
        let conf = vec![vec![5, 2, 0], vec![1, 7, 3], vec![0, 0, 4]];
        let total: usize = conf.iter().flatten().sum();
        let acc = 16.0 / total as f64;
        assert!((micro_f1(&conf) - acc).abs() <= 1e-12);
    }

    #[test]
    fn single_class_training_set_rejected() {
        let m = random_model(10, 2, 0);
        assert!(matches!(
            probe_micro_f1(&m, &[3; 10], &ProbeConfig::default(), 0),
            Err(UgeError::Degenerate(_))
        ));
    }
}
