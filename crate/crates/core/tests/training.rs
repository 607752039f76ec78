use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uge_core::debias::estimate_ratios;
use uge_core::embed::{train, ModelKind, Objective, Regime, TrainConfig, Trainer};
use uge_core::{split_edges, AttributeSchema, AttributedGraph, EmbeddingModel, UgeError};

fn small_graph(seed: u64, sensitive: bool) -> AttributedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut schema = AttributeSchema::new(
        vec!["gender".into(), "region".into()],
        vec![vec!["F".into(), "M".into()], vec!["N".into(), "S".into()]],
    )
    .unwrap();
    if sensitive {
        schema.set_sensitive(&["gender"]).unwrap();
    }
    let n = 10;
    let codes = (0..n)
        .flat_map(|i| [(i % 2) as u32, ((i / 3) % 2) as u32])
        .collect();
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            let p = if u % 2 == v % 2 { 0.6 } else { 0.25 };
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let ids = (0..n).map(|i| format!("n{i}")).collect();
    AttributedGraph::from_edges(ids, schema, codes, edges)
        .unwrap()
        .0
}

fn cfg(regime: Regime, kind: ModelKind) -> TrainConfig {
    TrainConfig {
        regime,
        kind,
        dim: 4,
        epochs: 30,
        lambda: 0.7,
        reg_fraction: 1.0,
        pairs_per_group: 16,
        seed: 9,
        ..TrainConfig::default()
    }
}

fn relative_gradient_error(obj: &Objective, model: &EmbeddingModel) -> f64 {
    let h = 1e-5;
    let mut analytic = vec![0.0; model.data().len()];
    obj.gradient(model, &mut analytic);
    let mut numeric = vec![0.0; analytic.len()];
    let mut probe = model.clone();
    for (i, slot) in numeric.iter_mut().enumerate() {
        let x = probe.data()[i];
        probe.data_mut()[i] = x + h;
        let up = obj.evaluate(&probe).total;
        probe.data_mut()[i] = x - h;
        let down = obj.evaluate(&probe).total;
        probe.data_mut()[i] = x;
        *slot = (up - down) / (2.0 * h);
    }
    let diff: f64 = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let scale: f64 = analytic
        .iter()
        .map(|a| a * a)
        .sum::<f64>()
        .max(numeric.iter().map(|b| b * b).sum());
    (diff / scale).sqrt()
}

#[test]
fn gradients_match_finite_differences() {
    let g = small_graph(1, true);
    let splits = split_edges(&g, 0.8, 2, 3).unwrap();
    let table = estimate_ratios(&g, false, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for kind in [ModelKind::DotBce, ModelKind::MfBpr] {
        for regime in [Regime::NoDebias, Regime::UgeW, Regime::UgeR, Regime::UgeC] {
            let trainer = Trainer::new(&g, &splits, Some(&table), &cfg(regime, kind)).unwrap();
            for point in 0..3 {
                let obj = trainer.epoch_objective(point).unwrap();
                assert!(obj.num_terms() > 0);
                let mut model = trainer.initial_model();
                model
                    .data_mut()
                    .iter_mut()
                    .for_each(|x| *x = rng.gen_range(-1.0..1.0));
                let err = relative_gradient_error(&obj, &model);
                assert!(err <= 1e-4, "{kind} {regime} point {point}: {err:e}");
            }
        }
    }
}

#[test]
fn squared_regularizer_gradient() {
    let g = small_graph(2, true);
    let splits = split_edges(&g, 0.8, 2, 3).unwrap();
    let mut c = cfg(Regime::UgeR, ModelKind::DotBce);
    c.reg_squared = true;
    let trainer = Trainer::new(&g, &splits, None, &c).unwrap();
    let obj = trainer.epoch_objective(0).unwrap();
    assert!(!obj.regularizer_samples().is_empty());
    let model = trainer.initial_model();
    assert!(relative_gradient_error(&obj, &model) <= 1e-4);
}

#[test]
fn zero_lambda_combined_equals_weighted() {
    let g = small_graph(3, true);
    let splits = split_edges(&g, 0.8, 2, 1).unwrap();
    let table = estimate_ratios(&g, false, 0.5).unwrap();
    let mut c = cfg(Regime::UgeC, ModelKind::DotBce);
    c.lambda = 0.0;
    let combined = train(&g, &splits, Some(&table), &c).unwrap();
    c.regime = Regime::UgeW;
    let weighted = train(&g, &splits, Some(&table), &c).unwrap();
    assert_eq!(combined.model, weighted.model);
    assert_eq!(combined.log, weighted.log);
}

#[test]
fn weighted_without_sensitive_attributes_equals_no_debias() {
    let g = small_graph(4, false);
    let splits = split_edges(&g, 0.8, 2, 1).unwrap();
    let table = estimate_ratios(&g, false, 0.5).unwrap();
    for kind in [ModelKind::DotBce, ModelKind::MfBpr] {
        let mut c = cfg(Regime::UgeW, kind);
        c.weight_negatives = true;
        let weighted = train(&g, &splits, Some(&table), &c).unwrap();
        c.regime = Regime::NoDebias;
        let plain = train(&g, &splits, None, &c).unwrap();
        assert_eq!(weighted.log, plain.log, "per-epoch losses must coincide");
        assert_eq!(weighted.model, plain.model);
    }
}

#[test]
fn training_is_deterministic_across_thread_counts() {
    let g = small_graph(5, true);
    let splits = split_edges(&g, 0.8, 2, 1).unwrap();
    let table = estimate_ratios(&g, false, 0.5).unwrap();
    let run = |threads: usize, regime: Regime, batch: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let mut c = cfg(regime, ModelKind::DotBce);
        c.batch_size = batch;
        pool.install(|| train(&g, &splits, Some(&table), &c).unwrap().model)
    };
    for regime in Regime::ALL {
        for batch in [0, 7] {
            assert_eq!(run(1, regime, batch), run(4, regime, batch), "{regime}");
        }
    }
}

#[test]
fn loss_decreases_and_stays_finite() {
    let g = small_graph(6, true);
    let splits = split_edges(&g, 0.8, 2, 1).unwrap();
    let table = estimate_ratios(&g, false, 0.5).unwrap();
    for regime in [
        Regime::NoDebias,
        Regime::UgeW,
        Regime::UgeC,
        Regime::Fairwalk,
    ] {
        let mut c = cfg(regime, ModelKind::DotBce);
        c.epochs = 200;
        let out = train(&g, &splits, Some(&table), &c).unwrap();
        let first = out.log.records.first().unwrap().data_loss;
        let last = out.log.records.last().unwrap().data_loss;
        assert!(out.log.records.iter().all(|r| r.total.is_finite()));
        assert!(last < first, "{regime}: {first} -> {last}");
    }
}

#[test]
fn random_regime_fills_unit_interval() {
    let g = small_graph(7, true);
    let splits = split_edges(&g, 0.8, 2, 1).unwrap();
    let out = train(&g, &splits, None, &cfg(Regime::Random, ModelKind::DotBce)).unwrap();
    assert!(out.log.records.is_empty());
    assert!(out.model.data().iter().all(|x| (0.0..1.0).contains(x)));
}

#[test]
fn initial_embeddings_are_bounded() {
    let g = small_graph(7, true);
    let splits = split_edges(&g, 0.8, 2, 1).unwrap();
    let trainer =
        Trainer::new(&g, &splits, None, &cfg(Regime::NoDebias, ModelKind::DotBce)).unwrap();
    let m = trainer.initial_model();
    assert!(m.data().iter().all(|x| x.abs() <= 0.5));
}

#[test]
fn invalid_configs_rejected() {
    let g = small_graph(8, true);
    let splits = split_edges(&g, 0.8, 2, 1).unwrap();
    assert!(matches!(
        train(&g, &splits, None, &cfg(Regime::UgeW, ModelKind::DotBce)),
        Err(UgeError::MissingRatioTable(r)) if r == "uge-w"
    ));
    let mut c = cfg(Regime::NoDebias, ModelKind::DotBce);
    c.epochs = 0;
    assert!(train(&g, &splits, None, &c).is_err());
    c.epochs = 1;
    c.lambda = -1.0;
    assert!(train(&g, &splits, None, &c).is_err());
    c.lambda = 0.5;
    c.learning_rate = 0.0;
    assert!(train(&g, &splits, None, &c).is_err());
}

#[test]
fn regime_names_round_trip() {
    for r in Regime::ALL {
        assert_eq!(r.as_str().parse::<Regime>().unwrap(), r);
    }
    assert!("gcn".parse::<Regime>().is_err());
}
