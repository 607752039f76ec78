use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;
use uge_bench::{planted_graph, planted_params};
use uge_core::biasgen::sample_biased_graph;
use uge_core::embed::Trainer;
use uge_core::eval::{ndcg_at_k, probe_micro_f1, ProbeConfig};
use uge_core::{estimate_ratios, split_edges, Regime, TrainConfig};

fn generation(c: &mut Criterion) {
    let params = planted_params(1000, 6.0, 16, 7);
    c.bench_function("sample_biased_graph/n1000", |b| {
        b.iter(|| sample_biased_graph(black_box(&params)).unwrap())
    });
}

fn estimation(c: &mut Criterion) {
    let g = planted_graph(1000, 6.0, 16, 7);
    c.bench_function("estimate_ratios/n1000", |b| {
        b.iter(|| estimate_ratios(black_box(&g), false, 0.5).unwrap())
    });
}

fn objective(c: &mut Criterion) {
    let g = planted_graph(1000, 6.0, 16, 7);
    let splits = split_edges(&g, 0.9, 20, 1).unwrap();
    let table = estimate_ratios(&g, false, 0.5).unwrap();
    let mut group = c.benchmark_group("epoch_gradient/n1000");
    for regime in [Regime::NoDebias, Regime::UgeW, Regime::UgeC] {
        let cfg = TrainConfig {
            regime,
            seed: 3,
            ..TrainConfig::default()
        };
        let trainer = Trainer::new(&g, &splits, Some(&table), &cfg).unwrap();
        let model = trainer.initial_model();
        let mut grad = vec![0.0; model.data().len()];
        group.bench_function(regime.as_str(), |b| {
            b.iter_batched(
                || trainer.epoch_objective(0).unwrap(),
                |obj| obj.gradient(black_box(&model), &mut grad),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let g = planted_graph(1000, 6.0, 16, 7);
    let splits = split_edges(&g, 0.9, 20, 1).unwrap();
    let cfg = TrainConfig {
        seed: 3,
        ..TrainConfig::default()
    };
    let model = Trainer::new(&g, &splits, None, &cfg)
        .unwrap()
        .initial_model();
    let labels = g.attribute_column(0);
    c.bench_function("ndcg_at_10/n1000", |b| {
        b.iter(|| ndcg_at_k(black_box(&model), &g, &splits, 10, 100, 5).unwrap())
    });
    c.bench_function("probe_micro_f1/n1000", |b| {
        b.iter(|| probe_micro_f1(black_box(&model), &labels, &ProbeConfig::default(), 5).unwrap())
    });
}

criterion_group!(benches, generation, estimation, objective, evaluation);
criterion_main!(benches);
