//! The four subcommands. Each reads one experiment config and writes into
//! its output directory, refusing to replace existing files unless asked.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use uge_core::biasgen::{
    chung_lu_weights, sample_biased_graph, true_ratios, uniform_attribute_codes, GenModelParams,
};
use uge_core::embed::{read_embeddings, write_embeddings, EmbeddingMeta};
use uge_core::eval::{spearman, CSV_HEADER};
use uge_core::graph::{write_attribute_file, write_edge_file};
use uge_core::{
    estimate_ratios, evaluate, load_graph, split_edges, train, AttributeSchema, AttributedGraph,
    EdgeSplits, EvalReport, RatioTable, Regime,
};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const EDGE_FILE: &str = "edges.txt";
pub const ATTRIBUTE_FILE: &str = "attributes.csv";
pub const TRUE_RATIO_FILE: &str = "ratios.csv";
pub const ESTIMATED_RATIO_FILE: &str = "ratios_estimated.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_HEADER: &str = "lambda,regime,attribute,micro_f1,ndcg,dp,eo,config_hash,seed";

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub overwrite: bool,
}

pub fn embedding_path(cfg: &ExperimentConfig, regime: Regime) -> PathBuf {
    cfg.output_dir()
        .join("embeddings")
        .join(format!("{regime}.emb"))
}

pub fn meta_path(cfg: &ExperimentConfig, regime: Regime) -> PathBuf {
    cfg.output_dir()
        .join("embeddings")
        .join(format!("{regime}.meta"))
}

pub fn log_path(cfg: &ExperimentConfig, regime: Regime) -> PathBuf {
    cfg.output_dir().join("logs").join(format!("{regime}.csv"))
}

pub fn report_path(cfg: &ExperimentConfig, regime: Regime) -> PathBuf {
    cfg.output_dir()
        .join("reports")
        .join(format!("{regime}.json"))
}

fn header(cfg: &ExperimentConfig) -> Vec<String> {
    vec![
        format!("config_hash={}", cfg.config_hash()),
        format!("seed={}", cfg.seed),
    ]
}

/// Fails before anything is written if one of `paths` already exists.
fn check_targets(paths: &[PathBuf], opts: RunOptions) -> Result<()> {
    if opts.overwrite {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(CliError::Validation(format!(
            "{} already exists; pass --overwrite to replace it",
            p.display()
        ))),
        None => Ok(()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| CliError::io(path, e))?,
    ))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = create(path)?;
    body(&mut w)?;
    finish(path, w)
}

#[derive(Debug, Clone)]
pub struct GenerateSummary {
    pub nodes: usize,
    pub edges: usize,
    pub clipped_pairs: u64,
}

/// Samples a planted graph and writes its edge, attribute and true-ratio
/// files.
pub fn generate(cfg: &ExperimentConfig, opts: RunOptions) -> Result<GenerateSummary> {
    let gen = cfg
        .generator
        .as_ref()
        .ok_or_else(|| CliError::Validation("generate needs a [generator] section".into()))?;
    let out = cfg.output_dir();
    let targets = [
        out.join(EDGE_FILE),
        out.join(ATTRIBUTE_FILE),
        out.join(TRUE_RATIO_FILE),
    ];
    check_targets(&targets, opts)?;

    let names = gen.attributes.iter().map(|a| a.name.clone()).collect();
    let values = gen.attributes.iter().map(|a| a.resolved_values()).collect();
    let mut schema = AttributeSchema::new(names, values)?;
    schema.set_sensitive(&cfg.sensitive)?;
    let seed = cfg.generator_seed();
    let codes = uniform_attribute_codes(&schema, gen.nodes, seed)?;
    let weights = chung_lu_weights(gen.nodes, gen.mean_degree, gen.degree_exponent)?;
    let mut params = GenModelParams::new(weights, schema.clone(), codes, seed)?;
    for (i, a) in gen.attributes.iter().enumerate() {
        if let Some([same, cross]) = a.homophily {
            params.apply_homophily(i, same, cross)?;
        }
    }
    for (label, rho) in &gen.ratios {
        params.set_ratio_by_label(label, *rho)?;
    }
    let sampled = sample_biased_graph(&params)?;
    let truth = true_ratios(&params, schema.sensitive_mask())?;
    let table = RatioTable::from_true_ratios(&truth, &schema);

    let head = header(cfg);
    let g = &sampled.graph;
    write_file(&targets[0], |w| Ok(write_edge_file(g, &head, w)?))?;
    write_file(&targets[1], |w| Ok(write_attribute_file(g, &head, w)?))?;
    write_file(&targets[2], |w| Ok(table.write_csv(&head, w)?))?;
    info!(
        "generated {} nodes and {} edges into {}",
        g.num_nodes(),
        g.num_edges(),
        out.display()
    );
    Ok(GenerateSummary {
        nodes: g.num_nodes(),
        edges: g.num_edges(),
        clipped_pairs: sampled.clipped_pairs,
    })
}

/// Loads the configured graph, marks the sensitive attributes and splits the
/// edges with the config's split seed.
pub fn load_experiment(cfg: &ExperimentConfig) -> Result<(AttributedGraph, EdgeSplits)> {
    let (edges, attrs) = (cfg.edge_path(), cfg.attribute_path());
    for p in [&edges, &attrs] {
        if !p.exists() {
            let hint = if cfg.generator.is_some() {
                "; run `uge generate` first"
            } else {
                ""
            };
            return Err(CliError::Validation(format!(
                "input file {} not found{hint}",
                p.display()
            )));
        }
    }
    let loaded = load_graph(&edges, &attrs)?;
    let s = &loaded.stats;
    if s.self_loops > 0 || s.duplicates > 0 {
        warn!(
            "{}: dropped {} self-loops and {} duplicate edges",
            edges.display(),
            s.self_loops,
            s.duplicates
        );
    }
    let g = loaded.graph.with_sensitive(&cfg.sensitive)?;
    let splits = split_edges(
        &g,
        cfg.split.train_frac,
        cfg.split.neg_ratio,
        cfg.split_seed(),
    )?;
    if !splits.skipped.is_empty() {
        warn!(
            "{} nodes have too few edges to split and are left out of evaluation",
            splits.skipped.len()
        );
    }
    Ok((g, splits))
}

fn ratio_table(cfg: &ExperimentConfig, g: &AttributedGraph) -> Result<Option<RatioTable>> {
    if !cfg.ratios.estimate {
        return Ok(None);
    }
    Ok(Some(estimate_ratios(
        g,
        cfg.ratios.factorized,
        cfg.ratios.alpha,
    )?))
}

/// Trains every configured regime and writes embeddings, sidecars and loss
/// logs.
pub fn train_all(cfg: &ExperimentConfig, opts: RunOptions) -> Result<()> {
    let regimes = cfg.regimes()?;
    let mut targets = Vec::new();
    if cfg.ratios.estimate {
        targets.push(cfg.output_dir().join(ESTIMATED_RATIO_FILE));
    }
    for &r in &regimes {
        targets.extend([embedding_path(cfg, r), meta_path(cfg, r), log_path(cfg, r)]);
    }
    check_targets(&targets, opts)?;

    let (g, splits) = load_experiment(cfg)?;
    let table = ratio_table(cfg, &g)?;
    let head = header(cfg);
    if let Some(t) = &table {
        let path = cfg.output_dir().join(ESTIMATED_RATIO_FILE);
        write_file(&path, |w| Ok(t.write_csv(&head, w)?))?;
    }
    for r in regimes {
        let tc = cfg.train_config(r)?;
        let outcome = train(&g, &splits, table.as_ref(), &tc)?;
        if let Some(last) = outcome.log.records.last() {
            info!("{r}: final objective {:.6}", last.total);
        }
        write_file(&embedding_path(cfg, r), |w| {
            Ok(write_embeddings(
                &outcome.model,
                g.original_ids(),
                &head,
                w,
            )?)
        })?;
        let meta = EmbeddingMeta {
            dim: tc.dim,
            regime: r,
            kind: tc.kind,
            seed: tc.seed,
            config_hash: cfg.config_hash(),
        };
        write_file(&meta_path(cfg, r), |w| Ok(meta.write(w)?))?;
        write_file(&log_path(cfg, r), |w| {
            Ok(outcome.log.write_csv(&head, w)?)
        })?;
    }
    Ok(())
}

/// Evaluates the stored embeddings of every configured regime.
pub fn evaluate_all(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Vec<EvalReport>> {
    let regimes = cfg.regimes()?;
    let mut targets: Vec<PathBuf> = regimes.iter().map(|&r| report_path(cfg, r)).collect();
    targets.push(cfg.output_dir().join(REPORT_FILE));
    check_targets(&targets, opts)?;
    for &r in &regimes {
        for p in [embedding_path(cfg, r), meta_path(cfg, r)] {
            if !p.exists() {
                return Err(CliError::Validation(format!(
                    "no embeddings for regime `{r}` ({} missing); run `uge train` first",
                    p.display()
                )));
            }
        }
    }

    let (g, splits) = load_experiment(cfg)?;
    let hash = cfg.config_hash();
    let ec = cfg.eval_config();
    let mut reports = Vec::new();
    for &r in &regimes {
        let mp = meta_path(cfg, r);
        let file = File::open(&mp).map_err(|e| CliError::io(&mp, e))?;
        let meta = EmbeddingMeta::read(BufReader::new(file), &mp.display().to_string())?;
        if meta.config_hash != hash {
            warn!(
                "{} was trained under config {}, evaluating under {}",
                mp.display(),
                meta.config_hash,
                hash
            );
        }
        if meta.regime != r {
            return Err(CliError::Validation(format!(
                "{} describes regime `{}`, expected `{r}`",
                mp.display(),
                meta.regime
            )));
        }
        let ep = embedding_path(cfg, r);
        let file = File::open(&ep).map_err(|e| CliError::io(&ep, e))?;
        let model = read_embeddings(
            BufReader::new(file),
            &ep.display().to_string(),
            &g,
            meta.dim,
            meta.kind,
        )?;
        let report = evaluate(&model, &g, &splits, &ec, r.as_str(), &hash)?;
        let json = report.to_json();
        write_file(&report_path(cfg, r), |w| {
            writeln!(w, "{json}").map_err(|e| CliError::io(&report_path(cfg, r), e))
        })?;
        info!("{r}: NDCG@{} {:.4}", report.k, report.ndcg_at_k);
        reports.push(report);
    }

    let path = cfg.output_dir().join(REPORT_FILE);
    let w = create(&path)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(CSV_HEADER.split(','))?;
    for r in &reports {
        r.write_csv_rows(&mut csv)?;
    }
    let w = csv
        .into_inner()
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    finish(&path, w)?;
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub lambda: f64,
    pub report: EvalReport,
}

/// Trains and evaluates the sweep regime at every configured λ.
pub fn sweep(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Vec<SweepPoint>> {
    let path = cfg.output_dir().join(SWEEP_FILE);
    check_targets(std::slice::from_ref(&path), opts)?;
    let regime = cfg.sweep_regime()?;
    if cfg.sweep.lambdas.is_empty() {
        return Err(CliError::Validation("sweep.lambdas is empty".into()));
    }
    if regime.uses_weights() && !cfg.ratios.estimate {
        return Err(CliError::Validation(format!(
            "sweep regime `{regime}` needs ratio estimation"
        )));
    }
    let (g, splits) = load_experiment(cfg)?;
    let table = ratio_table(cfg, &g)?;
    let hash = cfg.config_hash();
    let ec = cfg.eval_config();
    let points = cfg
        .sweep
        .lambdas
        .par_iter()
        .map(|&lambda| {
            let mut tc = cfg.train_config(regime)?;
            tc.lambda = lambda;
            let outcome = train(&g, &splits, table.as_ref(), &tc)?;
            let report = evaluate(&outcome.model, &g, &splits, &ec, regime.as_str(), &hash)?;
            Ok(SweepPoint { lambda, report })
        })
        .collect::<Result<Vec<_>>>()?;

    let w = create(&path)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(SWEEP_HEADER.split(','))?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for p in &points {
        let r = &p.report;
        for a in &r.attributes {
            csv.write_record([
                p.lambda.to_string(),
                r.regime.clone(),
                a.attribute.clone(),
                a.micro_f1.to_string(),
                r.ndcg_at_k.to_string(),
                opt(a.dp),
                opt(a.eo),
                r.config_hash.clone(),
                r.seed.to_string(),
            ])?;
        }
        if r.attributes.is_empty() {
            csv.write_record([
                p.lambda.to_string(),
                r.regime.clone(),
                String::new(),
                String::new(),
                r.ndcg_at_k.to_string(),
                String::new(),
                String::new(),
                r.config_hash.clone(),
                r.seed.to_string(),
            ])?;
        }
    }
    let w = csv
        .into_inner()
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    finish(&path, w)?;

    let lambdas: Vec<f64> = points.iter().map(|p| p.lambda).collect();
    let ndcg: Vec<f64> = points.iter().map(|p| p.report.ndcg_at_k).collect();
    if let Some(rho) = spearman(&lambdas, &ndcg) {
        info!("sweep: Spearman(lambda, NDCG) = {rho:.3}");
    }
    for attr in &cfg.sensitive {
        let f1: Vec<f64> = points
            .iter()
            .filter_map(|p| p.report.metrics(attr).map(|m| m.micro_f1))
            .collect();
        if let Some(rho) = spearman(&lambdas, &f1) {
            info!("sweep: Spearman(lambda, Micro-F1 {attr}) = {rho:.3}");
        }
    }
    Ok(points)
}
