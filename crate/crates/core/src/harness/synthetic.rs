use std::fs;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::config::ExperimentConfig;
use super::experiments::run_jobs;
use super::svg::{self, Scatter};
use crate::evalstats::{proxy_a_distance, tissue_error, train_linear, FeatureSet, LabelSemantics, LossKind, DEFAULT_L2_GRID};
use crate::sampling::enumerate_pairs;
use crate::seeds;
use crate::siamnet::{lp_distance, train_pairs, NetConfig, SiameseModel, TrainOptions};
use crate::Result;

/// Two-class, two-domain points; input vectors carry the domain bit last.
#[derive(Debug, Clone)]
pub struct SyntheticSet {
    pub inputs: Vec<Vec<f64>>,
    pub classes: Vec<usize>,
    pub domains: Vec<u8>,
}

pub fn synthetic_set(cfg: &ExperimentConfig, per_class: usize, seed: u64) -> SyntheticSet {
    let syn = &cfg.synthetic;
    let noise = Normal::new(0.0, syn.spread).expect("positive spread");
    let mut rng = seeds::rng(seed);
    let mut set = SyntheticSet {
        inputs: Vec::new(),
        classes: Vec::new(),
        domains: Vec::new(),
    };
    for (domain, means) in [(0u8, syn.source_means), (1u8, syn.target_means)] {
        for (class, mean) in means.iter().enumerate() {
            for _ in 0..per_class {
                set.inputs.push(vec![
                    mean[0] + noise.sample(&mut rng),
                    mean[1] + noise.sample(&mut rng),
                    f64::from(domain),
                ]);
                set.classes.push(class);
                set.domains.push(domain);
            }
        }
    }
    set
}

/// Mean distance over all unordered pairs of embeddings.
pub fn mean_pairwise_distance(embeddings: &[Vec<f64>], p: u32) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for i in 0..embeddings.len() {
        for j in i + 1..embeddings.len() {
            total += lp_distance(&embeddings[i], &embeddings[j], p)?;
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { total / n as f64 })
}

/// Result for one margin and repeat.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginRow {
    pub margin: f64,
    pub repeat: usize,
    pub initial_distance: f64,
    pub final_distance: f64,
    pub collapse_ratio: f64,
    pub pad_domain: f64,
    pub class_error: f64,
}

/// Embeddings of the held-out points, for plotting.
#[derive(Debug, Clone)]
pub struct MarginRun {
    pub row: MarginRow,
    pub embeddings: Vec<Vec<f64>>,
    pub classes: Vec<usize>,
    pub domains: Vec<u8>,
}

pub fn run_margin(cfg: &ExperimentConfig, margin: f64, repeat: usize) -> Result<MarginRun> {
    let syn = &cfg.synthetic;
    let ledger = cfg.ledger();
    let key = [margin.to_bits(), repeat as u64];
    let train = synthetic_set(cfg, syn.train_per_class, ledger.seed("synthetic-train", &[repeat as u64]));
    let test = synthetic_set(cfg, syn.test_per_class, ledger.seed("synthetic-test", &[repeat as u64]));
    let items: Vec<(usize, u8)> = train.classes.iter().copied().zip(train.domains.iter().copied()).collect();
    let pairs = enumerate_pairs(&items, cfg.max_pairs, ledger.seed("synthetic-pairs", &[repeat as u64]))?;

    let net = NetConfig {
        margin,
        dropout_rate: 0.0,
        l2_lambda: syn.l2_lambda,
        norm_p: cfg.net_config.norm_p,
        ..NetConfig::vector(2, syn.dense1, syn.dense2, 2)
    };
    let run_seed = ledger.seed("synthetic-run", &[repeat as u64]);
    let init = SiameseModel::init(net, seeds::derive(run_seed, "init", &[]))?;
    let embed_all = |m: &SiameseModel| -> Result<Vec<Vec<f64>>> { test.inputs.iter().map(|x| m.embed(x)).collect() };
    let initial_distance = mean_pairwise_distance(&embed_all(&init)?, cfg.net_config.norm_p)?;
    let opts = TrainOptions {
        epochs: syn.epochs,
        batch_size: syn.batch_size,
        optimizer: crate::siamnet::RmsProp {
            learning_rate: syn.learning_rate,
            ..cfg.optimizer
        },
    };
    let model = train_pairs(init, &train.inputs, &pairs, &opts, run_seed)?.model;
    let embeddings = embed_all(&model)?;
    let final_distance = mean_pairwise_distance(&embeddings, cfg.net_config.norm_p)?;

    let split = |domain: u8| -> Vec<Vec<f64>> {
        embeddings.iter().zip(&test.domains).filter(|(_, d)| **d == domain).map(|(e, _)| e.clone()).collect()
    };
    let pad_domain = proxy_a_distance(&split(0), &split(1), cfg.cv_folds, ledger.seed("synthetic-pad", &key))?;

    let train_emb: Vec<Vec<f64>> = train.inputs.iter().map(|x| model.embed(x)).collect::<Result<_>>()?;
    let classifier = train_linear(
        &FeatureSet::new(train_emb, train.classes.clone(), LabelSemantics::Tissue)?,
        LossKind::Logistic,
        &DEFAULT_L2_GRID,
        cfg.cv_folds,
        ledger.seed("synthetic-cv", &key),
    )?;
    let class_error = tissue_error(
        &classifier,
        &FeatureSet::new(embeddings.clone(), test.classes.clone(), LabelSemantics::Tissue)?,
    );
    let row = MarginRow {
        margin,
        repeat,
        initial_distance,
        final_distance,
        collapse_ratio: final_distance / initial_distance,
        pad_domain,
        class_error,
    };
    log::info!("margin {margin} repeat {repeat}: {row:?}");
    Ok(MarginRun {
        row,
        embeddings,
        classes: test.classes,
        domains: test.domains,
    })
}

fn margin_tag(m: f64) -> String {
    format!("{m}").replace('.', "p")
}

/// Margin sweep on the synthetic two-domain data.
pub fn exp4_margin_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<MarginRun>> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    fs::write(out.join("exp4_config.toml"), cfg.canonical())?;
    let jobs: Vec<(f64, usize)> = cfg
        .synthetic
        .margins
        .iter()
        .flat_map(|&m| (0..cfg.repeats).map(move |r| (m, r)))
        .collect();
    let runs = run_jobs(&jobs, |&(m, r)| run_margin(cfg, m, r))?;

    let mut w = csv::Writer::from_path(out.join("exp4_margins.csv"))?;
    for run in &runs {
        w.serialize(&run.row)?;
    }
    w.flush()?;
    let mut scatter_csv = String::from("margin,repeat,domain,class,e0,e1\n");
    for run in &runs {
        for ((e, c), d) in run.embeddings.iter().zip(&run.classes).zip(&run.domains) {
            scatter_csv.push_str(&format!("{},{},{d},{c},{},{}\n", run.row.margin, run.row.repeat, e[0], e[1]));
        }
    }
    fs::write(out.join("exp4_scatter.csv"), scatter_csv)?;
    for run in runs.iter().filter(|r| r.row.repeat == 0) {
        let plot = Scatter {
            title: format!("margin {}", run.row.margin),
            points: run
                .embeddings
                .iter()
                .zip(&run.classes)
                .zip(&run.domains)
                .map(|((e, c), d)| (e[0], e[1], usize::from(*d) * 2 + c))
                .collect(),
            groups: vec![
                ("source class 0".into(), svg::PALETTE[0]),
                ("source class 1".into(), svg::PALETTE[1]),
                ("target class 0".into(), svg::PALETTE[2]),
                ("target class 1".into(), svg::PALETTE[3]),
            ],
        };
        fs::write(out.join(format!("exp4_margin_{}.svg", margin_tag(run.row.margin))), svg::scatter(&plot))?;
    }
    Ok(runs)
}
