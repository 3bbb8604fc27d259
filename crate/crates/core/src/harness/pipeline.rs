use serde::Serialize;

use super::cohort::Cohort;
use super::config::ExperimentConfig;
use crate::evalstats::{
    embed_features, proxy_a_distance, raw_features, tissue_error, train_linear, EvalReport, LinearModel, LossKind,
    DEFAULT_L2_GRID,
};
use crate::sampling::{build_pairs, extract_patches, purposive_centers, Patch};
use crate::siamnet::{train_classifier, train_pairs, EpochLog, NetConfig, SiameseModel, TrainOptions};
use crate::{MraiError, Result};

/// How target training patches are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Manual,
    Random,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Manual => "manual",
            Arm::Random => "random",
        }
    }

    fn code(self) -> u64 {
        self as u64
    }
}

/// Test patches shared by every run of an experiment.
#[derive(Debug, Clone)]
pub struct TestSet {
    /// Source-protocol patches of the test subjects.
    pub source: Vec<Patch>,
    /// Target-protocol patches at the same centers.
    pub target: Vec<Patch>,
}

impl TestSet {
    pub fn build(cfg: &ExperimentConfig, cohort: &Cohort) -> Result<Self> {
        let ledger = cfg.ledger();
        let mut source = Vec::new();
        let mut target = Vec::new();
        for subject in &cohort.test {
            let seed = ledger.seed("test-patches", &[subject.seed]);
            let tgt_scan = subject.target_scan.as_ref().expect("test subjects carry a target scan");
            let src_scan = subject.source_scan.as_ref().expect("test subjects carry a source scan");
            target.extend(extract_patches(tgt_scan, cfg.test_patches_per_tissue, seed, None)?);
            source.extend(extract_patches(src_scan, cfg.test_patches_per_tissue, seed, None)?);
        }
        Ok(Self { source, target })
    }
}

/// One training/evaluation run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config_hash: String,
    pub arm: Arm,
    pub n_target: usize,
    pub repeat_index: usize,
    /// Network size label for the sweep, `k-h1-h2`.
    pub net: String,
    pub param_count: usize,
    pub n_pairs: usize,
    pub report: EvalReport,
    pub loss_curve: Vec<EpochLog>,
    pub wall_ms: f64,
    pub run_seed: u64,
}

/// Everything a run produces, for callers that need the trained models.
pub struct RunArtifacts {
    pub record: RunRecord,
    pub model: SiameseModel,
    pub classifier: LinearModel,
}

pub(crate) fn cnn_predictions(model: &SiameseModel, patches: &[Patch]) -> Result<Vec<usize>> {
    patches
        .iter()
        .map(|p| {
            let logits = model.embed(&p.input_vector())?;
            let mut best = 0;
            for (i, v) in logits.iter().enumerate() {
                if *v > logits[best] {
                    best = i;
                }
            }
            Ok(best)
        })
        .collect()
}

fn error_rate(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a != b).count() as f64 / truth.len() as f64
}

fn labels(patches: &[Patch]) -> Vec<usize> {
    patches.iter().map(|p| p.tissue.class_index().expect("brain tissue")).collect()
}

/// Supervised CNN baseline on `patches`, trained for (at least) `updates`
/// parameter updates; returns its error on `test`.
fn baseline_error(net: &NetConfig, opts: &TrainOptions, patches: &[Patch], test: &[Patch], updates: u64, seed: u64) -> Result<f64> {
    let per_epoch = patches.len().div_ceil(opts.batch_size) as u64;
    let epochs = if opts.epochs == 0 { 0 } else { updates.div_ceil(per_epoch) as usize };
    let config = NetConfig {
        embed_dim: 3,
        ..net.clone()
    };
    let inputs: Vec<Vec<f64>> = patches.iter().map(Patch::input_vector).collect();
    let out = train_classifier(config, &inputs, &labels(patches), &TrainOptions { epochs, ..*opts }, seed)?;
    Ok(error_rate(&cnn_predictions(&out.model, test)?, &labels(test)))
}

/// Train MRAI and both baselines for one (arm, target count, repeat) and
/// evaluate on the shared test set.
#[allow(clippy::too_many_arguments)]
pub fn run_once(
    cfg: &ExperimentConfig,
    cohort: &Cohort,
    test: &TestSet,
    net: &NetConfig,
    arm: Arm,
    n_target: usize,
    repeat: usize,
    with_baselines: bool,
) -> Result<RunArtifacts> {
    #[cfg(not(target_arch = "wasm32"))]
    let start = std::time::Instant::now();
    let ledger = cfg.ledger();
    let key = [arm.code(), n_target as u64, repeat as u64];

    let mut source = Vec::new();
    for (i, subject) in cohort.source.iter().enumerate() {
        let scan = subject.source_scan.as_ref().expect("source subjects carry a source scan");
        let seed = ledger.seed("source-patches", &[key[0], key[1], key[2], i as u64]);
        source.extend(extract_patches(scan, cfg.source_patches_per_tissue, seed, None)?);
    }
    let mut target = Vec::new();
    for (i, subject) in cohort.target_train.iter().enumerate() {
        let scan = subject.target_scan.as_ref().expect("target subjects carry a target scan");
        let seed = ledger.seed("target-patches", &[key[0], key[1], key[2], i as u64]);
        let patches = match arm {
            Arm::Manual => {
                if n_target != 1 {
                    return Err(MraiError::Config("the manual arm selects exactly one patch per tissue".into()));
                }
                extract_patches(scan, 1, seed, Some(&purposive_centers(&subject.map)?))?
            }
            Arm::Random => extract_patches(scan, n_target, seed, None)?,
        };
        target.extend(patches);
    }

    let pairs = build_pairs(&source, &target, cfg.max_pairs, ledger.seed("pairs", &key))?;
    let run_seed = ledger.seed("mrai", &key);
    let opts = cfg.train_options();
    let init = SiameseModel::init(net.clone(), crate::seeds::derive(run_seed, "init", &[]))?;
    let trained = train_pairs(init, &pairs.inputs(), &pairs.pairs, &opts, run_seed)?;
    let model = trained.model;

    let train_patches: Vec<Patch> = source.iter().chain(&target).cloned().collect();
    let train_feats = embed_features(&model, &train_patches)?;
    let classifier = train_linear(
        &train_feats,
        LossKind::Logistic,
        &DEFAULT_L2_GRID,
        cfg.cv_folds,
        ledger.seed("cv", &key),
    )?;
    let test_feats = embed_features(&model, &test.target)?;
    let tissue_error_mrai = tissue_error(&classifier, &test_feats);

    let pad_seed = ledger.seed("pad", &key);
    let raw = |p: &[Patch]| -> Result<Vec<Vec<f64>>> { Ok(raw_features(p)?.vectors) };
    let proxy_a_raw = proxy_a_distance(&raw(&test.source)?, &raw(&test.target)?, cfg.cv_folds, pad_seed)?;
    let rep = |p: &[Patch]| -> Result<Vec<Vec<f64>>> { Ok(embed_features(&model, p)?.vectors) };
    let proxy_a_rep = proxy_a_distance(&rep(&test.source)?, &rep(&test.target)?, cfg.cv_folds, pad_seed)?;

    let (tissue_error_source, tissue_error_target) = if with_baselines {
        let updates = trained.steps;
        (
            baseline_error(net, &opts, &train_patches, &test.target, updates, ledger.seed("source-cnn", &key))?,
            baseline_error(net, &opts, &target, &test.target, updates, ledger.seed("target-cnn", &key))?,
        )
    } else {
        (f64::NAN, f64::NAN)
    };

    #[cfg(not(target_arch = "wasm32"))]
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    #[cfg(target_arch = "wasm32")]
    let wall_ms = 0.0;
    let record = RunRecord {
        config_hash: cfg.hash(),
        arm,
        n_target,
        repeat_index: repeat,
        net: if net.vector_input.is_some() {
            format!("v-{}-{}", net.dense1, net.dense2)
        } else {
            format!("{}-{}-{}", net.conv_kernels, net.dense1, net.dense2)
        },
        param_count: model.param_count(),
        n_pairs: pairs.len(),
        report: EvalReport {
            proxy_a_raw,
            proxy_a_rep,
            tissue_error_source,
            tissue_error_mrai,
            tissue_error_target,
            n_target_patches: target.len(),
            repeat_index: repeat,
        },
        loss_curve: trained.history,
        wall_ms,
        run_seed,
    };
    log::info!(
        "{} n_target={} repeat={} net={}: mrai {:.3} source {:.3} target {:.3} pad {:.2} -> {:.2}",
        arm.name(),
        n_target,
        repeat,
        record.net,
        tissue_error_mrai,
        tissue_error_source,
        tissue_error_target,
        proxy_a_raw,
        proxy_a_rep
    );
    Ok(RunArtifacts {
        record,
        model,
        classifier,
    })
}
