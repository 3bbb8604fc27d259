use std::fs;
use std::sync::Arc;

use mrai_core::evalstats::{embed_features, tissue_error};
use mrai_core::harness::{
    build_report, exp1_one_sample, exp2_learning_curve, exp3_param_sweep, run_once, segment_image, segmentation_error,
    segmentation_ppm, Arm, Cohort, ExperimentConfig, ExperimentId, TestSet,
};
use mrai_core::phantom::{AcquisitionProtocol, ScanImage, TissueId, TissueLabelMap};
use mrai_core::sampling::{Patch, PATCH_HALF};

fn tiny(id: ExperimentId) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_experiment(id);
    cfg.image_size = 64;
    cfg.n_source_subjects = 2;
    cfg.n_test_subjects = 1;
    cfg.source_patches_per_tissue = 4;
    cfg.test_patches_per_tissue = 6;
    cfg.epochs = 2;
    cfg.max_pairs = 120;
    cfg.repeats = 2;
    cfg.cv_folds = 2;
    cfg
}

fn csv_rows(path: &std::path::Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn polylines(svg: &str) -> Vec<String> {
    let doc = roxmltree::Document::parse(svg).expect("well-formed svg");
    doc.descendants()
        .filter(|n| n.has_tag_name("polyline"))
        .filter_map(|n| n.attribute("data-series").map(String::from))
        .collect()
}

#[test]
fn exp1_schema_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(ExperimentId::Exp1);
    let (records, rows) = exp1_one_sample(&cfg, dir.path()).unwrap();
    for arm in [Arm::Manual, Arm::Random] {
        assert_eq!(records.iter().filter(|r| r.arm == arm).count(), 2);
    }
    let (header, body) = csv_rows(&dir.path().join("exp1_summary.csv"));
    assert_eq!(header, ["classifier", "arm", "mean_err", "sem", "pad_raw", "pad_rep"]);
    assert_eq!(body.len(), 6);
    assert_eq!(rows.len(), 6);
    for row in &body {
        assert!(["source", "mrai", "target"].contains(&row[0].as_str()));
        assert!(["manual", "random"].contains(&row[1].as_str()));
    }
    for r in &records {
        assert_eq!(r.config_hash, cfg.hash());
        assert_eq!(r.loss_curve.len(), 2);
        for e in [r.report.tissue_error_source, r.report.tissue_error_mrai, r.report.tissue_error_target] {
            assert!((0.0..=1.0).contains(&e));
        }
    }
    let report = fs::read_to_string(dir.path().join("exp1_report.md")).unwrap();
    assert!(report.contains("0.223") && report.contains("0.631"));
    assert!(dir.path().join("exp1_config.toml").exists());
}

#[test]
fn exp1_rejects_multi_patch_manual_arm() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(ExperimentId::Exp1);
    cfg.target_patches_per_tissue = vec![2];
    assert!(exp1_one_sample(&cfg, dir.path()).unwrap_err().is_config());
}

#[test]
fn exp2_counts_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(ExperimentId::Exp2);
    cfg.target_patches_per_tissue = vec![1, 3, 6];
    cfg.repeats = 2;
    let (records, rows) = exp2_learning_curve(&cfg, dir.path()).unwrap();
    assert_eq!(records.len(), 6);
    for n in [1, 3, 6] {
        assert_eq!(records.iter().filter(|r| r.n_target == n).count(), 2);
    }
    assert_eq!(rows.len(), 9);
    let (header, body) = csv_rows(&dir.path().join("exp2_curve.csv"));
    assert_eq!(header[0], "n_target");
    assert_eq!(body.len(), 9);
    let svg = fs::read_to_string(dir.path().join("exp2_curve.svg")).unwrap();
    let lines = polylines(&svg);
    for c in ["source", "mrai", "target"] {
        assert_eq!(lines.iter().filter(|l| *l == c).count(), 1, "{c} in {lines:?}");
    }
}

#[test]
fn exp2_rejects_unsorted_counts() {
    let mut cfg = tiny(ExperimentId::Exp2);
    cfg.target_patches_per_tissue = vec![10, 1];
    assert!(cfg.validate().unwrap_err().is_config());
}

#[test]
fn exp3_param_counts_and_pair_budget() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(ExperimentId::Exp3);
    cfg.repeats = 1;
    cfg.epochs = 1;
    cfg.target_patches_per_tissue = vec![2];
    let (records, rows) = exp3_param_sweep(&cfg, dir.path()).unwrap();
    let counts: Vec<usize> = rows.iter().map(|r| r.param_count).collect();
    assert_eq!(counts, [346, 1254, 4874, 19218, 76322, 304194]);
    assert_eq!(records.len(), 6);
    assert!(records.iter().all(|r| r.n_pairs == 120));
    let (_, body) = csv_rows(&dir.path().join("exp3_sweep.csv"));
    assert_eq!(body.len(), 6);
    let svg = fs::read_to_string(dir.path().join("exp3_sweep.svg")).unwrap();
    roxmltree::Document::parse(&svg).unwrap();
}

#[test]
fn exp3_default_pair_budget() {
    let cfg = ExperimentConfig::for_experiment(ExperimentId::Exp3);
    assert_eq!(cfg.max_pairs, 18000);
    assert_eq!(cfg.target_patches_per_tissue, [10]);
    assert_eq!(cfg.repeats, 20);
}

#[test]
fn rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = tiny(ExperimentId::Exp1);
    cfg.repeats = 1;
    exp1_one_sample(&cfg, a.path()).unwrap();
    exp1_one_sample(&cfg, b.path()).unwrap();
    for f in ["exp1_records.csv", "exp1_loss.csv", "exp1_summary.csv", "exp1_config.toml"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn report_collects_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(ExperimentId::Exp1);
    cfg.repeats = 1;
    exp1_one_sample(&cfg, dir.path()).unwrap();
    let text = build_report(dir.path()).unwrap();
    assert!(text.contains("mrai"));
}

fn trained() -> (ExperimentConfig, Cohort, mrai_core::harness::RunArtifacts) {
    let cfg = tiny(ExperimentId::Exp1);
    let cohort = Cohort::build(&cfg).unwrap();
    let test = TestSet::build(&cfg, &cohort).unwrap();
    let art = run_once(&cfg, &cohort, &test, &cfg.net(), Arm::Random, 1, 0, false).unwrap();
    (cfg, cohort, art)
}

#[test]
fn segmentation_shape_mask_and_consistency() {
    let (_, cohort, art) = trained();
    let scan = cohort.test[0].target_scan.as_ref().unwrap();
    let seg = segment_image(&art.model, &art.classifier, scan).unwrap();
    assert_eq!((seg.width, seg.height), (scan.width, scan.height));

    let truth = &*scan.labels;
    let mut patches = Vec::new();
    for y in 0..scan.height {
        for x in 0..scan.width {
            let inside = (PATCH_HALF..scan.width - PATCH_HALF).contains(&x) && (PATCH_HALF..scan.height - PATCH_HALF).contains(&y);
            let brain = truth.get(x, y).class_index().is_some();
            if inside && brain {
                patches.push(Patch::cut(scan, x, y));
                assert_ne!(seg.get(x, y), TissueId::Bkg);
            } else {
                assert_eq!(seg.get(x, y), TissueId::Bkg);
            }
        }
    }
    let feats = embed_features(&art.model, &patches).unwrap();
    let expected = tissue_error(&art.classifier, &feats);
    assert!((segmentation_error(&seg, truth) - expected).abs() < 1e-12);

    let ppm = segmentation_ppm(&seg);
    assert!(ppm.starts_with(b"P6"));
}

#[test]
fn all_background_scan_segments_to_background() {
    let (_, _, art) = trained();
    let map = TissueLabelMap::new(40, 40, vec![TissueId::Bkg; 1600], 9).unwrap();
    let scan = ScanImage::from_parts(vec![0.0; 1600], Arc::new(map), AcquisitionProtocol::brainweb_3_0t(), 1).unwrap();
    let seg = segment_image(&art.model, &art.classifier, &scan).unwrap();
    assert!(seg.labels.iter().all(|t| *t == TissueId::Bkg));
    assert_eq!(segmentation_error(&seg, &scan.labels), 0.0);
}

#[test]
fn pad_rep_does_not_exceed_raw() {
    let (_, _, art) = trained();
    let r = &art.record.report;
    assert!(r.proxy_a_rep <= r.proxy_a_raw + 0.1, "{} vs {}", r.proxy_a_rep, r.proxy_a_raw);
}
