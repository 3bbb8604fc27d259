use std::fmt::Write as _;
use std::fs;
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

use super::cohort::Cohort;
use super::config::{ExperimentConfig, ExperimentId};
use super::pipeline::{run_once, Arm, RunRecord, TestSet};
use super::stats::mean_sem;
use super::svg::{self, Panel, Series};
use crate::Result;

pub(crate) fn run_jobs<J: Sync, T: Send>(jobs: &[J], f: impl Fn(&J) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    let out: Vec<Result<T>> = jobs.par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    let out: Vec<Result<T>> = jobs.iter().map(f).collect();
    out.into_iter().collect()
}

#[derive(Serialize)]
struct RecordRow<'a> {
    config_hash: &'a str,
    experiment: &'a str,
    arm: &'a str,
    n_target: usize,
    repeat: usize,
    net: &'a str,
    param_count: usize,
    n_pairs: usize,
    run_seed: u64,
    tissue_error_source: f64,
    tissue_error_mrai: f64,
    tissue_error_target: f64,
    pad_raw: f64,
    pad_rep: f64,
    final_loss: f64,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-run records, loss curves and (separately, since it is not
/// reproducible) wall time.
pub fn write_records(out: &Path, experiment: ExperimentId, records: &[RunRecord]) -> Result<()> {
    let name = experiment.name();
    let rows: Vec<RecordRow> = records
        .iter()
        .map(|r| RecordRow {
            config_hash: &r.config_hash,
            experiment: name,
            arm: r.arm.name(),
            n_target: r.n_target,
            repeat: r.repeat_index,
            net: &r.net,
            param_count: r.param_count,
            n_pairs: r.n_pairs,
            run_seed: r.run_seed,
            tissue_error_source: r.report.tissue_error_source,
            tissue_error_mrai: r.report.tissue_error_mrai,
            tissue_error_target: r.report.tissue_error_target,
            pad_raw: r.report.proxy_a_raw,
            pad_rep: r.report.proxy_a_rep,
            final_loss: r.loss_curve.last().map_or(f64::NAN, |e| e.mean_loss),
        })
        .collect();
    write_csv(&out.join(format!("{name}_records.csv")), &rows)?;

    let mut loss = String::from("arm,n_target,repeat,net,epoch,mean_loss\n");
    let mut timing = String::from("arm,n_target,repeat,net,wall_ms\n");
    for r in records {
        for e in &r.loss_curve {
            let _ = writeln!(loss, "{},{},{},{},{},{}", r.arm.name(), r.n_target, r.repeat_index, r.net, e.epoch, e.mean_loss);
        }
        let _ = writeln!(timing, "{},{},{},{},{:.1}", r.arm.name(), r.n_target, r.repeat_index, r.net, r.wall_ms);
    }
    fs::write(out.join(format!("{name}_loss.csv")), loss)?;
    fs::write(out.join(format!("{name}_timing.csv")), timing)?;
    Ok(())
}

/// One row of the first experiment's summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub classifier: String,
    pub arm: String,
    pub mean_err: f64,
    pub sem: f64,
    pub pad_raw: f64,
    pub pad_rep: f64,
}

pub const CLASSIFIERS: [&str; 3] = ["source", "mrai", "target"];

fn classifier_error(r: &RunRecord, classifier: &str) -> f64 {
    match classifier {
        "source" => r.report.tissue_error_source,
        "mrai" => r.report.tissue_error_mrai,
        _ => r.report.tissue_error_target,
    }
}

pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for arm in [Arm::Manual, Arm::Random] {
        let subset: Vec<&RunRecord> = records.iter().filter(|r| r.arm == arm).collect();
        if subset.is_empty() {
            continue;
        }
        let pad_raw = mean_sem(&subset.iter().map(|r| r.report.proxy_a_raw).collect::<Vec<_>>()).0;
        let pad_rep = mean_sem(&subset.iter().map(|r| r.report.proxy_a_rep).collect::<Vec<_>>()).0;
        for c in CLASSIFIERS {
            let (mean_err, sem) = mean_sem(&subset.iter().map(|r| classifier_error(r, c)).collect::<Vec<_>>());
            rows.push(SummaryRow {
                classifier: c.to_string(),
                arm: arm.name().to_string(),
                mean_err,
                sem,
                pad_raw,
                pad_rep,
            });
        }
    }
    rows
}

pub const REFERENCE_FOOTER: &str = "Published reference values (procedural phantoms are not expected to match): \
manual arm tissue error mrai 0.223, source 0.631, target 0.613; proxy A-distance raw 1.88 -> representation 0.26.";

fn write_exp1_report(out: &Path, cfg: &ExperimentConfig, rows: &[SummaryRow]) -> Result<()> {
    let mut md = String::new();
    let _ = writeln!(md, "# Experiment 1: one labelled target patch per tissue\n");
    let _ = writeln!(md, "config hash `{}`, master seed {}, {} repeats\n", cfg.hash(), cfg.master_seed, cfg.repeats);
    let _ = writeln!(md, "| classifier | arm | mean error | sem | pad raw | pad rep |");
    let _ = writeln!(md, "|---|---|---|---|---|---|");
    for r in rows {
        let _ = writeln!(
            md,
            "| {} | {} | {:.3} | {:.3} | {:.2} | {:.2} |",
            r.classifier, r.arm, r.mean_err, r.sem, r.pad_raw, r.pad_rep
        );
    }
    let _ = writeln!(md, "\n{REFERENCE_FOOTER}");
    fs::write(out.join("exp1_report.md"), md)?;
    Ok(())
}

fn prepare(cfg: &ExperimentConfig, out: &Path) -> Result<(Cohort, TestSet)> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    fs::write(out.join(format!("{}_config.toml", cfg.experiment_id.name())), cfg.canonical())?;
    let cohort = Cohort::build(cfg)?;
    let test = TestSet::build(cfg, &cohort)?;
    Ok((cohort, test))
}

/// Manual and random arms, `repeats` each, with both baselines.
pub fn exp1_one_sample(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<RunRecord>, Vec<SummaryRow>)> {
    let (cohort, test) = prepare(cfg, out)?;
    let n = cfg.target_patches_per_tissue[0];
    let jobs: Vec<(Arm, usize)> = [Arm::Manual, Arm::Random]
        .into_iter()
        .flat_map(|a| (0..cfg.repeats).map(move |r| (a, r)))
        .collect();
    let net = cfg.net();
    let records = run_jobs(&jobs, |&(arm, r)| Ok(run_once(cfg, &cohort, &test, &net, arm, n, r, true)?.record))?;
    let rows = summarize(&records);
    write_records(out, ExperimentId::Exp1, &records)?;
    write_csv(&out.join("exp1_summary.csv"), &rows)?;
    write_exp1_report(out, cfg, &rows)?;
    Ok((records, rows))
}

/// One point of the learning curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub n_target: usize,
    pub classifier: String,
    pub mean_err: f64,
    pub sem_err: f64,
    pub pad_raw: f64,
    pub pad_raw_sem: f64,
    pub pad_rep: f64,
    pub pad_rep_sem: f64,
}

pub fn curve(records: &[RunRecord], counts: &[usize]) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for &n in counts {
        let subset: Vec<&RunRecord> = records.iter().filter(|r| r.n_target == n).collect();
        let (pad_raw, pad_raw_sem) = mean_sem(&subset.iter().map(|r| r.report.proxy_a_raw).collect::<Vec<_>>());
        let (pad_rep, pad_rep_sem) = mean_sem(&subset.iter().map(|r| r.report.proxy_a_rep).collect::<Vec<_>>());
        for c in CLASSIFIERS {
            let (mean_err, sem_err) = mean_sem(&subset.iter().map(|r| classifier_error(r, c)).collect::<Vec<_>>());
            rows.push(CurveRow {
                n_target: n,
                classifier: c.to_string(),
                mean_err,
                sem_err,
                pad_raw,
                pad_raw_sem,
                pad_rep,
                pad_rep_sem,
            });
        }
    }
    rows
}

fn curve_svg(rows: &[CurveRow], counts: &[usize]) -> String {
    let x: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
    let pick = |c: &str, f: &dyn Fn(&CurveRow) -> (f64, f64)| -> (Vec<f64>, Vec<f64>) {
        rows.iter().filter(|r| r.classifier == c).map(f).unzip()
    };
    let errors = CLASSIFIERS
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (y, b) = pick(c, &|r| (r.mean_err, r.sem_err));
            Series {
                label: c.to_string(),
                x: x.clone(),
                y,
                band: Some(b),
                color: svg::PALETTE[i],
            }
        })
        .collect();
    let (raw, raw_sem) = pick("mrai", &|r| (r.pad_raw, r.pad_raw_sem));
    let (rep, rep_sem) = pick("mrai", &|r| (r.pad_rep, r.pad_rep_sem));
    let pads = vec![
        Series {
            label: "raw".into(),
            x: x.clone(),
            y: raw,
            band: Some(raw_sem),
            color: svg::PALETTE[3],
        },
        Series {
            label: "representation".into(),
            x,
            y: rep,
            band: Some(rep_sem),
            color: svg::PALETTE[4],
        },
    ];
    svg::line_panels(&[
        Panel {
            title: "Tissue error".into(),
            x_label: "target patches per tissue".into(),
            y_label: "error".into(),
            log_x: true,
            series: errors,
        },
        Panel {
            title: "Proxy A-distance".into(),
            x_label: "target patches per tissue".into(),
            y_label: "distance".into(),
            log_x: true,
            series: pads,
        },
    ])
}

/// Learning curve over the listed target counts (random arm).
pub fn exp2_learning_curve(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<RunRecord>, Vec<CurveRow>)> {
    let (cohort, test) = prepare(cfg, out)?;
    let counts = &cfg.target_patches_per_tissue;
    let jobs: Vec<(usize, usize)> = counts.iter().flat_map(|&n| (0..cfg.repeats).map(move |r| (n, r))).collect();
    let net = cfg.net();
    let records = run_jobs(&jobs, |&(n, r)| Ok(run_once(cfg, &cohort, &test, &net, Arm::Random, n, r, true)?.record))?;
    let rows = curve(&records, counts);
    write_records(out, ExperimentId::Exp2, &records)?;
    write_csv(&out.join("exp2_curve.csv"), &rows)?;
    fs::write(out.join("exp2_curve.svg"), curve_svg(&rows, counts))?;
    Ok((records, rows))
}

/// One network size of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub net: String,
    pub param_count: usize,
    pub runs: usize,
    pub pad_rep: f64,
    pub pad_rep_sem: f64,
    pub tissue_error: f64,
    pub tissue_error_sem: f64,
}

/// Network-size sweep at a fixed target count and pair budget.
pub fn exp3_param_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<RunRecord>, Vec<SweepRow>)> {
    let (cohort, test) = prepare(cfg, out)?;
    let n = cfg.target_patches_per_tissue[0];
    let nets: Vec<_> = cfg
        .sweep
        .iter()
        .map(|&[k, h1, h2]| crate::siamnet::NetConfig {
            conv_kernels: k,
            dense1: h1,
            dense2: h2,
            ..cfg.net()
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..nets.len()).flat_map(|i| (0..cfg.repeats).map(move |r| (i, r))).collect();
    let records = run_jobs(&jobs, |&(i, r)| Ok(run_once(cfg, &cohort, &test, &nets[i], Arm::Random, n, r, false)?.record))?;
    let rows: Vec<SweepRow> = nets
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let subset: Vec<&RunRecord> = records.iter().zip(&jobs).filter(|(_, j)| j.0 == i).map(|(r, _)| r).collect();
            let (pad_rep, pad_rep_sem) = mean_sem(&subset.iter().map(|r| r.report.proxy_a_rep).collect::<Vec<_>>());
            let (tissue_error, tissue_error_sem) =
                mean_sem(&subset.iter().map(|r| r.report.tissue_error_mrai).collect::<Vec<_>>());
            SweepRow {
                net: subset[0].net.clone(),
                param_count: subset[0].param_count,
                runs: subset.len(),
                pad_rep,
                pad_rep_sem,
                tissue_error,
                tissue_error_sem,
            }
        })
        .collect();
    write_records(out, ExperimentId::Exp3, &records)?;
    write_csv(&out.join("exp3_sweep.csv"), &rows)?;
    let x: Vec<f64> = rows.iter().map(|r| r.param_count as f64).collect();
    let plot = svg::line_panels(&[
        Panel {
            title: "Proxy A-distance".into(),
            x_label: "parameters".into(),
            y_label: "distance".into(),
            log_x: true,
            series: vec![Series {
                label: "representation".into(),
                x: x.clone(),
                y: rows.iter().map(|r| r.pad_rep).collect(),
                band: Some(rows.iter().map(|r| r.pad_rep_sem).collect()),
                color: svg::PALETTE[4],
            }],
        },
        Panel {
            title: "Tissue error".into(),
            x_label: "parameters".into(),
            y_label: "error".into(),
            log_x: true,
            series: vec![Series {
                label: "mrai".into(),
                x,
                y: rows.iter().map(|r| r.tissue_error).collect(),
                band: Some(rows.iter().map(|r| r.tissue_error_sem).collect()),
                color: svg::PALETTE[1],
            }],
        },
    ]);
    fs::write(out.join("exp3_sweep.svg"), plot)?;
    Ok((records, rows))
}
