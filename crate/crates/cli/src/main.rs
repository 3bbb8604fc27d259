//! `mrai`: simulate phantoms, build pair datasets, train the embedding
//! network and run the experiments.

mod files;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use mrai_core::evalstats::{embed_features, train_linear, LossKind, DEFAULT_L2_GRID};
use mrai_core::harness::{
    build_report, exp1_one_sample, exp2_learning_curve, exp3_param_sweep, exp4_margin_sweep, segment_image,
    segmentation_ppm, ExperimentConfig, ExperimentId,
};
use mrai_core::phantom::io::{encode_pgm, read_label_map, write_label_map};
use mrai_core::phantom::{generate_phantom, simulate_scan, ScanImage};
use mrai_core::sampling::{build_pairs, extract_patches, write_pair_records, PairDataset, Patch};
use mrai_core::seeds::SeedLedger;
use mrai_core::siamnet::{load_model, save_model, train, write_loss_log};
use mrai_core::{MraiError, Result};

#[derive(Parser)]
#[command(name = "mrai", version, about = "Scanner-invariant patch embeddings on simulated MR phantoms")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct PairArgs {
    /// Directory of `subject<seed>_scanner<id>.scan` files with their labels.
    #[arg(long)]
    scans: PathBuf,
    /// Random source patches per tissue per scanner-0 scan.
    #[arg(long, default_value_t = 10)]
    source_per_tissue: usize,
    /// Random target patches per tissue per scanner-1 scan.
    #[arg(long, default_value_t = 1)]
    target_per_tissue: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate phantoms (or ingest a label map) and simulate scans.
    Simulate {
        #[arg(long, default_value_t = 1)]
        subjects: usize,
        /// Index of the first subject in the seed ledger.
        #[arg(long, default_value_t = 0)]
        first_subject: u64,
        /// 0 scans with the source protocol, 1 with the target protocol.
        #[arg(long, default_value_t = 0)]
        scanner: u8,
        /// Protocol name overriding the scanner's default.
        #[arg(long)]
        protocol: Option<String>,
        /// Use this label map instead of a generated phantom.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Subject seed recorded for an ingested label map.
        #[arg(long, default_value_t = 0)]
        subject_seed: u64,
    },
    /// Extract labelled patch centers from one scan.
    Patches {
        #[arg(long)]
        scan: PathBuf,
        #[arg(long, default_value_t = 10)]
        per_tissue: usize,
    },
    /// Build the pair dataset from a scan directory and export it.
    Pairs {
        #[command(flatten)]
        pairs: PairArgs,
    },
    /// Train the embedding network on a scan directory.
    Train {
        #[command(flatten)]
        pairs: PairArgs,
    },
    /// Embed patches with a trained model.
    Embed {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scans: PathBuf,
        #[arg(long, default_value_t = 10)]
        per_tissue: usize,
    },
    /// Segment a scan with a trained model and a classifier fitted on a scan directory.
    Segment {
        #[arg(long)]
        model: PathBuf,
        /// Labelled scans for fitting the tissue classifier.
        #[arg(long)]
        scans: PathBuf,
        #[arg(long, default_value_t = 10)]
        per_tissue: usize,
        /// Scan to segment.
        #[arg(long)]
        target: PathBuf,
    },
    Exp1,
    Exp2,
    Exp3,
    Exp4,
    /// Collect result tables in the output directory into report.md.
    Report,
}

fn config(global: &Global, default: ExperimentId) -> Result<ExperimentConfig> {
    let mut cfg = match &global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::for_experiment(default),
    };
    cfg.experiment_id = default;
    if let Some(seed) = global.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sample_dir(scans: &[ScanImage], per_tissue: &dyn Fn(&ScanImage) -> usize, ledger: &SeedLedger, tag: &str) -> Result<(Vec<Patch>, Vec<Patch>)> {
    let mut source = Vec::new();
    let mut target = Vec::new();
    for scan in scans {
        let seed = ledger.seed(tag, &[scan.labels.subject_seed, u64::from(scan.scanner_id)]);
        let patches = extract_patches(scan, per_tissue(scan), seed, None)?;
        if scan.scanner_id == 0 {
            source.extend(patches);
        } else {
            target.extend(patches);
        }
    }
    Ok((source, target))
}

fn pair_dataset(args: &PairArgs, cfg: &ExperimentConfig) -> Result<PairDataset> {
    let scans = files::load_scan_dir(&args.scans, cfg)?;
    let ledger = cfg.ledger();
    let per = |s: &ScanImage| if s.scanner_id == 0 { args.source_per_tissue } else { args.target_per_tissue };
    let (source, target) = sample_dir(&scans, &per, &ledger, "cli-patches")?;
    build_pairs(&source, &target, cfg.max_pairs, ledger.seed("cli-pairs", &[]))
}

fn write_patch_csv(path: &Path, patches: &[Patch], embeddings: Option<&[Vec<f64>]>) -> Result<()> {
    let mut text = String::from("subject,scanner,x,y,tissue");
    if let Some(e) = embeddings.and_then(|e| e.first()) {
        for i in 0..e.len() {
            text.push_str(&format!(",e{i}"));
        }
    }
    text.push('\n');
    for (i, p) in patches.iter().enumerate() {
        text.push_str(&format!("{},{},{},{},{}", p.subject_seed, p.scanner_id, p.center.0, p.center.1, p.tissue));
        if let Some(e) = embeddings {
            for v in &e[i] {
                text.push_str(&format!(",{v}"));
            }
        }
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    fs::create_dir_all(&g.out)?;
    match cli.command {
        Command::Simulate {
            subjects,
            first_subject,
            scanner,
            protocol,
            labels,
            subject_seed,
        } => {
            let cfg = config(g, ExperimentId::Exp1)?;
            if scanner > 1 {
                return Err(MraiError::InvalidArgument(format!("scanner id {scanner} not in {{0, 1}}")));
            }
            let name = protocol.unwrap_or_else(|| {
                if scanner == 0 { cfg.source_protocol.clone() } else { cfg.target_protocol.clone() }
            });
            let p = cfg.protocol(&name)?;
            let ledger = cfg.ledger();
            let maps = match labels {
                Some(path) => vec![read_label_map(&path, subject_seed)?],
                None => (first_subject..first_subject + subjects as u64)
                    .map(|i| generate_phantom(ledger.subject_seed(i), cfg.image_size, cfg.image_size))
                    .collect::<Result<_>>()?,
            };
            for map in maps {
                let seed = map.subject_seed;
                let map = Arc::new(map);
                let scan = simulate_scan(&map, &p, scanner, ledger.seed("noise", &[seed, u64::from(scanner)]))?;
                files::save_subject_scan(&g.out, &scan)?;
                fs::write(
                    g.out.join(format!("subject{seed}_scanner{scanner}.pgm")),
                    encode_pgm(scan.width, scan.height, &scan.intensities),
                )?;
                println!("{}", files::scan_path(&g.out, seed, scanner).display());
            }
        }
        Command::Patches { scan, per_tissue } => {
            let cfg = config(g, ExperimentId::Exp1)?;
            let image = files::load_scan(&scan, &cfg)?;
            let seed = cfg.ledger().seed("cli-patches", &[image.labels.subject_seed, u64::from(image.scanner_id)]);
            let patches = extract_patches(&image, per_tissue, seed, None)?;
            let path = g.out.join("patches.csv");
            write_patch_csv(&path, &patches, None)?;
            println!("{} patches -> {}", patches.len(), path.display());
        }
        Command::Pairs { pairs } => {
            let cfg = config(g, ExperimentId::Exp1)?;
            let ds = pair_dataset(&pairs, &cfg)?;
            let path = g.out.join("pairs.csv");
            write_pair_records(fs::File::create(&path)?, &ds.records())?;
            println!("{} of {} pairs -> {}", ds.len(), ds.enumerated, path.display());
        }
        Command::Train { pairs } => {
            let cfg = config(g, ExperimentId::Exp1)?;
            let ds = pair_dataset(&pairs, &cfg)?;
            let out = train(cfg.net(), &ds, &cfg.train_options(), cfg.ledger().seed("cli-train", &[]))?;
            save_model(&out.model, &g.out.join("model.mrai"))?;
            write_loss_log(fs::File::create(g.out.join("loss.csv"))?, &out.history, true)?;
            println!(
                "trained on {} pairs, final mean loss {:.5} -> {}",
                ds.len(),
                out.history.last().map_or(f64::NAN, |e| e.mean_loss),
                g.out.join("model.mrai").display()
            );
        }
        Command::Embed { model, scans, per_tissue } => {
            let cfg = config(g, ExperimentId::Exp1)?;
            let model = load_model(&model)?;
            let images = files::load_scan_dir(&scans, &cfg)?;
            let (s, t) = sample_dir(&images, &|_| per_tissue, &cfg.ledger(), "cli-embed")?;
            let patches: Vec<Patch> = s.into_iter().chain(t).collect();
            let feats = embed_features(&model, &patches)?;
            let path = g.out.join("embeddings.csv");
            write_patch_csv(&path, &patches, Some(&feats.vectors))?;
            println!("{} embeddings -> {}", patches.len(), path.display());
        }
        Command::Segment {
            model,
            scans,
            per_tissue,
            target,
        } => {
            let cfg = config(g, ExperimentId::Exp1)?;
            let model = load_model(&model)?;
            let images = files::load_scan_dir(&scans, &cfg)?;
            let (s, t) = sample_dir(&images, &|_| per_tissue, &cfg.ledger(), "cli-segment")?;
            let patches: Vec<Patch> = s.into_iter().chain(t).collect();
            let feats = embed_features(&model, &patches)?;
            let classifier = train_linear(&feats, LossKind::Logistic, &DEFAULT_L2_GRID, cfg.cv_folds, cfg.ledger().seed("cli-cv", &[]))?;
            let image = files::load_scan(&target, &cfg)?;
            let seg = segment_image(&model, &classifier, &image)?;
            let stem = target.file_stem().and_then(|s| s.to_str()).unwrap_or("scan");
            write_label_map(&g.out.join(format!("{stem}_seg.lab")), &seg)?;
            fs::write(g.out.join(format!("{stem}_seg.ppm")), segmentation_ppm(&seg))?;
            let err = mrai_core::harness::segmentation_error(&seg, &image.labels);
            println!("segmentation error {err:.4} -> {}", g.out.join(format!("{stem}_seg.ppm")).display());
        }
        Command::Exp1 => {
            let cfg = config(g, ExperimentId::Exp1)?;
            let (_, rows) = exp1_one_sample(&cfg, &g.out)?;
            for r in rows {
                println!("{:6} {:6} err {:.3} ± {:.3}  pad {:.2} -> {:.2}", r.classifier, r.arm, r.mean_err, r.sem, r.pad_raw, r.pad_rep);
            }
        }
        Command::Exp2 => {
            let cfg = config(g, ExperimentId::Exp2)?;
            let (_, rows) = exp2_learning_curve(&cfg, &g.out)?;
            for r in rows {
                println!("n={:4} {:6} err {:.3} ± {:.3}  pad {:.2} -> {:.2}", r.n_target, r.classifier, r.mean_err, r.sem_err, r.pad_raw, r.pad_rep);
            }
        }
        Command::Exp3 => {
            let cfg = config(g, ExperimentId::Exp3)?;
            let (_, rows) = exp3_param_sweep(&cfg, &g.out)?;
            for r in rows {
                println!("{:10} {:7} params  pad {:.2} ± {:.2}  err {:.3} ± {:.3}", r.net, r.param_count, r.pad_rep, r.pad_rep_sem, r.tissue_error, r.tissue_error_sem);
            }
        }
        Command::Exp4 => {
            let cfg = config(g, ExperimentId::Exp4)?;
            for run in exp4_margin_sweep(&cfg, &g.out)? {
                let r = run.row;
                println!(
                    "margin {:5} repeat {}: distance {:.4} -> {:.4} (ratio {:.4})  domain pad {:.2}  class error {:.3}",
                    r.margin, r.repeat, r.initial_distance, r.final_distance, r.collapse_ratio, r.pad_domain, r.class_error
                );
            }
        }
        Command::Report => {
            print!("{}", build_report(&g.out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.global.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() {
                2
            } else if e.is_numeric() {
                3
            } else {
                1
            })
        }
    }
}
