use std::sync::Arc;

use super::config::ExperimentConfig;
use crate::phantom::{generate_phantom, simulate_scan, ScanImage, TissueLabelMap};
use crate::Result;

/// A simulated subject scanned under one or two protocols.
#[derive(Debug, Clone)]
pub struct Subject {
    pub seed: u64,
    pub map: Arc<TissueLabelMap>,
    /// Source-protocol scan (scanner 0), if acquired.
    pub source_scan: Option<ScanImage>,
    /// Target-protocol scan (scanner 1), if acquired.
    pub target_scan: Option<ScanImage>,
}

/// All subjects of an experiment, fixed by the master seed.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub source: Vec<Subject>,
    pub target_train: Vec<Subject>,
    /// Test subjects carry both scans.
    pub test: Vec<Subject>,
}

fn subject(cfg: &ExperimentConfig, seed: u64, source: bool, target: bool) -> Result<Subject> {
    let ledger = cfg.ledger();
    let map = Arc::new(generate_phantom(seed, cfg.image_size, cfg.image_size)?);
    let scan = |protocol: &str, scanner: u8| -> Result<ScanImage> {
        let p = cfg.protocol(protocol)?;
        simulate_scan(&map, &p, scanner, ledger.seed("noise", &[seed, u64::from(scanner)]))
    };
    let source_scan = if source { Some(scan(&cfg.source_protocol, 0)?) } else { None };
    let target_scan = if target { Some(scan(&cfg.target_protocol, 1)?) } else { None };
    Ok(Subject {
        seed,
        map,
        source_scan,
        target_scan,
    })
}

impl Cohort {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let (s, t, e) = cfg.subject_seeds();
        Ok(Self {
            source: s.iter().map(|&seed| subject(cfg, seed, true, false)).collect::<Result<_>>()?,
            target_train: t.iter().map(|&seed| subject(cfg, seed, false, true)).collect::<Result<_>>()?,
            test: e.iter().map(|&seed| subject(cfg, seed, true, true)).collect::<Result<_>>()?,
        })
    }
}
