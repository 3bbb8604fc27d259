use std::path::{Path, PathBuf};
use std::sync::Arc;

use mrai_core::harness::ExperimentConfig;
use mrai_core::phantom::io::{read_label_map, read_scan, write_label_map, write_scan};
use mrai_core::phantom::{ScanImage, ScannerId, TissueLabelMap};
use mrai_core::{MraiError, Result};

pub fn label_path(dir: &Path, subject: u64) -> PathBuf {
    dir.join(format!("subject{subject}.lab"))
}

pub fn scan_path(dir: &Path, subject: u64, scanner: ScannerId) -> PathBuf {
    dir.join(format!("subject{subject}_scanner{scanner}.scan"))
}

/// `(subject, scanner)` from a `subject<seed>_scanner<id>.scan` file name.
pub fn parse_scan_name(path: &Path) -> Option<(u64, ScannerId)> {
    let stem = path.file_name()?.to_str()?.strip_suffix(".scan")?;
    let (subject, scanner) = stem.strip_prefix("subject")?.split_once("_scanner")?;
    Some((subject.parse().ok()?, scanner.parse().ok()?))
}

pub fn save_subject_scan(dir: &Path, scan: &ScanImage) -> Result<()> {
    let subject = scan.labels.subject_seed;
    let lab = label_path(dir, subject);
    if !lab.exists() {
        write_label_map(&lab, &scan.labels)?;
    }
    write_scan(&scan_path(dir, subject, scan.scanner_id), scan.width, scan.height, &scan.intensities)
}

/// Load one scan file with its label map from the same directory.
pub fn load_scan(path: &Path, cfg: &ExperimentConfig) -> Result<ScanImage> {
    let (subject, scanner) = parse_scan_name(path).ok_or_else(|| {
        MraiError::InvalidArgument(format!("{} is not named subject<seed>_scanner<id>.scan", path.display()))
    })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let map: TissueLabelMap = read_label_map(&label_path(dir, subject), subject)?;
    let (w, h, intensities) = read_scan(path)?;
    if (w, h) != (map.width, map.height) {
        return Err(MraiError::Shape(format!("scan {w}x{h} vs label map {}x{}", map.width, map.height)));
    }
    let protocol = cfg.protocol(if scanner == 0 { &cfg.source_protocol } else { &cfg.target_protocol })?;
    ScanImage::from_parts(intensities, Arc::new(map), protocol, scanner)
}

/// All scans in `dir`, sorted by (scanner, subject).
pub fn load_scan_dir(dir: &Path, cfg: &ExperimentConfig) -> Result<Vec<ScanImage>> {
    let mut paths: Vec<(u64, ScannerId, PathBuf)> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| parse_scan_name(&p).map(|(s, k)| (s, k, p)))
        .collect();
    paths.sort_by_key(|(s, k, _)| (*k, *s));
    if paths.is_empty() {
        return Err(MraiError::InvalidArgument(format!("no scans found in {}", dir.display())));
    }
    paths.iter().map(|(_, _, p)| load_scan(p, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        let p = scan_path(Path::new("/x"), 1234, 1);
        assert_eq!(parse_scan_name(&p), Some((1234, 1)));
        assert_eq!(parse_scan_name(Path::new("other.scan")), None);
    }
}
