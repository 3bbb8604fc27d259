//! Binary label-map and scan files.
//!
//! Label map: ASCII header `MRAI-LAB v1 <width> <height>\n` followed by
//! `width * height` bytes of tissue ordinals, row-major.
//!
//! Scan: ASCII header `MRAI-SCAN v1 <width> <height>\n` followed by
//! `width * height` little-endian `f32` intensities, row-major.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::anatomy::TissueLabelMap;
use super::tissue::TissueId;
use crate::{MraiError, Result};

const LAB_MAGIC: &str = "MRAI-LAB";
const SCAN_MAGIC: &str = "MRAI-SCAN";

fn split_header<'a>(bytes: &'a [u8], magic: &str) -> Result<(usize, usize, &'a [u8])> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| MraiError::Format(format!("{magic}: missing header line")))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| MraiError::Format(format!("{magic}: header is not ASCII")))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    match fields.as_slice() {
        [m, "v1", w, h] if *m == magic => {
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| MraiError::Format(format!("{magic}: bad dimension `{s}`")))
            };
            Ok((parse(w)?, parse(h)?, &bytes[nl + 1..]))
        }
        _ => Err(MraiError::Format(format!("expected `{magic} v1 <w> <h>`, got `{header}`"))),
    }
}

pub fn encode_label_map(map: &TissueLabelMap) -> Vec<u8> {
    let mut out = format!("{LAB_MAGIC} v1 {} {}\n", map.width, map.height).into_bytes();
    out.extend(map.labels.iter().map(|t| t.ordinal()));
    out
}

pub fn decode_label_map(bytes: &[u8], subject_seed: u64) -> Result<TissueLabelMap> {
    let (w, h, body) = split_header(bytes, LAB_MAGIC)?;
    if body.len() != w * h {
        return Err(MraiError::Format(format!("label map body has {} bytes, expected {}", body.len(), w * h)));
    }
    let labels = body
        .iter()
        .map(|&b| TissueId::from_ordinal(b).ok_or_else(|| MraiError::Format(format!("unknown tissue ordinal {b}"))))
        .collect::<Result<Vec<_>>>()?;
    TissueLabelMap::new(w, h, labels, subject_seed)
}

pub fn encode_scan(width: usize, height: usize, intensities: &[f64]) -> Vec<u8> {
    let mut out = format!("{SCAN_MAGIC} v1 {width} {height}\n").into_bytes();
    out.reserve(intensities.len() * 4);
    for &v in intensities {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Returns (width, height, intensities).
pub fn decode_scan(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let (w, h, body) = split_header(bytes, SCAN_MAGIC)?;
    if body.len() != w * h * 4 {
        return Err(MraiError::Format(format!("scan body has {} bytes, expected {}", body.len(), w * h * 4)));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    Ok((w, h, values))
}

pub fn write_label_map(path: &Path, map: &TissueLabelMap) -> Result<()> {
    fs::File::create(path)?.write_all(&encode_label_map(map))?;
    Ok(())
}

pub fn read_label_map(path: &Path, subject_seed: u64) -> Result<TissueLabelMap> {
    decode_label_map(&fs::read(path)?, subject_seed)
}

pub fn write_scan(path: &Path, width: usize, height: usize, intensities: &[f64]) -> Result<()> {
    fs::File::create(path)?.write_all(&encode_scan(width, height, intensities))?;
    Ok(())
}

pub fn read_scan(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    decode_scan(&fs::read(path)?)
}

/// Binary PPM (P6) of an RGB raster.
pub fn encode_ppm(width: usize, height: usize, rgb: &[[u8; 3]]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for px in rgb {
        out.extend_from_slice(px);
    }
    out
}

/// Binary PGM (P5) of intensities clamped to [0, 1].
pub fn encode_pgm(width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::generate_phantom;
    use proptest::prelude::*;

    #[test]
    fn label_map_header_is_exact() {
        let map = generate_phantom(1, 64, 70).unwrap();
        let bytes = encode_label_map(&map);
        assert!(bytes.starts_with(b"MRAI-LAB v1 64 70\n"));
        assert_eq!(bytes.len(), 18 + 64 * 70);
        let back = decode_label_map(&bytes, 1).unwrap();
        assert_eq!(back, map);
    }

    #[test]
    fn rejects_truncated_and_foreign_files() {
        let map = generate_phantom(1, 64, 64).unwrap();
        let bytes = encode_label_map(&map);
        assert!(decode_label_map(&bytes[..bytes.len() - 1], 1).is_err());
        assert!(decode_scan(&bytes).is_err());
        let mut bad = bytes.clone();
        let last = bad.len() - 1;
        bad[last] = 42;
        assert!(decode_label_map(&bad, 1).is_err());
    }

    proptest! {
        #[test]
        fn scan_roundtrip_is_f32_exact(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let mut rng = crate::seeds::rng(seed);
            let vals: Vec<f64> = (0..w * h).map(|_| f64::from(rand::Rng::random::<f32>(&mut rng))).collect();
            let bytes = encode_scan(w, h, &vals);
            let header = format!("MRAI-SCAN v1 {w} {h}\n");
            prop_assert!(bytes.starts_with(header.as_bytes()));
            let (w2, h2, back) = decode_scan(&bytes).unwrap();
            prop_assert_eq!((w2, h2), (w, h));
            prop_assert_eq!(back, vals);
        }
    }
}
