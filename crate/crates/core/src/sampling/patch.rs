use rand::seq::index;

use crate::phantom::{ScanImage, ScannerId, TissueId, TissueLabelMap, BRAIN_TISSUES};
use crate::seeds;
use crate::{MraiError, Result};

pub const PATCH_SIZE: usize = 15;
pub const PATCH_HALF: usize = PATCH_SIZE / 2;
pub const PATCH_LEN: usize = PATCH_SIZE * PATCH_SIZE;

/// A 15x15 intensity window labelled by the tissue at its center.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    /// Row-major 15x15 intensities.
    pub pixels: Vec<f64>,
    pub center: (usize, usize),
    pub tissue: TissueId,
    pub scanner_id: ScannerId,
    pub subject_seed: u64,
}

impl Patch {
    /// Cut the window centered at `(x, y)`; the caller guarantees it fits.
    pub fn cut(scan: &ScanImage, x: usize, y: usize) -> Self {
        let mut pixels = Vec::with_capacity(PATCH_LEN);
        for yy in y - PATCH_HALF..=y + PATCH_HALF {
            let row = yy * scan.width;
            pixels.extend_from_slice(&scan.intensities[row + x - PATCH_HALF..=row + x + PATCH_HALF]);
        }
        Self {
            pixels,
            center: (x, y),
            tissue: scan.labels.get(x, y),
            scanner_id: scan.scanner_id,
            subject_seed: scan.labels.subject_seed,
        }
    }

    /// Network input: the flattened pixels followed by the scanner ID.
    pub fn input_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(PATCH_LEN + 1);
        v.extend_from_slice(&self.pixels);
        v.push(f64::from(self.scanner_id));
        v
    }
}

/// A user- or heuristic-chosen patch center with its declared tissue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ManualCenter {
    pub x: usize,
    pub y: usize,
    pub tissue: TissueId,
}

fn window_fits(map: &TissueLabelMap, x: usize, y: usize) -> bool {
    x >= PATCH_HALF && y >= PATCH_HALF && x + PATCH_HALF < map.width && y + PATCH_HALF < map.height
}

/// Centers of `tissue` whose full window lies inside the image, raster order.
pub fn valid_centers(map: &TissueLabelMap, tissue: TissueId) -> Vec<(usize, usize)> {
    if map.width < PATCH_SIZE || map.height < PATCH_SIZE {
        return Vec::new();
    }
    let mut out = Vec::new();
    for y in PATCH_HALF..map.height - PATCH_HALF {
        for x in PATCH_HALF..map.width - PATCH_HALF {
            if map.get(x, y) == tissue {
                out.push((x, y));
            }
        }
    }
    out
}

/// Extract tissue-labelled patches.
///
/// Random mode draws `per_tissue` centers per brain tissue without
/// replacement; manual mode validates and cuts exactly the given centers.
pub fn extract_patches(
    scan: &ScanImage,
    per_tissue: usize,
    sample_seed: u64,
    manual: Option<&[ManualCenter]>,
) -> Result<Vec<Patch>> {
    let map = &*scan.labels;
    if let Some(centers) = manual {
        return centers
            .iter()
            .map(|c| {
                if c.tissue.class_index().is_none() {
                    return Err(MraiError::InvalidArgument(format!("{} is not a classification tissue", c.tissue)));
                }
                if !window_fits(map, c.x, c.y) {
                    return Err(MraiError::InvalidArgument(format!(
                        "center ({}, {}) leaves the 15x15 window outside the {}x{} image",
                        c.x, c.y, map.width, map.height
                    )));
                }
                let found = map.get(c.x, c.y);
                if found != c.tissue {
                    return Err(MraiError::LabelMismatch {
                        x: c.x,
                        y: c.y,
                        declared: c.tissue.to_string(),
                        found: found.to_string(),
                    });
                }
                Ok(Patch::cut(scan, c.x, c.y))
            })
            .collect();
    }
    if per_tissue == 0 {
        return Err(MraiError::InvalidArgument("per_tissue must be >= 1".into()));
    }
    let mut rng = seeds::rng(sample_seed);
    let mut out = Vec::with_capacity(per_tissue * BRAIN_TISSUES.len());
    for tissue in BRAIN_TISSUES {
        let centers = valid_centers(map, tissue);
        if centers.len() < per_tissue {
            return Err(MraiError::InsufficientTissue {
                tissue: tissue.to_string(),
                available: centers.len(),
                requested: per_tissue,
            });
        }
        for i in index::sample(&mut rng, centers.len(), per_tissue) {
            let (x, y) = centers[i];
            out.push(Patch::cut(scan, x, y));
        }
    }
    Ok(out)
}

/// One center per brain tissue, chosen where the window is most homogeneous
/// (largest count of same-tissue voxels; ties go to the first in raster
/// order). Stands in for an expert clicking a clean example of each tissue.
pub fn purposive_centers(map: &TissueLabelMap) -> Result<Vec<ManualCenter>> {
    let (w, h) = (map.width, map.height);
    BRAIN_TISSUES
        .iter()
        .map(|&tissue| {
            // summed-area table of the tissue indicator
            let mut sat = vec![0u32; (w + 1) * (h + 1)];
            for y in 0..h {
                let mut row = 0u32;
                for x in 0..w {
                    row += u32::from(map.get(x, y) == tissue);
                    sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
                }
            }
            let count = |x: usize, y: usize| {
                let (x0, y0, x1, y1) = (x - PATCH_HALF, y - PATCH_HALF, x + PATCH_HALF + 1, y + PATCH_HALF + 1);
                sat[y1 * (w + 1) + x1] + sat[y0 * (w + 1) + x0] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0]
            };
            valid_centers(map, tissue)
                .into_iter()
                .map(|(x, y)| (count(x, y), x, y))
                .fold(None, |best: Option<(u32, usize, usize)>, c| match best {
                    Some(b) if b.0 >= c.0 => Some(b),
                    _ => Some(c),
                })
                .map(|(_, x, y)| ManualCenter { x, y, tissue })
                .ok_or(MraiError::InsufficientTissue {
                    tissue: tissue.to_string(),
                    available: 0,
                    requested: 1,
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::phantom::{generate_phantom, simulate_scan, AcquisitionProtocol};

    fn scan(seed: u64, size: usize) -> ScanImage {
        let map = Arc::new(generate_phantom(seed, size, size).unwrap());
        simulate_scan(&map, &AcquisitionProtocol::brainweb_1_5t(), 0, seed).unwrap()
    }

    #[test]
    fn valid_region_is_242_square() {
        let map = TissueLabelMap::new(256, 256, vec![TissueId::Gm; 256 * 256], 0).unwrap();
        let c = valid_centers(&map, TissueId::Gm);
        assert_eq!(c.len(), 242 * 242);
        assert_eq!(c.first(), Some(&(7, 7)));
        assert_eq!(c.last(), Some(&(248, 248)));
    }

    #[test]
    fn one_patch_per_tissue() {
        let s = scan(7, 128);
        let p = extract_patches(&s, 1, 3, None).unwrap();
        assert_eq!(p.len(), 3);
        let tissues: Vec<TissueId> = p.iter().map(|p| p.tissue).collect();
        assert_eq!(tissues, BRAIN_TISSUES.to_vec());
        for patch in &p {
            assert_eq!(patch.pixels.len(), PATCH_LEN);
            assert_eq!(s.labels.get(patch.center.0, patch.center.1), patch.tissue);
            assert_eq!(patch.pixels[PATCH_LEN / 2], s.get(patch.center.0, patch.center.1));
        }
    }

    #[test]
    fn random_mode_is_deterministic_without_replacement() {
        let s = scan(2, 128);
        let a = extract_patches(&s, 20, 9, None).unwrap();
        let b = extract_patches(&s, 20, 9, None).unwrap();
        let ca: Vec<_> = a.iter().map(|p| p.center).collect();
        let cb: Vec<_> = b.iter().map(|p| p.center).collect();
        assert_eq!(ca, cb);
        let unique: std::collections::HashSet<_> = ca.iter().collect();
        assert_eq!(unique.len(), ca.len());
    }

    #[test]
    fn insufficient_tissue() {
        let mut labels = vec![TissueId::Wm; 32 * 32];
        labels[16 * 32 + 16] = TissueId::Csf;
        labels[16 * 32 + 17] = TissueId::Gm;
        let map = Arc::new(TissueLabelMap::new(32, 32, labels, 0).unwrap());
        let s = simulate_scan(&map, &AcquisitionProtocol::brainweb_1_5t(), 0, 0).unwrap();
        assert!(matches!(
            extract_patches(&s, 2, 0, None),
            Err(MraiError::InsufficientTissue { available: 1, requested: 2, .. })
        ));
    }

    #[test]
    fn manual_mode_validates_labels() {
        let s = scan(4, 128);
        let centers = purposive_centers(&s.labels).unwrap();
        let p = extract_patches(&s, 1, 0, Some(&centers)).unwrap();
        assert_eq!(p.len(), 3);
        let wrong = [ManualCenter { tissue: TissueId::Csf, ..centers[2] }];
        assert!(matches!(extract_patches(&s, 1, 0, Some(&wrong)), Err(MraiError::LabelMismatch { .. })));
        let edge = [ManualCenter { x: 3, y: 60, tissue: TissueId::Bkg }];
        assert!(extract_patches(&s, 1, 0, Some(&edge)).is_err());
    }

    #[test]
    fn purposive_centers_are_homogeneous() {
        let s = scan(5, 256);
        for c in purposive_centers(&s.labels).unwrap() {
            let mut same = 0;
            for y in c.y - PATCH_HALF..=c.y + PATCH_HALF {
                for x in c.x - PATCH_HALF..=c.x + PATCH_HALF {
                    same += usize::from(s.labels.get(x, y) == c.tissue);
                }
            }
            assert!(same > PATCH_LEN / 2, "{}: {same}", c.tissue);
        }
    }
}
