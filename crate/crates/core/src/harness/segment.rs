use crate::evalstats::LinearModel;
use crate::phantom::io::encode_ppm;
use crate::phantom::{ScanImage, TissueId, TissueLabelMap};
use crate::sampling::{Patch, PATCH_HALF};
use crate::siamnet::SiameseModel;
use crate::Result;

/// Label every CSF/GM/WM voxel whose full window fits; everything else is BKG.
pub fn segment_image(model: &SiameseModel, classifier: &LinearModel, scan: &ScanImage) -> Result<TissueLabelMap> {
    let map = &*scan.labels;
    let (w, h) = (scan.width, scan.height);
    let mut labels = vec![TissueId::Bkg; w * h];
    for y in PATCH_HALF..h.saturating_sub(PATCH_HALF) {
        for x in PATCH_HALF..w.saturating_sub(PATCH_HALF) {
            if map.get(x, y).class_index().is_none() {
                continue;
            }
            let patch = Patch::cut(scan, x, y);
            let embedding = model.embed(&patch.input_vector())?;
            let class = classifier.predict(&embedding);
            labels[y * w + x] = TissueId::from_class_index(class).unwrap_or(TissueId::Bkg);
        }
    }
    TissueLabelMap::new(w, h, labels, map.subject_seed)
}

/// Display colour of a segmentation label: WM yellow, GM green, CSF blue,
/// everything else black.
pub fn tissue_color(t: TissueId) -> [u8; 3] {
    match t {
        TissueId::Wm => [255, 220, 0],
        TissueId::Gm => [0, 170, 60],
        TissueId::Csf => [30, 90, 255],
        _ => [0, 0, 0],
    }
}

pub fn segmentation_ppm(map: &TissueLabelMap) -> Vec<u8> {
    let rgb: Vec<[u8; 3]> = map.labels.iter().map(|t| tissue_color(*t)).collect();
    encode_ppm(map.width, map.height, &rgb)
}

/// Fraction of in-mask voxels (CSF/GM/WM in `truth` with a full window) whose
/// predicted label differs.
pub fn segmentation_error(pred: &TissueLabelMap, truth: &TissueLabelMap) -> f64 {
    let (w, h) = (truth.width, truth.height);
    let mut n = 0usize;
    let mut wrong = 0usize;
    for y in PATCH_HALF..h.saturating_sub(PATCH_HALF) {
        for x in PATCH_HALF..w.saturating_sub(PATCH_HALF) {
            let t = truth.get(x, y);
            if t.class_index().is_none() {
                continue;
            }
            n += 1;
            if pred.get(x, y) != t {
                wrong += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        wrong as f64 / n as f64
    }
}
