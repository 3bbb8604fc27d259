//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export is a thin wrapper over a plain function so the same code
//! paths run under `cargo test`.

use std::sync::Arc;

use mrai_core::harness::{run_margin, ExperimentConfig, ExperimentId};
use mrai_core::phantom::{generate_phantom, signal, simulate_scan, AcquisitionProtocol, TissueId, BRAIN_TISSUES};
use mrai_core::Result;
use wasm_bindgen::prelude::*;

fn js_err(e: mrai_core::MraiError) -> JsError {
    JsError::new(&e.to_string())
}

pub fn protocol(b0: f64, flip_deg: f64, tr_ms: f64, te_ms: f64, noise_sigma: f64) -> AcquisitionProtocol {
    AcquisitionProtocol {
        name: "custom".into(),
        b0,
        flip_deg,
        tr_ms,
        te_ms,
        noise_sigma,
    }
}

/// Simulated scan as RGBA bytes (`size * size * 4`); with `overlay` the
/// CSF/GM/WM voxels are tinted by their label.
pub fn scan_rgba(subject: u64, size: usize, p: &AcquisitionProtocol, noise_seed: u64, overlay: bool) -> Result<Vec<u8>> {
    let map = Arc::new(generate_phantom(subject, size, size)?);
    let scan = simulate_scan(&map, p, 0, noise_seed)?;
    let mut rgba = Vec::with_capacity(size * size * 4);
    for (v, t) in scan.intensities.iter().zip(&map.labels) {
        let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let px = match (overlay, t) {
            (true, TissueId::Csf) => [g / 2, g / 2, g / 2 + 127],
            (true, TissueId::Gm) => [g / 2, g / 2 + 85, g / 2],
            (true, TissueId::Wm) => [g / 2 + 127, g / 2 + 110, g / 2],
            _ => [g, g, g],
        };
        rgba.extend_from_slice(&[px[0], px[1], px[2], 255]);
    }
    Ok(rgba)
}

/// Noise-free CSF/GM/WM signal as the flip angle sweeps 1..=`max_flip`
/// degrees; three interleaved series of `steps` values each.
pub fn flip_curves(b0: f64, tr_ms: f64, te_ms: f64, max_flip: f64, steps: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(3 * steps);
    for t in BRAIN_TISSUES {
        for i in 0..steps {
            let flip = 1.0 + (max_flip - 1.0) * i as f64 / (steps.max(2) - 1) as f64;
            out.push(signal(t, &protocol(b0, flip, tr_ms, te_ms, 0.0))?);
        }
    }
    Ok(out)
}

/// Margin explorer result: points are `[x, y, class, domain]` rows.
pub struct MarginView {
    pub points: Vec<f64>,
    pub pad_domain: f64,
    pub class_error: f64,
    pub collapse_ratio: f64,
}

pub fn margin_view(margin: f64, epochs: usize, seed: u64) -> Result<MarginView> {
    let mut cfg = ExperimentConfig::for_experiment(ExperimentId::Exp4);
    cfg.master_seed = seed;
    cfg.synthetic.epochs = epochs;
    cfg.synthetic.test_per_class = 40;
    let run = run_margin(&cfg, margin, 0)?;
    let mut points = Vec::with_capacity(run.embeddings.len() * 4);
    for ((e, c), d) in run.embeddings.iter().zip(&run.classes).zip(&run.domains) {
        points.extend_from_slice(&[e[0], e[1], *c as f64, f64::from(*d)]);
    }
    Ok(MarginView {
        points,
        pad_domain: run.row.pad_domain,
        class_error: run.row.class_error,
        collapse_ratio: run.row.collapse_ratio,
    })
}

#[wasm_bindgen(js_name = scanImage)]
#[allow(clippy::too_many_arguments)]
pub fn scan_image_js(
    subject: u32,
    size: usize,
    b0: f64,
    flip_deg: f64,
    tr_ms: f64,
    te_ms: f64,
    noise_sigma: f64,
    overlay: bool,
) -> std::result::Result<Vec<u8>, JsError> {
    scan_rgba(u64::from(subject), size, &protocol(b0, flip_deg, tr_ms, te_ms, noise_sigma), 7, overlay).map_err(js_err)
}

#[wasm_bindgen(js_name = flipCurves)]
pub fn flip_curves_js(b0: f64, tr_ms: f64, te_ms: f64, max_flip: f64, steps: usize) -> std::result::Result<Vec<f64>, JsError> {
    flip_curves(b0, tr_ms, te_ms, max_flip, steps).map_err(js_err)
}

#[wasm_bindgen(js_name = presetProtocol)]
pub fn preset_js(name: &str) -> Option<Vec<f64>> {
    AcquisitionProtocol::preset(name).map(|p| vec![p.b0, p.flip_deg, p.tr_ms, p.te_ms, p.noise_sigma])
}

/// `[pad_domain, class_error, collapse_ratio, x0, y0, class0, domain0, ...]`
#[wasm_bindgen(js_name = marginExplorer)]
pub fn margin_js(margin: f64, epochs: usize, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    let v = margin_view(margin, epochs, u64::from(seed)).map_err(js_err)?;
    let mut out = vec![v.pad_domain, v.class_error, v.collapse_ratio];
    out.extend(v.points);
    Ok(out)
}
