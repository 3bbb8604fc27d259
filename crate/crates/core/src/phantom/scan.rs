use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};

use super::anatomy::TissueLabelMap;
use super::protocol::AcquisitionProtocol;
use super::tissue::TissueId;
use crate::seeds;
use crate::{MraiError, Result};

/// 0 for the source scanner, 1 for the target scanner.
pub type ScannerId = u8;

/// Steady-state spoiled gradient-echo signal of a tissue:
///
/// `S = rho * sin(theta) * (1 - E1) / (1 - cos(theta) * E1) * exp(-TE / T2)`,
/// with `E1 = exp(-TR / T1)` and (T1, T2) taken at the protocol's B0.
/// Background has no protons and yields 0.
pub fn signal(tissue: TissueId, protocol: &AcquisitionProtocol) -> Result<f64> {
    let Some(entry) = tissue.relaxation() else {
        return Ok(0.0);
    };
    let (t1, t2) = entry
        .times_at(protocol.b0)
        .ok_or(MraiError::UnsupportedField(protocol.b0))?;
    if entry.proton_density == 0.0 {
        return Ok(0.0);
    }
    let theta = protocol.flip_deg.to_radians();
    let e1 = (-protocol.tr_ms / t1).exp();
    let steady = theta.sin() * (1.0 - e1) / (1.0 - theta.cos() * e1);
    Ok(entry.proton_density * steady * (-protocol.te_ms / t2).exp())
}

/// A simulated magnitude image.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, finite and non-negative.
    pub intensities: Vec<f64>,
    pub protocol: AcquisitionProtocol,
    pub labels: Arc<TissueLabelMap>,
    pub scanner_id: ScannerId,
    /// Factor applied to raw magnitudes so the in-brain 99th percentile is 1.
    pub scale: f64,
}

impl ScanImage {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.intensities[y * self.width + x]
    }

    /// Wrap externally produced intensities (e.g. loaded from disk).
    pub fn from_parts(
        intensities: Vec<f64>,
        labels: Arc<TissueLabelMap>,
        protocol: AcquisitionProtocol,
        scanner_id: ScannerId,
    ) -> Result<Self> {
        if intensities.len() != labels.width * labels.height {
            return Err(MraiError::Shape(format!(
                "{} intensities for a {}x{} label map",
                intensities.len(),
                labels.width,
                labels.height
            )));
        }
        if intensities.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MraiError::InvalidArgument("scan intensities must be finite and >= 0".into()));
        }
        Ok(Self {
            width: labels.width,
            height: labels.height,
            intensities,
            protocol,
            labels,
            scanner_id,
            scale: 1.0,
        })
    }

    /// Mean intensity over voxels of one tissue, if any.
    pub fn tissue_mean(&self, tissue: TissueId) -> Option<f64> {
        let (sum, n) = self
            .labels
            .labels
            .iter()
            .zip(&self.intensities)
            .filter(|(t, _)| **t == tissue)
            .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

/// Simulate a magnitude scan of `map`.
///
/// Each voxel is `|S(label) + n_re + i n_im|` with independent Gaussian
/// channels of standard deviation `noise_sigma * S(WM)`; the result is then
/// scaled so the 99th percentile (nearest rank) of in-brain voxels is 1.
pub fn simulate_scan(
    map: &Arc<TissueLabelMap>,
    protocol: &AcquisitionProtocol,
    scanner_id: ScannerId,
    noise_seed: u64,
) -> Result<ScanImage> {
    protocol.validate()?;
    if scanner_id > 1 {
        return Err(MraiError::InvalidArgument(format!("scanner id {scanner_id} not in {{0, 1}}")));
    }
    let mut table = [0.0f64; 10];
    for t in TissueId::ALL {
        table[t.ordinal() as usize] = signal(t, protocol)?;
    }
    let sigma = protocol.noise_sigma * table[TissueId::Wm.ordinal() as usize];
    let mut rng = seeds::rng(noise_seed);
    let mut intensities: Vec<f64> = map
        .labels
        .iter()
        .map(|t| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let s = table[t.ordinal() as usize];
            (s + sigma * re).hypot(sigma * im)
        })
        .collect();

    let mut brain: Vec<f64> = map
        .labels
        .iter()
        .zip(&intensities)
        .filter(|(t, _)| **t != TissueId::Bkg)
        .map(|(_, v)| *v)
        .collect();
    let mut scale = 1.0;
    if !brain.is_empty() {
        brain.sort_by(f64::total_cmp);
        let rank = ((0.99 * brain.len() as f64).ceil() as usize).clamp(1, brain.len());
        let p99 = brain[rank - 1];
        if p99 > 0.0 {
            scale = 1.0 / p99;
        }
    }
    for v in &mut intensities {
        *v *= scale;
    }
    Ok(ScanImage {
        width: map.width,
        height: map.height,
        intensities,
        protocol: protocol.clone(),
        labels: Arc::clone(map),
        scanner_id,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{generate_phantom, BRAIN_TISSUES};
    use approx::assert_relative_eq;

    /// Independent scalar evaluation of the closed form, written out longhand.
    fn oracle(rho: f64, t1: f64, t2: f64, flip_deg: f64, tr: f64, te: f64) -> f64 {
        let th = flip_deg * std::f64::consts::PI / 180.0;
        let e1 = f64::exp(-tr / t1);
        let num = rho * f64::sin(th) * (1.0 - e1);
        let den = 1.0 - f64::cos(th) * e1;
        num / den * f64::exp(-te / t2)
    }

    #[test]
    fn signal_point_values() {
        let p15 = AcquisitionProtocol::brainweb_1_5t();
        let p30 = AcquisitionProtocol::brainweb_3_0t();
        assert_eq!(signal(TissueId::Skull, &p15).unwrap(), 0.0);
        assert_eq!(signal(TissueId::Skull, &p30).unwrap(), 0.0);
        let csf = signal(TissueId::Csf, &p15).unwrap();
        assert_relative_eq!(csf, oracle(100.0, 4326.0, 791.0, 20.0, 13.8, 2.8), max_relative = 1e-12);
        assert!((csf - 1.7147).abs() < 1e-4, "{csf}");
        let gm = signal(TissueId::Gm, &p30).unwrap();
        // theta = 90 deg: S = rho (1 - E1) exp(-TE/T2)
        let simple = 86.0 * (1.0 - (-7.9f64 / 1820.0).exp()) * (-4.5f64 / 99.0).exp();
        assert_relative_eq!(gm, simple, max_relative = 1e-12);
        assert!((gm - 0.3559).abs() < 1e-4, "{gm}");
    }

    #[test]
    fn unsupported_field() {
        let mut p = AcquisitionProtocol::brainweb_1_5t();
        p.b0 = 7.0;
        assert!(matches!(signal(TissueId::Gm, &p), Err(MraiError::UnsupportedField(_))));
        assert_eq!(signal(TissueId::Bkg, &p).unwrap(), 0.0);
    }

    #[test]
    fn signal_bounded_by_proton_density() {
        for p in AcquisitionProtocol::presets() {
            for t in TissueId::ALL.iter().skip(1) {
                let rho = t.relaxation().unwrap().proton_density;
                let s = signal(*t, &p).unwrap();
                if rho > 0.0 {
                    assert!(s > 0.0 && s <= rho, "{t} {}: {s}", p.name);
                }
            }
        }
    }

    #[test]
    fn noiseless_scan_is_piecewise_constant() {
        let map = Arc::new(generate_phantom(3, 128, 128).unwrap());
        let p = AcquisitionProtocol::brainweb_1_5t().with_noise(0.0);
        let scan = simulate_scan(&map, &p, 0, 11).unwrap();
        for t in BRAIN_TISSUES {
            let vals: Vec<f64> = map
                .labels
                .iter()
                .zip(&scan.intensities)
                .filter(|(l, _)| **l == t)
                .map(|(_, v)| *v)
                .collect();
            assert!(vals.windows(2).all(|w| w[0] == w[1]), "{t}");
        }
        // noise-floor background is exactly zero without noise
        assert!(map
            .labels
            .iter()
            .zip(&scan.intensities)
            .all(|(l, v)| *l != TissueId::Bkg || *v == 0.0));
        // WM is the brightest tissue, so it sits at the 99th percentile
        assert_relative_eq!(scan.tissue_mean(TissueId::Wm).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn scan_deterministic_per_seed() {
        let map = Arc::new(generate_phantom(3, 96, 96).unwrap());
        let p = AcquisitionProtocol::brainweb_3_0t();
        let a = simulate_scan(&map, &p, 1, 5).unwrap();
        let b = simulate_scan(&map, &p, 1, 5).unwrap();
        assert_eq!(a.intensities, b.intensities);
        let c = simulate_scan(&map, &p, 1, 6).unwrap();
        assert_ne!(a.intensities, c.intensities);
        assert!(a.intensities.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn all_background_scan_is_unscaled() {
        let map = Arc::new(TissueLabelMap::new(8, 8, vec![TissueId::Bkg; 64], 0).unwrap());
        let scan = simulate_scan(&map, &AcquisitionProtocol::brainweb_1_5t(), 0, 1).unwrap();
        assert_eq!(scan.scale, 1.0);
    }

    /// Oracle: mean and std of |A + n1 + i n2| by midpoint quadrature over
    /// the two Gaussian channels.
    fn rician_moments(a: f64, sigma: f64) -> (f64, f64) {
        let steps = 801;
        let h = 16.0 / steps as f64;
        let w: Vec<f64> = (0..steps)
            .map(|i| {
                let z = -8.0 + (i as f64 + 0.5) * h;
                (-0.5 * z * z).exp() * h / (2.0 * std::f64::consts::PI).sqrt()
            })
            .collect();
        let (mut m1, mut m2) = (0.0, 0.0);
        for i in 0..steps {
            let x = a + sigma * (-8.0 + (i as f64 + 0.5) * h);
            for j in 0..steps {
                let y = sigma * (-8.0 + (j as f64 + 0.5) * h);
                let m = (x * x + y * y).sqrt();
                m1 += w[i] * w[j] * m;
                m2 += w[i] * w[j] * m * m;
            }
        }
        (m1, (m2 - m1 * m1).sqrt())
    }

    #[test]
    fn rician_spread_matches_prediction() {
        let map = Arc::new(TissueLabelMap::new(128, 128, vec![TissueId::Wm; 128 * 128], 0).unwrap());
        for noise in [0.05, 0.5, 1.0] {
            let p = AcquisitionProtocol::brainweb_1_5t().with_noise(noise);
            let a = signal(TissueId::Wm, &p).unwrap();
            let scan = simulate_scan(&map, &p, 0, 21).unwrap();
            let raw: Vec<f64> = scan.intensities.iter().map(|v| v / scan.scale).collect();
            let n = raw.len() as f64;
            let mean = raw.iter().sum::<f64>() / n;
            let std = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let (pm, ps) = rician_moments(a, noise * a);
            assert!((std / ps - 1.0).abs() < 0.3, "noise {noise}: std {std} vs {ps}");
            assert!((mean / pm - 1.0).abs() < 0.05, "noise {noise}: mean {mean} vs {pm}");
        }
    }
}
