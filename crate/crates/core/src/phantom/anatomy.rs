use std::f64::consts::TAU;

use rand::Rng as _;

use super::tissue::{TissueId, BRAIN_TISSUES};
use crate::seeds;
use crate::{MraiError, Result};

pub const MIN_PHANTOM_DIM: usize = 64;

/// A 2-D grid of tissue labels, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueLabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<TissueId>,
    pub subject_seed: u64,
    pub resolution_mm: f64,
}

impl TissueLabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<TissueId>, subject_seed: u64) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(MraiError::Shape(format!(
                "label grid of {} values does not match {width}x{height}",
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
            subject_seed,
            resolution_mm: 1.0,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> TissueId {
        self.labels[y * self.width + x]
    }

    /// Voxel counts per tissue ordinal.
    pub fn histogram(&self) -> [usize; 10] {
        let mut h = [0usize; 10];
        for t in &self.labels {
            h[t.ordinal() as usize] += 1;
        }
        h
    }

    pub fn brain_voxels(&self) -> usize {
        self.labels.iter().filter(|&&t| t != TissueId::Bkg).count()
    }

    /// Whether the non-background region is a single 4-connected component.
    pub fn brain_is_connected(&self) -> bool {
        let Some(start) = self.labels.iter().position(|&t| t != TissueId::Bkg) else {
            return true;
        };
        let mut seen = vec![false; self.labels.len()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut reached = 0usize;
        while let Some(i) = stack.pop() {
            reached += 1;
            let (x, y) = (i % self.width, i / self.width);
            let mut visit = |nx: usize, ny: usize| {
                let j = ny * self.width + nx;
                if !seen[j] && self.labels[j] != TissueId::Bkg {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(x - 1, y);
            }
            if x + 1 < self.width {
                visit(x + 1, y);
            }
            if y > 0 {
                visit(x, y - 1);
            }
            if y + 1 < self.height {
                visit(x, y + 1);
            }
        }
        reached == self.brain_voxels()
    }
}

struct Ellipse {
    cx: f64,
    cy: f64,
    ax: f64,
    ay: f64,
    cos: f64,
    sin: f64,
}

impl Ellipse {
    fn new(cx: f64, cy: f64, ax: f64, ay: f64, angle: f64) -> Self {
        Self {
            cx,
            cy,
            ax,
            ay,
            cos: angle.cos(),
            sin: angle.sin(),
        }
    }

    /// Normalized elliptical coordinates (u, v) of a point.
    fn local(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let rx = self.cos * dx + self.sin * dy;
        let ry = -self.sin * dx + self.cos * dy;
        (rx / self.ax, ry / self.ay)
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let (u, v) = self.local(x, y);
        u * u + v * v <= 1.0
    }
}

/// Low-order radial harmonic perturbation `1 + sum a_n cos(n phi + p_n)`.
struct Harmonics(Vec<(f64, f64, f64)>);

impl Harmonics {
    fn eval(&self, phi: f64) -> f64 {
        1.0 + self.0.iter().map(|&(n, a, p)| a * (n * phi + p).cos()).sum::<f64>()
    }
}

/// Generate a procedural axial brain slice.
///
/// The anatomy is a deformed ellipse: a CSF rim, a folded GM ribbon, a WM
/// core with two deep GM nuclei, and a pair of CSF ventricles. All shape
/// parameters are drawn from `subject_seed`.
pub fn generate_phantom(subject_seed: u64, width: usize, height: usize) -> Result<TissueLabelMap> {
    if width < MIN_PHANTOM_DIM || height < MIN_PHANTOM_DIM {
        return Err(MraiError::InvalidArgument(format!(
            "phantom must be at least {MIN_PHANTOM_DIM}x{MIN_PHANTOM_DIM}, got {width}x{height}"
        )));
    }
    let mut rng = seeds::rng(seeds::derive(subject_seed, "phantom", &[]));
    let (w, h) = (width as f64, height as f64);
    let scale = w.min(h);

    let brain = Ellipse::new(
        w / 2.0 + rng.random_range(-0.02..0.02) * w,
        h / 2.0 + rng.random_range(-0.02..0.02) * h,
        rng.random_range(0.34..0.40) * w,
        rng.random_range(0.39..0.44) * h,
        rng.random_range(-0.15..0.15),
    );
    let outline = Harmonics(
        (2..=5)
            .map(|n| {
                let n = n as f64;
                (n, rng.random_range(0.0..0.035) / (n - 1.0), rng.random_range(0.0..TAU))
            })
            .collect(),
    );
    let min_axis = brain.ax.min(brain.ay);
    let rim = (0.012 * scale + 1.5) / min_axis;
    let ribbon = (0.035 * scale + 1.0) / min_axis;
    let gyri = f64::from(rng.random_range(14u32..=20));
    let gyri_phase = rng.random_range(0.0..TAU);
    let fine = f64::from(rng.random_range(25u32..=33));
    let fine_phase = rng.random_range(0.0..TAU);

    let vent_dx = rng.random_range(0.035..0.05) * w;
    let vent_dy = rng.random_range(-0.04..0.0) * h;
    let vent_ax = rng.random_range(0.035..0.05) * w;
    let vent_ay = rng.random_range(0.10..0.15) * h;
    let vent_tilt = rng.random_range(0.15..0.35);
    let ventricles = [
        Ellipse::new(brain.cx - vent_dx, brain.cy + vent_dy, vent_ax, vent_ay, vent_tilt),
        Ellipse::new(brain.cx + vent_dx, brain.cy + vent_dy, vent_ax, vent_ay, -vent_tilt),
    ];
    let nuc_dx = rng.random_range(0.13..0.17) * w;
    let nuc_dy = rng.random_range(0.02..0.07) * h;
    let nuc_ax = rng.random_range(0.04..0.06) * w;
    let nuc_ay = rng.random_range(0.06..0.08) * h;
    let nuclei = [
        Ellipse::new(brain.cx - nuc_dx, brain.cy + nuc_dy, nuc_ax, nuc_ay, 0.2),
        Ellipse::new(brain.cx + nuc_dx, brain.cy + nuc_dy, nuc_ax, nuc_ay, -0.2),
    ];

    let mut labels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let (u, v) = brain.local(px, py);
            let phi = v.atan2(u);
            let rho = (u * u + v * v).sqrt() / outline.eval(phi);
            let label = if rho > 1.0 {
                TissueId::Bkg
            } else if rho > 1.0 - rim {
                TissueId::Csf
            } else {
                let fold = 1.0 + 0.45 * (gyri * phi + gyri_phase).sin() + 0.2 * (fine * phi + fine_phase).sin();
                let gm_inner = 1.0 - rim - ribbon * fold;
                let sulcus = (gyri * phi + gyri_phase).sin() < -0.92 && rho > 1.0 - rim - 0.5 * ribbon;
                if sulcus || ventricles.iter().any(|e| e.contains(px, py)) {
                    TissueId::Csf
                } else if rho > gm_inner || nuclei.iter().any(|e| e.contains(px, py)) {
                    TissueId::Gm
                } else {
                    TissueId::Wm
                }
            };
            labels.push(label);
        }
    }
    TissueLabelMap::new(width, height, labels, subject_seed)
}

/// Fraction of brain voxels belonging to each of CSF, GM and WM.
pub fn brain_tissue_fractions(map: &TissueLabelMap) -> [f64; 3] {
    let hist = map.histogram();
    let brain = map.brain_voxels().max(1) as f64;
    BRAIN_TISSUES.map(|t| hist[t.ordinal() as usize] as f64 / brain)
}
