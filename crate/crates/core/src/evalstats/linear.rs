use rand::seq::SliceRandom;

use super::features::FeatureSet;
use crate::seeds;
use crate::{MraiError, Result};

const GRAD_TOL: f64 = 1e-6;
const MAX_ITER: usize = 10_000;
const DUAL_TOL: f64 = 1e-6;
const MAX_PASSES: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Hinge,
    Logistic,
}

/// One binary decision function `w . x + b` on standardized features.
#[derive(Debug, Clone, PartialEq)]
struct Binary {
    w: Vec<f64>,
    b: f64,
}

impl Binary {
    fn score(&self, x: &[f64]) -> f64 {
        self.b + self.w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>()
    }
}

/// Linear classifier: one decision function for two classes, one-vs-rest
/// otherwise. Inputs are standardized with training statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub loss: LossKind,
    pub l2: f64,
    /// Sorted class labels.
    pub classes: Vec<usize>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    units: Vec<Binary>,
    /// Mean cross-validated error per grid value, when fitted by CV.
    pub cv_errors: Vec<(f64, f64)>,
}

impl LinearModel {
    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    /// Decision values, one per class (two-class models return `[-s, s]`).
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let z = self.standardize(x);
        if self.units.len() == 1 {
            let s = self.units[0].score(&z);
            vec![-s, s]
        } else {
            self.units.iter().map(|u| u.score(&z)).collect()
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let s = self.scores(x);
        let mut best = 0;
        for (i, v) in s.iter().enumerate() {
            if *v > s[best] {
                best = i;
            }
        }
        self.classes[best]
    }

    pub fn weights(&self) -> Vec<Vec<f64>> {
        self.units.iter().map(|u| u.w.clone()).collect()
    }

    pub fn biases(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.b).collect()
    }
}

fn standardization(data: &FeatureSet) -> (Vec<f64>, Vec<f64>) {
    let n = data.len() as f64;
    let d = data.dim();
    let mut mean = vec![0.0; d];
    for v in &data.vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; d];
    for v in &data.vectors {
        for ((s, x), m) in var.iter_mut().zip(v).zip(&mean) {
            *s += (x - m) * (x - m);
        }
    }
    let scale = var.iter().map(|s| if *s > 0.0 { (s / n).sqrt() } else { 1.0 }).collect();
    (mean, scale)
}

/// `(1/n) sum loss(y (w.x + b)) + (l2/2) |w|^2`; the hinge variant also
/// regularizes `b`.
fn objective(loss: LossKind, x: &[Vec<f64>], y: &[f64], l2: f64, unit: &Binary) -> f64 {
    let n = x.len() as f64;
    let data: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let m = yi * unit.score(xi);
            match loss {
                LossKind::Hinge => (1.0 - m).max(0.0),
                LossKind::Logistic => softplus(-m),
            }
        })
        .sum::<f64>()
        / n;
    let mut reg = unit.w.iter().map(|w| w * w).sum::<f64>();
    if loss == LossKind::Hinge {
        reg += unit.b * unit.b;
    }
    data + 0.5 * l2 * reg
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Dual coordinate descent for the hinge loss with the bias as an extra
/// constant feature. Returns the best primal iterate seen.
fn fit_hinge(x: &[Vec<f64>], y: &[f64], l2: f64) -> Binary {
    let n = x.len();
    let d = x[0].len();
    let c = 1.0 / (l2 * n as f64);
    let q: Vec<f64> = x.iter().map(|xi| xi.iter().map(|v| v * v).sum::<f64>() + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut unit = Binary { w: vec![0.0; d], b: 0.0 };
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seeds::rng(0x5eed);
    let mut best = unit.clone();
    let mut best_f = objective(LossKind::Hinge, x, y, l2, &unit);
    for _ in 0..MAX_PASSES {
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let g = y[i] * unit.score(&x[i]) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / q[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * y[i];
                for (w, v) in unit.w.iter_mut().zip(&x[i]) {
                    *w += step * v;
                }
                unit.b += step;
            }
        }
        let f = objective(LossKind::Hinge, x, y, l2, &unit);
        if f < best_f {
            best_f = f;
            best = unit.clone();
        }
        if pg_max - pg_min <= DUAL_TOL {
            break;
        }
    }
    best
}

fn logistic_grad(x: &[Vec<f64>], y: &[f64], l2: f64, unit: &Binary) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut gw: Vec<f64> = unit.w.iter().map(|w| l2 * w).collect();
    let mut gb = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let coef = -yi * sigmoid(-yi * unit.score(xi)) / n;
        for (g, v) in gw.iter_mut().zip(xi) {
            *g += coef * v;
        }
        gb += coef;
    }
    (gw, gb)
}

/// Full-batch gradient descent with Barzilai-Borwein steps and Armijo
/// backtracking.
fn fit_logistic(x: &[Vec<f64>], y: &[f64], l2: f64) -> Binary {
    let d = x[0].len();
    let mut unit = Binary { w: vec![0.0; d], b: 0.0 };
    let mut f = objective(LossKind::Logistic, x, y, l2, &unit);
    let (mut gw, mut gb) = logistic_grad(x, y, l2, &unit);
    let mut step = 1.0;
    for _ in 0..MAX_ITER {
        let gnorm2 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        if gnorm2.sqrt() <= GRAD_TOL {
            break;
        }
        let mut t = step;
        let mut next;
        let mut f_next;
        loop {
            next = Binary {
                w: unit.w.iter().zip(&gw).map(|(w, g)| w - t * g).collect(),
                b: unit.b - t * gb,
            };
            f_next = objective(LossKind::Logistic, x, y, l2, &next);
            if f_next <= f - 1e-4 * t * gnorm2 || t < 1e-20 {
                break;
            }
            t *= 0.5;
        }
        if t < 1e-20 {
            break;
        }
        let (ngw, ngb) = logistic_grad(x, y, l2, &next);
        let mut sy = 0.0;
        let mut ss = 0.0;
        for i in 0..d {
            let s = next.w[i] - unit.w[i];
            sy += s * (ngw[i] - gw[i]);
            ss += s * s;
        }
        let s = next.b - unit.b;
        sy += s * (ngb - gb);
        ss += s * s;
        step = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { t * 2.0 };
        unit = next;
        f = f_next;
        gw = ngw;
        gb = ngb;
    }
    unit
}

/// Fit at one regularization strength.
pub fn fit_linear(data: &FeatureSet, loss: LossKind, l2: f64) -> Result<LinearModel> {
    if !(l2 > 0.0 && l2.is_finite()) {
        return Err(MraiError::InvalidArgument(format!("l2 strength {l2} must be > 0")));
    }
    let classes = data.classes();
    if classes.len() < 2 {
        return Err(MraiError::DegenerateLabels(format!("only class {:?} present", classes)));
    }
    let (mean, scale) = standardization(data);
    let x: Vec<Vec<f64>> = data
        .vectors
        .iter()
        .map(|v| v.iter().zip(&mean).zip(&scale).map(|((a, m), s)| (a - m) / s).collect())
        .collect();
    let positives: Vec<usize> = if classes.len() == 2 { vec![classes[1]] } else { classes.clone() };
    let mut units = Vec::with_capacity(positives.len());
    for pos in positives {
        let y: Vec<f64> = data.labels.iter().map(|&l| if l == pos { 1.0 } else { -1.0 }).collect();
        let unit = match loss {
            LossKind::Hinge => fit_hinge(&x, &y, l2),
            LossKind::Logistic => fit_logistic(&x, &y, l2),
        };
        let zero = Binary { w: vec![0.0; x[0].len()], b: 0.0 };
        let initial = objective(loss, &x, &y, l2, &zero);
        let final_objective = objective(loss, &x, &y, l2, &unit);
        if !(final_objective <= initial + 1e-12) {
            return Err(MraiError::NonDescent { initial, final_objective });
        }
        units.push(unit);
    }
    Ok(LinearModel {
        loss,
        l2,
        classes,
        mean,
        scale,
        units,
        cv_errors: Vec::new(),
    })
}

/// Misclassification fraction of `model` on `test`.
pub fn tissue_error(model: &LinearModel, test: &FeatureSet) -> f64 {
    let wrong = test
        .vectors
        .iter()
        .zip(&test.labels)
        .filter(|(x, y)| model.predict(x) != **y)
        .count();
    wrong as f64 / test.len() as f64
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::evalstats::LabelSemantics;
    use rand_distr::{Distribution, StandardNormal};

    pub(crate) fn blobs(n_per: usize, offset: f64, d: usize, seed: u64) -> FeatureSet {
        let mut rng = seeds::rng(seed);
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for (label, sign) in [(0usize, -1.0), (1, 1.0)] {
            for _ in 0..n_per {
                vectors.push(
                    (0..d)
                        .map(|_| sign * offset + Distribution::<f64>::sample(&StandardNormal, &mut rng))
                        .collect::<Vec<f64>>(),
                );
                labels.push(label);
            }
        }
        FeatureSet::new(vectors, labels, LabelSemantics::Domain).unwrap()
    }

    #[test]
    fn separable_blobs_fit_exactly() {
        let data = blobs(100, 5.0, 2, 1);
        // oracle: the midpoint hyperplane x0 + x1 = 0 separates every point
        assert!(data
            .vectors
            .iter()
            .zip(&data.labels)
            .all(|(v, l)| (v[0] + v[1] > 0.0) == (*l == 1)));
        for loss in [LossKind::Hinge, LossKind::Logistic] {
            let m = fit_linear(&data, loss, 1e-3).unwrap();
            assert_eq!(tissue_error(&m, &data), 0.0, "{loss:?}");
        }
    }

    #[test]
    fn logistic_reaches_stationarity() {
        let data = blobs(50, 0.5, 3, 2);
        let m = fit_linear(&data, LossKind::Logistic, 0.1).unwrap();
        let (mean, scale) = standardization(&data);
        let x: Vec<Vec<f64>> = data
            .vectors
            .iter()
            .map(|v| v.iter().zip(&mean).zip(&scale).map(|((a, m), s)| (a - m) / s).collect())
            .collect();
        let y: Vec<f64> = data.labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let (gw, gb) = logistic_grad(&x, &y, 0.1, &m.units[0]);
        let norm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        assert!(norm <= 1e-6, "gradient norm {norm}");
    }

    #[test]
    fn hinge_dual_matches_primal_subgradient_optimum() {
        // Compare against a slow projected-subgradient primal solver.
        let data = blobs(30, 0.7, 2, 3);
        let m = fit_linear(&data, LossKind::Hinge, 0.05).unwrap();
        let (mean, scale) = standardization(&data);
        let x: Vec<Vec<f64>> = data
            .vectors
            .iter()
            .map(|v| v.iter().zip(&mean).zip(&scale).map(|((a, m), s)| (a - m) / s).collect())
            .collect();
        let y: Vec<f64> = data.labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let dual = objective(LossKind::Hinge, &x, &y, 0.05, &m.units[0]);
        let mut u = Binary { w: vec![0.0; 2], b: 0.0 };
        let mut best = f64::INFINITY;
        for t in 1..200_000 {
            let n = x.len() as f64;
            let mut gw: Vec<f64> = u.w.iter().map(|w| 0.05 * w).collect();
            let mut gb = 0.05 * u.b;
            for (xi, yi) in x.iter().zip(&y) {
                if yi * u.score(xi) < 1.0 {
                    for (g, v) in gw.iter_mut().zip(xi) {
                        *g -= yi * v / n;
                    }
                    gb -= yi / n;
                }
            }
            let eta = 1.0 / (0.05 * t as f64);
            for (w, g) in u.w.iter_mut().zip(&gw) {
                *w -= eta * g;
            }
            u.b -= eta * gb;
            best = best.min(objective(LossKind::Hinge, &x, &y, 0.05, &u));
        }
        assert!(dual <= best + 1e-4, "dual {dual} vs primal {best}");
    }

    #[test]
    fn error_arithmetic() {
        let data = FeatureSet::new(
            (0..6).map(|i| vec![i as f64]).collect(),
            vec![0, 1, 2, 0, 1, 2],
            LabelSemantics::Tissue,
        )
        .unwrap();
        let m = fit_linear(&data, LossKind::Logistic, 1.0).unwrap();
        let err = tissue_error(&m, &data);
        assert!((0.0..=1.0).contains(&err));
        let mut constant = m.clone();
        for u in &mut constant.units {
            u.w.iter_mut().for_each(|w| *w = 0.0);
            u.b = 0.0;
        }
        constant.units[1].b = 1.0;
        assert!((tissue_error(&constant, &data) - 2.0 / 3.0).abs() < 1e-15);
        let all_ones = FeatureSet::new(vec![vec![0.0]; 3], vec![1; 3], LabelSemantics::Tissue).unwrap();
        assert_eq!(tissue_error(&constant, &all_ones), 0.0);
        let all_twos = FeatureSet::new(vec![vec![0.0]; 3], vec![2; 3], LabelSemantics::Tissue).unwrap();
        assert_eq!(tissue_error(&constant, &all_twos), 1.0);
    }

    #[test]
    fn single_class_rejected() {
        let data = FeatureSet::new(vec![vec![0.0], vec![1.0]], vec![1, 1], LabelSemantics::Tissue).unwrap();
        assert!(matches!(fit_linear(&data, LossKind::Hinge, 1.0), Err(MraiError::DegenerateLabels(_))));
    }
}
