use rand::Rng as _;
use rand_distr::{Distribution, Uniform};

use super::config::{Layout, NetConfig, CONV_SIDE, KERNEL, POOL_SIDE};
use crate::sampling::{Patch, PATCH_SIZE};
use crate::seeds::{self, Rng};
use crate::{MraiError, Result};

/// Forward-pass mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Infer,
    /// Dropout active, masks drawn from this seed.
    Train(u64),
}

/// Shared-weight embedding network. One parameter vector serves both arms.
#[derive(Debug, Clone, PartialEq)]
pub struct SiameseModel {
    pub config: NetConfig,
    pub params: Vec<f64>,
    layout: Layout,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub(crate) struct Trace {
    conv: Vec<f64>,
    pool_arg: Vec<u32>,
    flat: Vec<f64>,
    z1: Vec<f64>,
    mask1: Vec<f64>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    mask2: Vec<f64>,
    h2: Vec<f64>,
    pub(crate) out: Vec<f64>,
}

fn finite(values: &[f64], layer: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(MraiError::NumericOverflow { layer })
    }
}

fn dense(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(o, bias)| bias + w[o * n_in..(o + 1) * n_in].iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
        .collect()
}

fn dropout_mask(n: usize, rate: f64, rng: Option<&mut Rng>) -> Vec<f64> {
    match rng {
        Some(rng) if rate > 0.0 => {
            let keep = 1.0 / (1.0 - rate);
            (0..n).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect()
        }
        _ => vec![1.0; n],
    }
}

impl SiameseModel {
    /// All-zero parameters.
    pub fn zeros(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        Ok(Self {
            params: vec![0.0; layout.total],
            config,
            layout,
        })
    }

    /// Uniform fan-based initialization of weights, zero biases.
    pub fn init(config: NetConfig, init_seed: u64) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let mut rng = seeds::rng(init_seed);
        let conv_fan_out = model.layout.conv_b.len() * KERNEL * KERNEL;
        let c = &model.config;
        let specs = [
            (model.layout.conv_w.clone(), KERNEL * KERNEL, conv_fan_out),
            (model.layout.d1_w.clone(), c.flat_len(), c.dense1),
            (model.layout.d2_w.clone(), c.dense1, c.dense2),
            (model.layout.out_w.clone(), c.dense2, c.embed_dim),
        ];
        for (range, fan_in, fan_out) in specs {
            if range.is_empty() {
                continue;
            }
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            for p in &mut model.params[range] {
                *p = dist.sample(&mut rng);
            }
        }
        Ok(model)
    }

    /// Rebuild from a parameter vector, checking its length.
    pub fn from_params(config: NetConfig, params: Vec<f64>) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        if params.len() != model.params.len() {
            return Err(MraiError::Shape(format!(
                "{} parameters supplied, configuration needs {}",
                params.len(),
                model.params.len()
            )));
        }
        model.params = params;
        Ok(model)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Sum of squared weights (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.layout
            .weight_ranges()
            .into_iter()
            .map(|r| self.params[r].iter().map(|w| w * w).sum::<f64>())
            .sum()
    }

    pub fn forward(&self, input: &[f64], mode: Mode) -> Result<Vec<f64>> {
        let mut rng = match mode {
            Mode::Infer => None,
            Mode::Train(seed) => Some(seeds::rng(seed)),
        };
        Ok(self.trace(input, rng.as_mut())?.out)
    }

    pub fn embed(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward(input, Mode::Infer)
    }

    pub fn forward_patch(&self, patch: &Patch, mode: Mode) -> Result<Vec<f64>> {
        if self.config.vector_input.is_some() {
            return Err(MraiError::Shape("vector-input model cannot embed patches".into()));
        }
        self.forward(&patch.input_vector(), mode)
    }

    pub(crate) fn trace(&self, input: &[f64], mut dropout: Option<&mut Rng>) -> Result<Trace> {
        let c = &self.config;
        if input.len() != c.input_len() {
            return Err(MraiError::Shape(format!(
                "input of length {} where the model expects {}",
                input.len(),
                c.input_len()
            )));
        }
        let p = &self.params;
        let l = &self.layout;
        let mut t = Trace::default();
        if c.vector_input.is_some() {
            t.flat = input.to_vec();
        } else {
            let k = c.conv_kernels;
            let plane = CONV_SIDE * CONV_SIDE;
            t.conv = vec![0.0; k * plane];
            for ch in 0..k {
                let w = &p[l.conv_w.start + ch * KERNEL * KERNEL..][..KERNEL * KERNEL];
                let bias = p[l.conv_b.start + ch];
                for i in 0..CONV_SIDE {
                    for j in 0..CONV_SIDE {
                        let mut z = bias;
                        for u in 0..KERNEL {
                            let row = (i + u) * PATCH_SIZE + j;
                            for v in 0..KERNEL {
                                z += w[u * KERNEL + v] * input[row + v];
                            }
                        }
                        t.conv[ch * plane + i * CONV_SIDE + j] = z.max(0.0);
                    }
                }
            }
            finite(&t.conv, "conv")?;
            let pooled = POOL_SIDE * POOL_SIDE;
            t.flat = Vec::with_capacity(k * pooled + 1);
            t.pool_arg = Vec::with_capacity(k * pooled);
            for ch in 0..k {
                for pi in 0..POOL_SIDE {
                    for pj in 0..POOL_SIDE {
                        let mut best = ch * plane + 2 * pi * CONV_SIDE + 2 * pj;
                        for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                            let idx = ch * plane + (2 * pi + di) * CONV_SIDE + 2 * pj + dj;
                            if t.conv[idx] > t.conv[best] {
                                best = idx;
                            }
                        }
                        t.flat.push(t.conv[best]);
                        t.pool_arg.push(best as u32);
                    }
                }
            }
            t.flat.push(input[input.len() - 1]);
        }

        t.z1 = dense(&p[l.d1_w.clone()], &p[l.d1_b.clone()], &t.flat);
        finite(&t.z1, "dense1")?;
        t.mask1 = dropout_mask(c.dense1, c.dropout_rate, dropout.as_deref_mut());
        t.h1 = t.z1.iter().zip(&t.mask1).map(|(z, m)| z.max(0.0) * m).collect();

        t.z2 = dense(&p[l.d2_w.clone()], &p[l.d2_b.clone()], &t.h1);
        finite(&t.z2, "dense2")?;
        t.mask2 = dropout_mask(c.dense2, c.dropout_rate, dropout.as_deref_mut());
        t.h2 = t.z2.iter().zip(&t.mask2).map(|(z, m)| z.max(0.0) * m).collect();

        t.out = dense(&p[l.out_w.clone()], &p[l.out_b.clone()], &t.h2);
        finite(&t.out, "embed")?;
        Ok(t)
    }

    /// Accumulate into `grad` the gradient of a scalar whose derivative with
    /// respect to this trace's output is `d_out`. Excludes the L2 term.
    pub(crate) fn backprop(&self, input: &[f64], t: &Trace, d_out: &[f64], grad: &mut [f64]) {
        let c = &self.config;
        let p = &self.params;
        let l = &self.layout;

        let mut dh2 = vec![0.0; c.dense2];
        for (o, &g) in d_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad[l.out_b.start + o] += g;
            let row = l.out_w.start + o * c.dense2;
            for j in 0..c.dense2 {
                grad[row + j] += g * t.h2[j];
                dh2[j] += p[row + j] * g;
            }
        }

        let dz2: Vec<f64> = (0..c.dense2)
            .map(|j| if t.z2[j] > 0.0 { dh2[j] * t.mask2[j] } else { 0.0 })
            .collect();
        let mut dh1 = vec![0.0; c.dense1];
        for (o, &g) in dz2.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad[l.d2_b.start + o] += g;
            let row = l.d2_w.start + o * c.dense1;
            for j in 0..c.dense1 {
                grad[row + j] += g * t.h1[j];
                dh1[j] += p[row + j] * g;
            }
        }

        let dz1: Vec<f64> = (0..c.dense1)
            .map(|j| if t.z1[j] > 0.0 { dh1[j] * t.mask1[j] } else { 0.0 })
            .collect();
        let n_flat = t.flat.len();
        let conv_inputs = if c.vector_input.is_some() { 0 } else { n_flat - 1 };
        let mut dflat = vec![0.0; conv_inputs];
        for (o, &g) in dz1.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad[l.d1_b.start + o] += g;
            let row = l.d1_w.start + o * n_flat;
            for j in 0..n_flat {
                grad[row + j] += g * t.flat[j];
            }
            for j in 0..conv_inputs {
                dflat[j] += p[row + j] * g;
            }
        }
        if conv_inputs == 0 {
            return;
        }

        let plane = CONV_SIDE * CONV_SIDE;
        let mut dconv = vec![0.0; t.conv.len()];
        for (g, &arg) in dflat.iter().zip(&t.pool_arg) {
            dconv[arg as usize] += g;
        }
        for ch in 0..c.conv_kernels {
            let wbase = l.conv_w.start + ch * KERNEL * KERNEL;
            let mut gb = 0.0;
            let mut gw = [0.0; KERNEL * KERNEL];
            for i in 0..CONV_SIDE {
                for j in 0..CONV_SIDE {
                    let idx = ch * plane + i * CONV_SIDE + j;
                    let g = dconv[idx];
                    if g == 0.0 || t.conv[idx] <= 0.0 {
                        continue;
                    }
                    gb += g;
                    for u in 0..KERNEL {
                        let row = (i + u) * PATCH_SIZE + j;
                        for v in 0..KERNEL {
                            gw[u * KERNEL + v] += g * input[row + v];
                        }
                    }
                }
            }
            grad[l.conv_b.start + ch] += gb;
            for (q, g) in gw.iter().enumerate() {
                grad[wbase + q] += g;
            }
        }
    }

    /// Add `2 λ w` for every weight; returns `λ Σ w²`.
    pub(crate) fn add_l2(&self, grad: &mut [f64]) -> f64 {
        let lambda = self.config.l2_lambda;
        if lambda == 0.0 {
            return 0.0;
        }
        for r in self.layout.weight_ranges() {
            for i in r {
                grad[i] += 2.0 * lambda * self.params[i];
            }
        }
        lambda * self.weight_norm_sq()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(seed: u64, scanner: f64) -> Vec<f64> {
        let mut rng = seeds::rng(seed);
        let mut v: Vec<f64> = (0..225).map(|_| rng.random::<f64>()).collect();
        v.push(scanner);
        v
    }

    #[test]
    fn zero_dropout_train_equals_infer() {
        let model = SiameseModel::init(NetConfig { dropout_rate: 0.0, ..NetConfig::default() }, 1).unwrap();
        let x = input(2, 0.0);
        assert_eq!(model.forward(&x, Mode::Train(9)).unwrap(), model.forward(&x, Mode::Infer).unwrap());
        let dropped = SiameseModel::init(NetConfig::default(), 1).unwrap();
        let a = dropped.forward(&x, Mode::Train(9)).unwrap();
        assert_eq!(a, dropped.forward(&x, Mode::Train(9)).unwrap());
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn scanner_id_is_a_feature() {
        let mut model = SiameseModel::init(NetConfig::default(), 3).unwrap();
        let l = model.layout().clone();
        for b in l.d1_b.clone().chain(l.d2_b.clone()) {
            model.params[b] = 0.1;
        }
        let a = model.embed(&input(4, 0.0)).unwrap();
        let b = model.embed(&input(4, 1.0)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn init_respects_fan_limits() {
        let model = SiameseModel::init(NetConfig::default(), 11).unwrap();
        let l = model.layout();
        let c = &model.config;
        for (range, fan_in, fan_out) in [
            (l.conv_w.clone(), 9, 72),
            (l.d1_w.clone(), 289, c.dense1),
            (l.d2_w.clone(), c.dense1, c.dense2),
            (l.out_w.clone(), c.dense2, c.embed_dim),
        ] {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = &model.params[range];
            assert!(w.iter().all(|v| v.abs() <= limit));
            assert!(w.iter().any(|v| v.abs() > 0.5 * limit));
        }
        for r in [&l.conv_b, &l.d1_b, &l.d2_b, &l.out_b] {
            assert!(model.params[r.clone()].iter().all(|b| *b == 0.0));
        }
        assert_eq!(model.param_count(), 4874);
    }

    #[test]
    fn shape_and_overflow_errors() {
        let model = SiameseModel::init(NetConfig::default(), 1).unwrap();
        assert!(matches!(model.embed(&[0.0; 10]), Err(MraiError::Shape(_))));
        let mut x = input(1, 0.0);
        x[0] = f64::INFINITY;
        let mut hot = model.clone();
        for w in &mut hot.params[hot.layout.conv_w.clone()] {
            *w = 1.0;
        }
        assert!(matches!(hot.embed(&x), Err(MraiError::NumericOverflow { layer: "conv" })));
    }
}
