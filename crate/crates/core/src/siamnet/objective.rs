use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::loss::{lp_distance_grad, siamese_loss, siamese_loss_dd, softmax_xent};
use super::net::SiameseModel;
use crate::sampling::PatchPair;
use crate::seeds;
use crate::{MraiError, Result};

const CHUNK: usize = 8;

/// Run `item` over `0..n` in fixed chunks and reduce chunk results in index
/// order, so the sum is identical with or without threads.
fn chunked<F>(n: usize, n_params: usize, item: F) -> Result<(f64, Vec<f64>)>
where
    F: Fn(usize, &mut [f64]) -> Result<f64> + Sync,
{
    let ranges: Vec<Range<usize>> = (0..n.div_ceil(CHUNK)).map(|c| c * CHUNK..((c + 1) * CHUNK).min(n)).collect();
    let run = |r: Range<usize>| -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; n_params];
        let mut loss = 0.0;
        for i in r {
            loss += item(i, &mut grad)?;
        }
        Ok((loss, grad))
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<(f64, Vec<f64>)>> = ranges.into_par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<(f64, Vec<f64>)>> = ranges.into_iter().map(run).collect();

    let mut loss = 0.0;
    let mut grad = vec![0.0; n_params];
    for part in parts {
        let (l, g) = part?;
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok((loss, grad))
}

fn arm_rng(dropout_seed: Option<u64>, item: usize, arm: u64) -> Option<seeds::Rng> {
    dropout_seed.map(|s| seeds::rng(seeds::derive(s, "dropout", &[item as u64, arm])))
}

/// Batch Siamese loss (sum over pairs plus the L2 term) and its exact
/// gradient. Both arms run through the same parameters and their gradient
/// contributions are summed. `dropout_seed = None` disables dropout.
pub fn pair_loss_grad(
    model: &SiameseModel,
    inputs: &[Vec<f64>],
    pairs: &[PatchPair],
    dropout_seed: Option<u64>,
) -> Result<(f64, Vec<f64>)> {
    if pairs.is_empty() {
        return Err(MraiError::InvalidArgument("empty batch".into()));
    }
    let (margin, p) = (model.config.margin, model.config.norm_p);
    let (loss, mut grad) = chunked(pairs.len(), model.param_count(), |i, grad| {
        let pair = &pairs[i];
        let (xa, xb) = (&inputs[pair.a], &inputs[pair.b]);
        let ta = model.trace(xa, arm_rng(dropout_seed, i, 0).as_mut())?;
        let tb = model.trace(xb, arm_rng(dropout_seed, i, 1).as_mut())?;
        let (d, g) = lp_distance_grad(&ta.out, &tb.out, p)?;
        let dl = siamese_loss_dd(d, pair.y, margin);
        if dl != 0.0 {
            let da: Vec<f64> = g.iter().map(|v| v * dl).collect();
            let db: Vec<f64> = da.iter().map(|v| -v).collect();
            model.backprop(xa, &ta, &da, grad);
            model.backprop(xb, &tb, &db, grad);
        }
        Ok(siamese_loss(d, pair.y, margin))
    })?;
    Ok((loss + model.add_l2(&mut grad), grad))
}

/// Batch Siamese loss only.
pub fn pair_loss(model: &SiameseModel, inputs: &[Vec<f64>], pairs: &[PatchPair]) -> Result<f64> {
    let mut total = 0.0;
    for pair in pairs {
        let a = model.embed(&inputs[pair.a])?;
        let b = model.embed(&inputs[pair.b])?;
        let d = super::loss::lp_distance(&a, &b, model.config.norm_p)?;
        total += siamese_loss(d, pair.y, model.config.margin);
    }
    Ok(total + model.config.l2_lambda * model.weight_norm_sq())
}

/// Summed softmax cross-entropy over `(input index, class)` samples plus the
/// L2 term, with its gradient. The output layer width is the class count.
pub fn class_loss_grad(
    model: &SiameseModel,
    inputs: &[Vec<f64>],
    samples: &[(usize, usize)],
    dropout_seed: Option<u64>,
) -> Result<(f64, Vec<f64>)> {
    if samples.is_empty() {
        return Err(MraiError::InvalidArgument("empty batch".into()));
    }
    let classes = model.config.embed_dim;
    let (loss, mut grad) = chunked(samples.len(), model.param_count(), |i, grad| {
        let (idx, class) = samples[i];
        if class >= classes {
            return Err(MraiError::InvalidArgument(format!("class {class} >= output width {classes}")));
        }
        let t = model.trace(&inputs[idx], arm_rng(dropout_seed, i, 0).as_mut())?;
        let (l, g) = softmax_xent(&t.out, class);
        model.backprop(&inputs[idx], &t, &g, grad);
        Ok(l)
    })?;
    Ok((loss + model.add_l2(&mut grad), grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::PairKind;
    use crate::siamnet::NetConfig;
    use rand::Rng;

    fn random_inputs(n: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeds::rng(seed);
        (0..n)
            .map(|i| {
                let mut v: Vec<f64> = (0..len - 1).map(|_| rng.random::<f64>()).collect();
                v.push((i % 2) as f64);
                v
            })
            .collect()
    }

    fn pair(a: usize, b: usize, y: u8) -> PatchPair {
        PatchPair {
            a,
            b,
            y,
            kind: if y == 1 { PairKind::SsSame } else { PairKind::SsDiff },
        }
    }

    /// Relative error of the analytic gradient against central differences.
    fn check_gradient(model: &SiameseModel, loss: impl Fn(&SiameseModel) -> f64, analytic: &[f64]) -> f64 {
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..model.param_count() {
            let mut hi = model.clone();
            let mut lo = model.clone();
            hi.params[i] += h;
            lo.params[i] -= h;
            let fd = (loss(&hi) - loss(&lo)) / (2.0 * h);
            let a = analytic[i];
            let scale = a.abs().max(fd.abs());
            if scale > 1e-9 {
                if (a - fd).abs() / scale > 1e-4 {
                    eprintln!("param {i}: analytic {a} numeric {fd}");
                }
                worst = worst.max((a - fd).abs() / scale);
            }
        }
        worst
    }

    #[test]
    fn finite_difference_patch_model() {
        let config = NetConfig {
            dropout_rate: 0.0,
            margin: 3.0,
            ..NetConfig::sized(2, 4, 4, 2)
        };
        let mut model = SiameseModel::init(config, 3).unwrap();
        // nonzero biases keep pre-activations off the ReLU kink at 0
        let l = model.layout().clone();
        for (n, b) in l.conv_b.chain(l.d1_b).chain(l.d2_b).chain(l.out_b).enumerate() {
            model.params[b] = 0.05 + 0.01 * n as f64;
        }
        let inputs = random_inputs(8, 226, 9);
        let pairs = vec![pair(0, 1, 1), pair(2, 3, 0), pair(4, 5, 1), pair(6, 7, 0), pair(1, 6, 0), pair(3, 5, 1)];
        let (_, grad) = pair_loss_grad(&model, &inputs, &pairs, None).unwrap();
        assert!(grad.iter().any(|g| *g != 0.0));
        let err = check_gradient(&model, |m| pair_loss(m, &inputs, &pairs).unwrap(), &grad);
        assert!(err <= 1e-4, "relative error {err}");
    }

    #[test]
    fn finite_difference_vector_and_classifier() {
        let config = NetConfig {
            dropout_rate: 0.0,
            norm_p: 2,
            ..NetConfig::vector(2, 5, 4, 3)
        };
        let model = SiameseModel::init(config, 4).unwrap();
        let inputs = random_inputs(6, 3, 2);
        let pairs = vec![pair(0, 1, 1), pair(2, 3, 0), pair(4, 5, 0)];
        let (_, grad) = pair_loss_grad(&model, &inputs, &pairs, None).unwrap();
        let err = check_gradient(&model, |m| pair_loss(m, &inputs, &pairs).unwrap(), &grad);
        assert!(err <= 1e-4, "relative error {err}");

        let samples = vec![(0, 0), (1, 2), (2, 1), (3, 1)];
        let (_, grad) = class_loss_grad(&model, &inputs, &samples, None).unwrap();
        let err = check_gradient(
            &model,
            |m| class_loss_grad(m, &inputs, &samples, None).unwrap().0,
            &grad,
        );
        assert!(err <= 1e-4, "relative error {err}");
    }

    #[test]
    fn duplicated_batch_doubles_gradient() {
        let model = SiameseModel::init(NetConfig { l2_lambda: 0.0, ..NetConfig::sized(2, 4, 4, 2) }, 1).unwrap();
        let inputs = random_inputs(4, 226, 1);
        let pairs = vec![pair(0, 1, 1), pair(2, 3, 0), pair(0, 3, 0)];
        let doubled: Vec<PatchPair> = pairs.iter().chain(&pairs).copied().collect();
        let (l1, g1) = pair_loss_grad(&model, &inputs, &pairs, None).unwrap();
        let (l2, g2) = pair_loss_grad(&model, &inputs, &doubled, None).unwrap();
        assert!((l2 - 2.0 * l1).abs() <= 1e-12 * l1.abs());
        for (a, b) in g1.iter().zip(&g2) {
            assert!((b - 2.0 * a).abs() <= 1e-12 * a.abs().max(1e-300), "{b} vs 2 x {a}");
        }
    }

    #[test]
    fn flat_region_has_zero_gradient() {
        let config = NetConfig {
            l2_lambda: 0.0,
            margin: 0.0,
            ..NetConfig::sized(2, 4, 4, 2)
        };
        let model = SiameseModel::init(config, 2).unwrap();
        let inputs = random_inputs(4, 226, 3);
        let pairs = vec![pair(0, 1, 0), pair(2, 3, 0)];
        let (loss, grad) = pair_loss_grad(&model, &inputs, &pairs, Some(1)).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn pair_order_symmetry() {
        let model = SiameseModel::init(NetConfig::default(), 5).unwrap();
        let inputs = random_inputs(10, 226, 4);
        for y in 0..2 {
            let fwd: Vec<PatchPair> = (0..5).map(|i| pair(2 * i, 2 * i + 1, y)).collect();
            let rev: Vec<PatchPair> = (0..5).map(|i| pair(2 * i + 1, 2 * i, y)).collect();
            let a = pair_loss(&model, &inputs, &fwd).unwrap();
            let b = pair_loss(&model, &inputs, &rev).unwrap();
            assert_eq!(a, b);
            assert!(a >= 0.0);
        }
    }
}
