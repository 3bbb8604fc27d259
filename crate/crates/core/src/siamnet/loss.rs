use crate::{MraiError, Result};

/// `(sum |u_i - v_i|^p)^(1/p)`.
pub fn lp_distance(u: &[f64], v: &[f64], p: u32) -> Result<f64> {
    check(u, v, p)?;
    Ok(distance(u, v, p))
}

fn check(u: &[f64], v: &[f64], p: u32) -> Result<()> {
    if u.len() != v.len() {
        return Err(MraiError::Shape(format!("embedding lengths {} and {} differ", u.len(), v.len())));
    }
    if p == 0 {
        return Err(MraiError::InvalidArgument("norm p must be >= 1".into()));
    }
    Ok(())
}

fn distance(u: &[f64], v: &[f64], p: u32) -> f64 {
    match p {
        1 => u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum(),
        2 => u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        _ => u
            .iter()
            .zip(v)
            .map(|(a, b)| (a - b).abs().powi(p as i32))
            .sum::<f64>()
            .powf(1.0 / f64::from(p)),
    }
}

/// Distance and its gradient with respect to `u` (the gradient with
/// respect to `v` is the negation). The subgradient at a zero coordinate,
/// and at `d = 0`, is 0.
pub fn lp_distance_grad(u: &[f64], v: &[f64], p: u32) -> Result<(f64, Vec<f64>)> {
    check(u, v, p)?;
    let d = distance(u, v, p);
    let grad = u
        .iter()
        .zip(v)
        .map(|(a, b)| {
            let delta = a - b;
            if delta == 0.0 || d == 0.0 {
                0.0
            } else if p == 1 {
                delta.signum()
            } else {
                delta.signum() * (delta.abs() / d).powi(p as i32 - 1)
            }
        })
        .collect();
    Ok((d, grad))
}

/// `y d^2 + (1 - y) max(0, m - d)`.
pub fn siamese_loss(d: f64, y: u8, margin: f64) -> f64 {
    if y == 1 {
        d * d
    } else {
        (margin - d).max(0.0)
    }
}

/// Derivative of [`siamese_loss`] in `d`; the hinge derivative at `d = m` is 0.
pub fn siamese_loss_dd(d: f64, y: u8, margin: f64) -> f64 {
    if y == 1 {
        2.0 * d
    } else if d < margin {
        -1.0
    } else {
        0.0
    }
}

/// Softmax cross-entropy of `logits` against `class`, with the gradient.
pub fn softmax_xent(logits: &[f64], class: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (logits[class] - max);
    let grad = exps
        .iter()
        .enumerate()
        .map(|(i, e)| e / sum - if i == class { 1.0 } else { 0.0 })
        .collect();
    (loss, grad)
}
