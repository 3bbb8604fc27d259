use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::sampling::{PATCH_LEN, PATCH_SIZE};
use crate::{MraiError, Result};

pub const KERNEL: usize = 3;
pub const CONV_SIDE: usize = PATCH_SIZE - KERNEL + 1;
pub const POOL_SIDE: usize = CONV_SIDE / 2;

/// Network hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub conv_kernels: usize,
    pub dense1: usize,
    pub dense2: usize,
    pub embed_dim: usize,
    pub dropout_rate: f64,
    pub l2_lambda: f64,
    pub margin: f64,
    pub norm_p: u32,
    /// Replace the patch front-end with a dense-only stack on vectors of
    /// this dimension (plus the domain bit).
    pub vector_input: Option<usize>,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            conv_kernels: 8,
            dense1: 16,
            dense2: 8,
            embed_dim: 2,
            dropout_rate: 0.2,
            l2_lambda: 0.001,
            margin: 1.0,
            norm_p: 1,
            vector_input: None,
        }
    }
}

impl NetConfig {
    /// `[k, h1, h2, embed]` with the other fields at their defaults.
    pub fn sized(k: usize, h1: usize, h2: usize, embed_dim: usize) -> Self {
        Self {
            conv_kernels: k,
            dense1: h1,
            dense2: h2,
            embed_dim,
            ..Self::default()
        }
    }

    pub fn vector(dim: usize, h1: usize, h2: usize, embed_dim: usize) -> Self {
        Self {
            vector_input: Some(dim),
            ..Self::sized(0, h1, h2, embed_dim)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MraiError::Config(m));
        if self.vector_input.is_none() && self.conv_kernels == 0 {
            return bad("conv_kernels must be >= 1".into());
        }
        if self.vector_input == Some(0) {
            return bad("vector_input must be >= 1".into());
        }
        if self.dense1 == 0 || self.dense2 == 0 || self.embed_dim == 0 {
            return bad("layer widths must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} not in [0, 1)", self.dropout_rate));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return bad(format!("margin {} must be finite and >= 0", self.margin));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return bad(format!("l2_lambda {} must be finite and >= 0", self.l2_lambda));
        }
        if self.norm_p == 0 {
            return bad("norm_p must be >= 1".into());
        }
        Ok(())
    }

    /// Length of the network input vector.
    pub fn input_len(&self) -> usize {
        self.vector_input.map_or(PATCH_LEN, |d| d) + 1
    }

    /// Width of the first dense layer's input.
    pub fn flat_len(&self) -> usize {
        match self.vector_input {
            Some(d) => d + 1,
            None => POOL_SIDE * POOL_SIDE * self.conv_kernels + 1,
        }
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self)
    }
}

/// Number of trainable scalars.
pub fn param_count(config: &NetConfig) -> usize {
    config.layout().total
}

/// Offsets of each parameter block inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub conv_w: Range<usize>,
    pub conv_b: Range<usize>,
    pub d1_w: Range<usize>,
    pub d1_b: Range<usize>,
    pub d2_w: Range<usize>,
    pub d2_b: Range<usize>,
    pub out_w: Range<usize>,
    pub out_b: Range<usize>,
    pub total: usize,
}

impl Layout {
    fn new(c: &NetConfig) -> Self {
        let k = if c.vector_input.is_some() { 0 } else { c.conv_kernels };
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let conv_w = take(k * KERNEL * KERNEL);
        let conv_b = take(k);
        let d1_w = take(c.flat_len() * c.dense1);
        let d1_b = take(c.dense1);
        let d2_w = take(c.dense1 * c.dense2);
        let d2_b = take(c.dense2);
        let out_w = take(c.dense2 * c.embed_dim);
        let out_b = take(c.embed_dim);
        Self {
            conv_w,
            conv_b,
            d1_w,
            d1_b,
            d2_w,
            d2_b,
            out_w,
            out_b,
            total: at,
        }
    }

    /// `(name, range, rows, cols, fan_in, fan_out)` for each block.
    pub fn blocks(&self, c: &NetConfig) -> Vec<(&'static str, Range<usize>, usize, usize)> {
        let k = self.conv_b.len();
        vec![
            ("conv_w", self.conv_w.clone(), k, KERNEL * KERNEL),
            ("conv_b", self.conv_b.clone(), k, 1),
            ("dense1_w", self.d1_w.clone(), c.dense1, c.flat_len()),
            ("dense1_b", self.d1_b.clone(), c.dense1, 1),
            ("dense2_w", self.d2_w.clone(), c.dense2, c.dense1),
            ("dense2_b", self.d2_b.clone(), c.dense2, 1),
            ("out_w", self.out_w.clone(), c.embed_dim, c.dense2),
            ("out_b", self.out_b.clone(), c.embed_dim, 1),
        ]
    }

    pub fn weight_ranges(&self) -> [Range<usize>; 4] {
        [self.conv_w.clone(), self.d1_w.clone(), self.d2_w.clone(), self.out_w.clone()]
    }
}
