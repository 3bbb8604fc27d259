use serde::{Deserialize, Serialize};

/// RMSprop hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    /// Time-based learning-rate decay: `lr / (1 + decay * step)`.
    pub decay: f64,
}

impl Default for RmsProp {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            rho: 0.9,
            epsilon: 1e-8,
            decay: 0.0,
        }
    }
}

/// Optimizer state: settings, squared-gradient cache and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub settings: RmsProp,
    pub cache: Vec<f64>,
    pub steps: u64,
}

impl OptimizerState {
    pub fn new(settings: RmsProp, n_params: usize) -> Self {
        Self {
            settings,
            cache: vec![0.0; n_params],
            steps: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.cache.len());
        let RmsProp {
            learning_rate,
            rho,
            epsilon,
            decay,
        } = self.settings;
        let lr = learning_rate / (1.0 + decay * self.steps as f64);
        for ((p, g), c) in params.iter_mut().zip(grads).zip(&mut self.cache) {
            *c = rho * *c + (1.0 - rho) * g * g;
            *p -= lr * g / (c.sqrt() + epsilon);
        }
        self.steps += 1;
    }
}
