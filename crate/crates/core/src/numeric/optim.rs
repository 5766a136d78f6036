use serde::{Deserialize, Serialize};

use crate::numeric::params::ParamStore;
use crate::numeric::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            rho: 0.9,
            eps: 1e-8,
        }
    }
}

/// RMSProp with a per-parameter running mean of squared gradients:
///
/// ```text
/// cache ← rho·cache + (1 − rho)·grad²
/// value ← value − lr·grad / √(cache + eps)
/// ```
#[derive(Clone, Debug)]
pub struct RmsProp<T> {
    pub config: RmsPropConfig,
    cache: Vec<Vec<T>>,
}

impl<T: Real> RmsProp<T> {
    pub fn new(config: RmsPropConfig) -> Self {
        Self {
            config,
            cache: Vec::new(),
        }
    }

    pub fn cache(&self, param_index: usize) -> Option<&[T]> {
        self.cache.get(param_index).map(Vec::as_slice)
    }

    /// Apply one update from the grads currently stored in `params`.
    pub fn step(&mut self, params: &mut ParamStore<T>) {
        let lr = T::of(self.config.lr);
        let rho = T::of(self.config.rho);
        let one_minus_rho = T::of(1.0 - self.config.rho);
        let eps = T::of(self.config.eps);
        if self.cache.len() != params.len() {
            self.cache = params
                .iter()
                .map(|(_, p)| vec![T::zero(); p.value.len()])
                .collect();
        }
        for (p, cache) in params.iter_mut().zip(&mut self.cache) {
            if !p.trainable {
                continue;
            }
            let grad = p.grad.data();
            let value = p.value.data_mut();
            for ((v, c), &g) in value.iter_mut().zip(cache.iter_mut()).zip(grad) {
                *c = rho * *c + one_minus_rho * g * g;
                *v -= lr * g / (*c + eps).sqrt();
            }
        }
    }
}
