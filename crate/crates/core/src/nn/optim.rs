use alloc::vec::Vec;

use super::params::{BufferKind, Parameters};
use crate::real::Real;

/// `sqrt` of the sum of squares over every buffer.
pub fn global_norm<T: Real, P: Parameters<T>>(grads: &P) -> T {
    grads
        .params()
        .iter()
        .flat_map(|p| p.data.iter())
        .map(|&g| g * g)
        .sum::<T>()
        .sqrt()
}

/// Rescales `grads` so their global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Real, P: Parameters<T>>(grads: &mut P, max_norm: T) -> T {
    let norm = global_norm(grads);
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Adds `lambda * sum ||W||^2` over weight buffers to `loss` and
/// `2 * lambda * W` to the matching gradients. Biases are left alone.
pub fn apply_l2<T: Real, P: Parameters<T>>(loss: T, grads: &mut P, params: &P, lambda: T) -> T {
    if lambda == T::zero() {
        return loss;
    }
    let views = params.params();
    let mut penalty = T::zero();
    let two_lambda = T::lit(2.0) * lambda;
    for (g, p) in grads.params_mut().into_iter().zip(&views) {
        if p.kind != BufferKind::Weight {
            continue;
        }
        for (gi, &w) in g.iter_mut().zip(p.data) {
            penalty += w * w;
            *gi += two_lambda * w;
        }
    }
    loss + lambda * penalty
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment buffers, flattened in parameter declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new<P: Parameters<T>>(params: &P, config: AdamConfig) -> Self {
        let n = params.param_count();
        Self {
            config,
            m: alloc::vec![T::zero(); n],
            v: alloc::vec![T::zero(); n],
            step: 0,
        }
    }

    /// One bias-corrected Adam update.
    pub fn step<P: Parameters<T>>(&mut self, params: &mut P, grads: &P) {
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let one = T::one();
        let t = self.step.min(i32::MAX as u64) as i32;
        let corr1 = T::lit(1.0 - libm::pow(c.beta1, t as f64));
        let corr2 = T::lit(1.0 - libm::pow(c.beta2, t as f64));
        let lr = T::lit(c.lr);
        let eps = T::lit(c.eps);
        let g_views = grads.params();
        let mut k = 0;
        for (p, g) in params.params_mut().into_iter().zip(&g_views) {
            for (w, &gi) in p.iter_mut().zip(g.data) {
                let m = b1 * self.m[k] + (one - b1) * gi;
                let v = b2 * self.v[k] + (one - b2) * gi * gi;
                self.m[k] = m;
                self.v[k] = v;
                let m_hat = m / corr1;
                let v_hat = v / corr2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
                k += 1;
            }
        }
        debug_assert_eq!(k, self.m.len());
    }
}
