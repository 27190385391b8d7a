use alloc::vec::Vec;

use super::rnn::RnnLayer;
use crate::real::Real;

/// Activations kept for the backward pass of one LSTM step.
#[derive(Debug, Clone, Default)]
pub struct LstmCache<T> {
    pub x: Vec<T>,
    pub h_prev: Vec<T>,
    pub c_prev: Vec<T>,
    /// Post-activation gates, blocks `[i, f, g, o]`.
    pub gates: Vec<T>,
    pub c: Vec<T>,
    pub tanh_c: Vec<T>,
}

/// One LSTM step: `c = f*c_prev + i*g`, `h = o*tanh(c)`.
///
/// Gate pre-activations are `W x + U h_prev + b` with blocks `[i, f, g, o]`.
pub fn lstm_cell_forward<T: Real>(
    layer: &RnnLayer<T>,
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
) -> (Vec<T>, Vec<T>, LstmCache<T>) {
    let mut cache = LstmCache::default();
    lstm_step(layer, x, h_prev, c_prev, &mut cache);
    let mut h = alloc::vec![T::zero(); layer.hidden_dim()];
    lstm_output(&cache, layer.hidden_dim(), &mut h);
    let c = cache.c.clone();
    (h, c, cache)
}

/// Fills `cache`; the step output is `o * tanh_c`, see [`lstm_output`].
pub(crate) fn lstm_step<T: Real>(
    layer: &RnnLayer<T>,
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    cache: &mut LstmCache<T>,
) {
    let hd = layer.hidden_dim();
    let mut z = layer.bias.clone();
    layer.w.gemv_acc(x, &mut z);
    layer.u.gemv_acc(h_prev, &mut z);
    for (k, v) in z.iter_mut().enumerate() {
        *v = if k / hd == 2 { v.ptanh() } else { v.sigmoid() };
    }
    let mut c = Vec::with_capacity(hd);
    let mut tanh_c = Vec::with_capacity(hd);
    for j in 0..hd {
        let (i, f, g) = (z[j], z[hd + j], z[2 * hd + j]);
        let cj = f * c_prev[j] + i * g;
        c.push(cj);
        tanh_c.push(cj.ptanh());
    }
    cache.x.clear();
    cache.x.extend_from_slice(x);
    cache.h_prev.clear();
    cache.h_prev.extend_from_slice(h_prev);
    cache.c_prev.clear();
    cache.c_prev.extend_from_slice(c_prev);
    cache.gates = z;
    cache.c = c;
    cache.tanh_c = tanh_c;
}

pub(crate) fn lstm_output<T: Real>(cache: &LstmCache<T>, hd: usize, h: &mut [T]) {
    for ((hj, &t), &o) in h.iter_mut().zip(&cache.tanh_c).zip(&cache.gates[3 * hd..]) {
        *hj = o * t;
    }
}

/// Backward through one step. `dh` and `dc` are the total gradients
/// arriving at this step's outputs; returns `(dx, dh_prev, dc_prev)` and
/// accumulates parameter gradients into `grad`.
pub fn lstm_cell_backward<T: Real>(
    layer: &RnnLayer<T>,
    cache: &LstmCache<T>,
    dh: &[T],
    dc: &[T],
    grad: &mut RnnLayer<T>,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let hd = layer.hidden_dim();
    let one = T::one();
    let g = &cache.gates;
    let mut dz = alloc::vec![T::zero(); 4 * hd];
    let mut dc_prev = alloc::vec![T::zero(); hd];
    for j in 0..hd {
        let (i, f, gg, o) = (g[j], g[hd + j], g[2 * hd + j], g[3 * hd + j]);
        let t = cache.tanh_c[j];
        let dcj = dc[j] + dh[j] * o * (one - t * t);
        let d_o = dh[j] * t;
        let d_i = dcj * gg;
        let d_g = dcj * i;
        let d_f = dcj * cache.c_prev[j];
        dc_prev[j] = dcj * f;
        dz[j] = d_i * i * (one - i);
        dz[hd + j] = d_f * f * (one - f);
        dz[2 * hd + j] = d_g * (one - gg * gg);
        dz[3 * hd + j] = d_o * o * (one - o);
    }
    grad.w.outer_acc(&dz, &cache.x);
    grad.u.outer_acc(&dz, &cache.h_prev);
    for (b, &d) in grad.bias.iter_mut().zip(&dz) {
        *b += d;
    }
    let mut dx = alloc::vec![T::zero(); layer.input_dim()];
    layer.w.gemv_t_acc(&dz, &mut dx);
    let mut dh_prev = alloc::vec![T::zero(); hd];
    layer.u.gemv_t_acc(&dz, &mut dh_prev);
    (dx, dh_prev, dc_prev)
}
