use alloc::vec::Vec;

use super::rnn::RnnLayer;
use crate::real::Real;

/// Activations kept for the backward pass of one GRU step.
#[derive(Debug, Clone, Default)]
pub struct GruCache<T> {
    pub x: Vec<T>,
    pub h_prev: Vec<T>,
    /// Reset gate.
    pub r: Vec<T>,
    /// Update gate.
    pub z: Vec<T>,
    /// Candidate state.
    pub n: Vec<T>,
    /// Recurrent candidate term `U_n h_prev` before the reset gate.
    pub un: Vec<T>,
    pub h: Vec<T>,
}

/// One GRU step with gate blocks `[r, z, n]`:
///
/// ```text
/// r = sigmoid(W_r x + U_r h + b_r)
/// z = sigmoid(W_z x + U_z h + b_z)
/// n = tanh(W_n x + r * (U_n h) + b_n)
/// h' = (1 - z) * n + z * h
/// ```
pub fn gru_cell_forward<T: Real>(
    layer: &RnnLayer<T>,
    x: &[T],
    h_prev: &[T],
) -> (Vec<T>, GruCache<T>) {
    let mut cache = GruCache::default();
    gru_step(layer, x, h_prev, &mut cache);
    (cache.h.clone(), cache)
}

pub(crate) fn gru_step<T: Real>(
    layer: &RnnLayer<T>,
    x: &[T],
    h_prev: &[T],
    cache: &mut GruCache<T>,
) {
    let hd = layer.hidden_dim();
    let one = T::one();
    let mut a = layer.bias.clone();
    layer.w.gemv_acc(x, &mut a);
    let mut u = alloc::vec![T::zero(); 3 * hd];
    layer.u.gemv_acc(h_prev, &mut u);
    let mut r = Vec::with_capacity(hd);
    let mut z = Vec::with_capacity(hd);
    let mut n = Vec::with_capacity(hd);
    let mut h = Vec::with_capacity(hd);
    for j in 0..hd {
        let rj = (a[j] + u[j]).sigmoid();
        let zj = (a[hd + j] + u[hd + j]).sigmoid();
        let nj = (a[2 * hd + j] + rj * u[2 * hd + j]).ptanh();
        r.push(rj);
        z.push(zj);
        n.push(nj);
        h.push((one - zj) * nj + zj * h_prev[j]);
    }
    cache.x.clear();
    cache.x.extend_from_slice(x);
    cache.h_prev.clear();
    cache.h_prev.extend_from_slice(h_prev);
    cache.un = u.split_off(2 * hd);
    cache.r = r;
    cache.z = z;
    cache.n = n;
    cache.h = h;
}

/// Backward through one step given the total gradient `dh` at its output;
/// returns `(dx, dh_prev)`.
pub fn gru_cell_backward<T: Real>(
    layer: &RnnLayer<T>,
    cache: &GruCache<T>,
    dh: &[T],
    grad: &mut RnnLayer<T>,
) -> (Vec<T>, Vec<T>) {
    let hd = layer.hidden_dim();
    let one = T::one();
    // input-side and recurrent-side pre-activation gradients
    let mut da = alloc::vec![T::zero(); 3 * hd];
    let mut du = alloc::vec![T::zero(); 3 * hd];
    let mut dh_prev = alloc::vec![T::zero(); hd];
    for j in 0..hd {
        let (r, z, n) = (cache.r[j], cache.z[j], cache.n[j]);
        let dn = dh[j] * (one - z);
        let dz = dh[j] * (cache.h_prev[j] - n);
        dh_prev[j] = dh[j] * z;
        let dan = dn * (one - n * n);
        let dr = dan * cache.un[j];
        let dar = dr * r * (one - r);
        let daz = dz * z * (one - z);
        da[j] = dar;
        da[hd + j] = daz;
        da[2 * hd + j] = dan;
        du[j] = dar;
        du[hd + j] = daz;
        du[2 * hd + j] = dan * r;
    }
    grad.w.outer_acc(&da, &cache.x);
    grad.u.outer_acc(&du, &cache.h_prev);
    for (b, &d) in grad.bias.iter_mut().zip(&da) {
        *b += d;
    }
    let mut dx = alloc::vec![T::zero(); layer.input_dim()];
    layer.w.gemv_t_acc(&da, &mut dx);
    layer.u.gemv_t_acc(&du, &mut dh_prev);
    (dx, dh_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{CellKind, Parameters};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_zero_state() {
        let layer = RnnLayer::<f64>::zeros(CellKind::Gru, 3, 4);
        let (h, _) = gru_cell_forward(&layer, &[1.0, 2.0, 3.0], &[0.0; 4]);
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_update_gate_copies_state() {
        let mut layer = RnnLayer::<f64>::zeros(CellKind::Gru, 2, 3);
        for j in 3..6 {
            layer.bias[j] = 20.0;
        }
        layer.bias[6] = 1.0;
        let h_prev = [0.3, -0.7, 0.1];
        let (h, _) = gru_cell_forward(&layer, &[1.0, -1.0], &h_prev);
        for (a, b) in h.iter().zip(&h_prev) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn hidden_stays_in_open_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut layer = RnnLayer::<f64>::new(CellKind::Gru, 4, 5, &mut rng);
        layer.scale(4.0);
        let (h, _) = gru_cell_forward(
            &layer,
            &[5.0, -5.0, 1.0, 2.0],
            &[0.99, -0.99, 0.5, 0.0, -0.3],
        );
        assert!(h.iter().all(|v| v.abs() < 1.0));
    }
}
