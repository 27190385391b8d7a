use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::matrix::Matrix;
use crate::real::Real;

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    num_traits::Float::sqrt(6.0 / (fan_in + fan_out) as f64)
}

/// `fan_out x fan_in` matrix drawn from U(-b, b), b = sqrt(6 / (fan_in + fan_out)).
pub fn glorot_init<T: Real>(fan_in: usize, fan_out: usize, seed: u64) -> Matrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    glorot_with(&mut rng, fan_in, fan_out)
}

pub(crate) fn glorot_with<T: Real>(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Matrix<T> {
    assert!(
        fan_in >= 1 && fan_out >= 1,
        "fan_in and fan_out must be >= 1"
    );
    let b = glorot_bound(fan_in, fan_out);
    let data = (0..fan_in * fan_out)
        .map(|_| T::lit(rng.gen_range(-b..=b)))
        .collect();
    Matrix::from_vec(fan_out, fan_in, data).expect("sized above")
}

pub fn zero_init_bias<T: Real>(dim: usize) -> Vec<T> {
    alloc::vec![T::zero(); dim]
}
