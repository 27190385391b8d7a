use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

/// Iterative radix-2 complex FFT with precomputed twiddles.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    bitrev: Vec<usize>,
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::invalid("FFT size", "must be a power of two >= 2"));
        }
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| i.reverse_bits() >> (usize::BITS - bits))
            .collect();
        let half = n / 2;
        let (cos, sin) = (0..half)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                (libm::cos(a), libm::sin(a))
            })
            .unzip();
        Ok(Self {
            n,
            cos,
            sin,
            bitrev,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Forward transform in place.
    pub fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        let n = self.n;
        assert!(re.len() == n && im.len() == n);
        for i in 0..n {
            let j = self.bitrev[i];
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let (wr, wi) = (self.cos[k * stride], self.sin[k * stride]);
                    let a = start + k;
                    let b = a + half;
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            size *= 2;
        }
    }
}

/// `|FFT(frame)|^2` for bins `0..=n/2`; the frame is zero-padded to the FFT size.
pub fn power_spectrum(fft: &Fft, frame: &[f64]) -> Result<Vec<f64>> {
    let n = fft.len();
    if frame.len() > n {
        return Err(Error::DimensionMismatch {
            what: "frame longer than FFT size",
            expected: n,
            found: frame.len(),
        });
    }
    let mut re = alloc::vec![0.0; n];
    let mut im = alloc::vec![0.0; n];
    re[..frame.len()].copy_from_slice(frame);
    fft.forward(&mut re, &mut im);
    Ok((0..=n / 2).map(|k| re[k] * re[k] + im[k] * im[k]).collect())
}
