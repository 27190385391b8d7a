use alloc::vec::Vec;

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::labeling::LabelSequence;
use crate::real::Real;

/// Numerically stable softmax, in place.
pub fn softmax_in_place<T: Real>(v: &mut [T]) {
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = (*x - m).pexp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

pub fn softmax<T: Real>(v: &[T]) -> Vec<T> {
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    out
}

/// `log softmax(v)` via log-sum-exp.
pub fn log_softmax<T: Real>(v: &[T]) -> Vec<T> {
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = m + v.iter().map(|&x| (x - m).pexp()).sum::<T>().pln();
    v.iter().map(|&x| x - lse).collect()
}

#[derive(Debug, Clone)]
pub struct XentOutput<T> {
    /// Weighted mean negative log-likelihood.
    pub loss: T,
    /// `dL/dlogits`, same shape as the logits.
    pub grad: Matrix<T>,
    /// Sum of frame weights (the normalizer).
    pub total_weight: T,
}

/// Unnormalized weighted NLL: `(sum_t w_t * nll_t, sum_t w_t, d(sum)/dlogits)`.
pub(crate) fn weighted_xent_sum<T: Real>(
    logits: &Matrix<T>,
    labels: &LabelSequence,
) -> Result<(T, T, Matrix<T>)> {
    if labels.len() != logits.rows() {
        return Err(Error::DimensionMismatch {
            what: "label sequence length",
            expected: logits.rows(),
            found: labels.len(),
        });
    }
    let classes = logits.cols();
    let mut grad = Matrix::zeros(logits.rows(), classes);
    let mut loss = T::zero();
    let mut total = T::zero();
    for t in 0..logits.rows() {
        let w = T::of_f32(labels.weights()[t]);
        let label = labels.labels()[t];
        if w == T::zero() {
            continue;
        }
        let class = usize::try_from(label)
            .ok()
            .filter(|&c| c < classes)
            .ok_or_else(|| {
                Error::invalid(
                    "label",
                    alloc::format!("{label} at frame {t} has nonzero weight"),
                )
            })?;
        let logp = log_softmax(logits.row(t));
        loss += w * -logp[class];
        total += w;
        for (k, (g, lp)) in grad.row_mut(t).iter_mut().zip(&logp).enumerate() {
            let p = lp.pexp();
            *g = w * if k == class { p - T::one() } else { p };
        }
    }
    Ok((loss, total, grad))
}

/// Weighted softmax cross-entropy over frames, normalized by the total
/// weight. Zero-weight frames (label `-1`) contribute nothing; if every
/// weight is zero the loss and gradient are zero.
pub fn weighted_softmax_xent<T: Real>(
    logits: &Matrix<T>,
    labels: &LabelSequence,
) -> Result<XentOutput<T>> {
    let (sum, total, mut grad) = weighted_xent_sum(logits, labels)?;
    if total == T::zero() {
        return Ok(XentOutput {
            loss: T::zero(),
            grad,
            total_weight: total,
        });
    }
    let inv = T::one() / total;
    grad.as_mut_slice().iter_mut().for_each(|g| *g *= inv);
    Ok(XentOutput {
        loss: sum * inv,
        grad,
        total_weight: total,
    })
}
