//! Central-difference gradient estimates, used as an oracle for `backward`
//! and for gradients that flow through parameter blends.

use super::mlp::{mean_loss, LabeledBatch};
use super::params::{Gradient, ParamVector};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Central difference of an arbitrary scalar function, one coordinate at a time.
pub fn central_difference<T, F>(point: &[T], h: T, mut f: F) -> Result<Vec<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<T>,
{
    if !(h > T::zero()) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let mut probe = point.to_vec();
    let two_h = h + h;
    let mut out = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&probe)?;
        probe[i] = orig - h;
        let down = f(&probe)?;
        probe[i] = orig;
        out.push((up - down) / two_h);
    }
    Ok(out)
}

/// Finite-difference estimate of the mean cross-entropy gradient over every parameter.
pub fn finite_diff_grad<T: Scalar>(
    params: &ParamVector<T>,
    batch: &LabeledBatch<T>,
    h: T,
) -> Result<Gradient<T>> {
    let est = central_difference(params.as_slice(), h, |v| {
        mean_loss(&params.with_values(v.to_vec())?, batch)
    })?;
    Ok(Gradient::new(est))
}

/// `max_i |a_i - b_i| / max(1, |b_i|)`.
pub fn max_relative_error<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / y.abs().max(T::one()))
        .fold(T::zero(), T::max)
}
