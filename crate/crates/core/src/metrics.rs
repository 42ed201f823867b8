use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Root mean square error over `n` prediction/truth pairs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport<T> {
    pub rmse: T,
    pub n: usize,
}

/// `sqrt(Σ (p − t)² / n)`.
pub fn rmse<T: Scalar>(predictions: &[T], truths: &[T]) -> Result<MetricReport<T>> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sse: T = predictions
        .iter()
        .zip(truths)
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum();
    let n = predictions.len();
    Ok(MetricReport {
        rmse: (sse / T::from_count(n)).sqrt(),
        n,
    })
}
