use ndarray::{Array2, Axis};

use super::Real;
use crate::error::{Error, Result};

/// Row-wise softmax with max-shift.
pub fn softmax_rows<T: Real>(logits: &Array2<T>) -> Array2<T> {
    let mut probs = logits.to_owned();
    for mut row in probs.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.iter().copied().fold(T::zero(), |a, b| a + b);
        row.mapv_inplace(|v| v / sum);
    }
    probs
}

/// Batch-mean softmax cross-entropy and its gradient w.r.t. the logits.
///
/// Returns `(loss, (softmax - onehot) / B)`. Per-sample log-probabilities
/// use the log-sum-exp form; the batch sum is accumulated in `f64`.
pub fn softmax_cross_entropy<T: Real>(
    logits: &Array2<T>,
    targets: &[usize],
) -> Result<(T, Array2<T>)> {
    let (batch, classes) = logits.dim();
    if batch == 0 {
        return Err(Error::EmptyInput("cross-entropy batch".into()));
    }
    if targets.len() != batch {
        return Err(Error::shape("cross-entropy targets", batch, targets.len()));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= classes) {
        return Err(Error::Index {
            what: "target class",
            index: bad,
            limit: classes,
        });
    }

    let inv_batch = T::one() / T::from_usize(batch).expect("batch size fits");
    let mut total = 0.0f64;
    let mut grad = Array2::zeros((batch, classes));
    for ((row, mut grow), &target) in logits
        .axis_iter(Axis(0))
        .zip(grad.axis_iter_mut(Axis(0)))
        .zip(targets)
    {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum_exp = row.iter().fold(T::zero(), |acc, &v| acc + (v - max).exp());
        let log_z = max + sum_exp.ln();
        total += (log_z - row[target]).as_f64();
        for (g, &v) in grow.iter_mut().zip(row.iter()) {
            *g = (v - log_z).exp() * inv_batch;
        }
        grow[target] = grow[target] - inv_batch;
    }
    let loss = T::from_f64_lossy(total / batch as f64);
    Ok((loss, grad))
}
