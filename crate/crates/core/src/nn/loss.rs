use alloc::vec;
use alloc::vec::Vec;

use super::{NnError, Tensor};

/// Max-subtracted softmax of one logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[label]` and its gradient `softmax - one_hot`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>), NnError> {
    if label >= logits.len() {
        return Err(NnError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = logits.iter().map(|&z| libm::exp(z - max)).sum();
    let log_sum = max + libm::log(sum_exp);
    let loss = log_sum - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Mean cross-entropy over a `[N, classes]` batch; the gradient is already
/// divided by `N`.
pub fn softmax_cross_entropy_batch(
    logits: &Tensor,
    labels: &[usize],
) -> Result<(f64, Tensor), NnError> {
    if logits.rank() != 2 || logits.shape()[0] != labels.len() {
        return Err(NnError::ShapeMismatch {
            expected: vec![labels.len(), logits.channels()],
            found: logits.shape().to_vec(),
        });
    }
    let n = labels.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (r, &label) in labels.iter().enumerate() {
        let (l, g) = softmax_cross_entropy(logits.row(r), label)?;
        total += l;
        grad.extend(g.into_iter().map(|v| v / n));
    }
    Ok((total / n, Tensor::new(logits.shape().to_vec(), grad)?))
}
