use super::tensor::{Scalar, Tensor};
use crate::error::{data_err, usage, Result};

/// Mean categorical cross-entropy over a batch of logits, with the gradient
/// `(softmax - onehot) / N` with respect to the logits.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    if logits.ndim() != 2 {
        return Err(usage!("cross-entropy expects [N,K] logits, got {:?}", logits.shape()));
    }
    let (n, k) = (logits.dim(0), logits.dim(1));
    if labels.len() != n {
        return Err(usage!("{} labels for {n} rows", labels.len()));
    }
    if n == 0 {
        return Err(usage!("cross-entropy over an empty batch"));
    }
    if let Some(bad) = labels.iter().find(|&&l| l >= k) {
        return Err(data_err!("label {bad} out of range for {k} classes"));
    }
    let inv_n = T::one() / T::from_usize(n).unwrap();
    let mut grad = Vec::with_capacity(n * k);
    let mut total = T::zero();
    for (row, &label) in logits.data().chunks(k).zip(labels) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = row.iter().map(|&v| (v - max).exp()).sum();
        let log_sum = sum.ln();
        total = total + (log_sum - (row[label] - max));
        for (j, &v) in row.iter().enumerate() {
            let p = (v - max - log_sum).exp();
            let onehot = if j == label { T::one() } else { T::zero() };
            grad.push((p - onehot) * inv_n);
        }
    }
    Ok((total * inv_n, Tensor::new(vec![n, k], grad)?))
}
