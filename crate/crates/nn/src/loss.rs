//! Loss functions returning `(mean loss, gradient w.r.t. the input)`.

use crate::{Scalar, Tensor};

/// Numerically stable binary cross-entropy on raw logits against a constant target.
pub fn bce_with_logits<S: Scalar>(logits: &Tensor<S>, target: S) -> (S, Tensor<S>) {
    let n = S::from_f64(logits.len() as f64);
    let mut loss = S::zero();
    let grad = logits
        .data()
        .iter()
        .map(|&x| {
            loss = loss + x.max(S::zero()) - x * target + (S::one() + (-x.abs()).exp()).ln();
            (sigmoid(x) - target) / n
        })
        .collect();
    (loss / n, Tensor::from_vec(logits.shape(), grad))
}

pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// Softmax of one logit row, max-shifted.
pub fn softmax<S: Scalar>(row: &[S]) -> Vec<S> {
    let m = row.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = row.iter().map(|&v| (v - m).exp()).collect();
    let z: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Mean softmax cross-entropy of `(N, K)` logits against class indices.
pub fn softmax_cross_entropy<S: Scalar>(logits: &Tensor<S>, labels: &[usize]) -> (S, Tensor<S>) {
    let n = logits.batch();
    let k = logits.item_len();
    assert_eq!(labels.len(), n, "one label per row");
    let nf = S::from_f64(n as f64);
    let mut loss = S::zero();
    let mut grad = Vec::with_capacity(n * k);
    for (i, &y) in labels.iter().enumerate() {
        assert!(y < k, "label {y} out of range for {k} classes");
        let p = softmax(logits.item(i));
        loss = loss - p[y].max(S::min_positive_value()).ln();
        for (j, pj) in p.into_iter().enumerate() {
            let t = if j == y { S::one() } else { S::zero() };
            grad.push((pj - t) / nf);
        }
    }
    (loss / nf, Tensor::from_vec(logits.shape(), grad))
}

/// Mean squared error over all elements.
pub fn mse<S: Scalar>(pred: &Tensor<S>, target: &[S]) -> (S, Tensor<S>) {
    assert_eq!(pred.len(), target.len(), "mse: length mismatch");
    let n = S::from_f64(pred.len() as f64);
    let two = S::from_f64(2.0);
    let mut loss = S::zero();
    let grad = pred
        .data()
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = p - t;
            loss = loss + d * d;
            two * d / n
        })
        .collect();
    (loss / n, Tensor::from_vec(pred.shape(), grad))
}
