//! Loss functions with batch-mean reduction.
//!
//! Cross-entropies are evaluated from logits, so each loss and its logit
//! gradient `(p - t) / B` are exact counterparts even where the output
//! activation saturates.

use ndarray::{Array2, ArrayView1, Zip};

/// `ln(1 + e^a)` without overflow.
pub fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

fn log_sum_exp(row: ArrayView1<f64>) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Softmax cross-entropy `-sum(t * log_softmax(a))` averaged over rows.
pub fn softmax_cross_entropy(logits: &Array2<f64>, onehot: &Array2<f64>) -> f64 {
    let b = logits.nrows() as f64;
    let mut total = 0.0;
    for (a, t) in logits.rows().into_iter().zip(onehot.rows()) {
        let lse = log_sum_exp(a);
        Zip::from(&a).and(&t).for_each(|&a, &t| {
            if t != 0.0 {
                total += t * (lse - a);
            }
        });
    }
    total / b
}

/// Gradient of the batch-mean softmax cross-entropy w.r.t. the logits.
pub fn cce_logit_grad(probs: &Array2<f64>, onehot: &Array2<f64>) -> Array2<f64> {
    let b = probs.nrows() as f64;
    (probs - onehot) / b
}

/// Per-row sigmoid binary cross-entropy `softplus(a) - t * a` summed over units.
pub fn bce_rows(logits: &Array2<f64>, target: &Array2<f64>) -> Vec<f64> {
    logits
        .rows()
        .into_iter()
        .zip(target.rows())
        .map(|(a, t)| a.iter().zip(t.iter()).map(|(&a, &t)| softplus(a) - t * a).sum())
        .collect()
}

/// Sigmoid binary cross-entropy summed over units, averaged over rows.
pub fn binary_cross_entropy(logits: &Array2<f64>, target: &Array2<f64>) -> f64 {
    let rows = bce_rows(logits, target);
    rows.iter().sum::<f64>() / rows.len() as f64
}

/// Gradient of the batch-mean sigmoid BCE w.r.t. the logits.
pub fn bce_logit_grad(pred: &Array2<f64>, target: &Array2<f64>) -> Array2<f64> {
    let b = pred.nrows() as f64;
    (pred - target) / b
}

/// `0.5 * sum((y - t)^2)` averaged over rows.
pub fn squared_error(pred: &Array2<f64>, target: &Array2<f64>) -> f64 {
    let b = pred.nrows() as f64;
    0.5 * (pred - target).mapv(|d| d * d).sum() / b
}

pub fn squared_error_grad(pred: &Array2<f64>, target: &Array2<f64>) -> Array2<f64> {
    let b = pred.nrows() as f64;
    (pred - target) / b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralcore::one_hot;

    #[test]
    fn confident_correct_logits_have_near_zero_cce() {
        let y = one_hot(&[3, 0, 12], 13);
        let logits = &y * 40.0;
        let loss = softmax_cross_entropy(&logits, &y);
        assert!(loss >= 0.0 && loss < 13.0 * (-40f64).exp());
    }

    #[test]
    fn equal_logits_cce_is_ln13() {
        let a = Array2::from_elem((4, 13), 0.7);
        let y = one_hot(&[0, 1, 2, 3], 13);
        assert!((softmax_cross_entropy(&a, &y) - 13f64.ln()).abs() < 1e-12);
        assert!((13f64.ln() - 2.5649).abs() < 1e-4);
    }

    #[test]
    fn zero_logits_bce_is_650_ln2() {
        let a = Array2::zeros((3, 650));
        let t = Array2::from_shape_fn((3, 650), |(i, j)| ((i + j) % 3 == 0) as u8 as f64);
        let want = 650.0 * 2f64.ln();
        assert!((binary_cross_entropy(&a, &t) - want).abs() < 1e-9);
    }

    #[test]
    fn bce_matches_probability_form_and_stays_exact_when_saturated() {
        for (a, t) in [(0.3, 0.95), (-2.0, 0.05), (4.0, 1.0)] {
            let p = 1.0 / (1.0 + (-a as f64).exp());
            let direct = -(t * p.ln() + (1.0 - t) * (1.0 - p).ln());
            let x = Array2::from_elem((1, 1), a);
            let y = Array2::from_elem((1, 1), t);
            assert!((binary_cross_entropy(&x, &y) - direct).abs() < 1e-12);
        }
        // p rounds to 1 in f64 here; the loss still carries the target's slope
        let x = Array2::from_elem((1, 1), 60.0);
        let y = Array2::from_elem((1, 1), 0.95);
        assert!((binary_cross_entropy(&x, &y) - 0.05 * 60.0).abs() < 1e-12);
        assert!((softplus(-800.0)).abs() < 1e-300 && softplus(800.0) == 800.0);
    }
}
