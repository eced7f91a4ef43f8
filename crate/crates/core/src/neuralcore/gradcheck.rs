//! Central finite-difference gradient checking.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss, Activation, Network};
use crate::{Error, Result};

/// A scalar objective over a flat parameter vector with an analytic gradient.
pub trait Differentiable {
    fn param_count(&self) -> usize;
    fn param(&self, index: usize) -> f64;
    fn set_param(&mut self, index: usize, value: f64);
    fn loss(&self) -> f64;
    fn loss_and_grad(&self) -> (f64, Vec<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    pub loss: f64,
}

/// Compare analytic gradients with `(L(p + h) - L(p - h)) / 2h` on up to
/// `n_samples` randomly chosen parameters (all of them if there are fewer).
///
/// The relative error of a pair is `|a - n| / max(|a|, |n|, floor)` where
/// `floor = 1e-6 * max(1, |L|)`: gradients below the floor sit at the level of
/// round-off in the difference quotient and are compared on an absolute scale.
pub fn grad_check<D: Differentiable + ?Sized>(
    model: &mut D,
    h: f64,
    n_samples: usize,
    seed: u64,
) -> GradCheckReport {
    let (loss, analytic) = model.loss_and_grad();
    let count = model.param_count();
    let mut indices: Vec<usize> = (0..count).collect();
    let take = n_samples.min(count);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..take {
        let j = rng.random_range(i..count);
        indices.swap(i, j);
    }
    indices.truncate(take);
    indices.sort_unstable();

    let floor = 1e-6 * loss.abs().max(1.0);
    let mut max_rel = 0.0f64;
    for &i in &indices {
        let orig = model.param(i);
        model.set_param(i, orig + h);
        let up = model.loss();
        model.set_param(i, orig - h);
        let down = model.loss();
        model.set_param(i, orig);
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        max_rel = max_rel.max(rel);
    }
    GradCheckReport {
        max_relative_error: max_rel,
        checked: take,
        loss,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Softmax output with categorical cross-entropy.
    CrossEntropy,
    /// Sigmoid output with binary cross-entropy.
    BinaryCrossEntropy,
    /// Any output with half squared error.
    SquaredError,
}

/// A network, a fixed batch and a loss.
pub struct NetObjective<'a> {
    pub net: &'a mut Network,
    pub inputs: &'a Array2<f64>,
    pub targets: &'a Array2<f64>,
    pub loss: LossKind,
}

impl NetObjective<'_> {
    fn evaluate(&self, with_grad: bool) -> (f64, Option<Vec<f64>>) {
        let acts = self.net.forward(self.inputs.view()).expect("shape checked on construction");
        let out = acts.output();
        let (l, d_logits, generic) = match self.loss {
            LossKind::CrossEntropy => (
                loss::softmax_cross_entropy(&acts.logits, self.targets),
                loss::cce_logit_grad(out, self.targets),
                false,
            ),
            LossKind::BinaryCrossEntropy => (
                loss::binary_cross_entropy(&acts.logits, self.targets),
                loss::bce_logit_grad(out, self.targets),
                false,
            ),
            LossKind::SquaredError => (
                loss::squared_error(out, self.targets),
                loss::squared_error_grad(out, self.targets),
                true,
            ),
        };
        if !with_grad {
            return (l, None);
        }
        let grads = if generic {
            self.net.backward(&acts, d_logits)
        } else {
            self.net.backward_logits(&acts, d_logits)
        };
        (l, Some(grads.flat()))
    }
}

impl Differentiable for NetObjective<'_> {
    fn param_count(&self) -> usize {
        self.net.param_count()
    }
    fn param(&self, index: usize) -> f64 {
        self.net.param(index)
    }
    fn set_param(&mut self, index: usize, value: f64) {
        self.net.set_param(index, value)
    }
    fn loss(&self) -> f64 {
        self.evaluate(false).0
    }
    fn loss_and_grad(&self) -> (f64, Vec<f64>) {
        let (l, g) = self.evaluate(true);
        (l, g.unwrap())
    }
}

/// Gradient check of a network on one batch.
pub fn grad_check_network(
    net: &mut Network,
    inputs: &Array2<f64>,
    targets: &Array2<f64>,
    loss: LossKind,
    h: f64,
    n_samples: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    if inputs.ncols() != net.input_dim() {
        return Err(Error::Dimension {
            expected: net.input_dim(),
            got: inputs.ncols(),
        });
    }
    if targets.ncols() != net.output_dim() || targets.nrows() != inputs.nrows() {
        return Err(Error::Dimension {
            expected: net.output_dim(),
            got: targets.ncols(),
        });
    }
    let required = match loss {
        LossKind::CrossEntropy => Some(Activation::Softmax),
        LossKind::BinaryCrossEntropy => Some(Activation::Sigmoid),
        LossKind::SquaredError => None,
    };
    if let Some(act) = required {
        if net.output_activation() != act {
            return Err(Error::InvalidParameter(format!(
                "{loss:?} requires a {act:?} output layer"
            )));
        }
    }
    let mut objective = NetObjective {
        net,
        inputs,
        targets,
        loss,
    };
    Ok(grad_check(&mut objective, h, n_samples, seed))
}
