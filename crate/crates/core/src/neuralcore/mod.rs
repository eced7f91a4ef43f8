//! Minimal dense-network engine: forward pass, exact backpropagation, losses,
//! optimizers, gradient checking and checkpoints. Everything runs in f64.

pub mod checkpoint;
pub mod gradcheck;
pub mod loss;
pub mod optim;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distgen::samplers;
use crate::{Error, Result};

pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, grad_check_network, Differentiable, GradCheckReport};
pub use optim::{Optimizer, OptimizerKind, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Softmax,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Sigmoid => z.mapv_inplace(sigmoid),
            Activation::Softmax => softmax_rows(z),
        }
    }

    /// Map a gradient w.r.t. this activation's output to one w.r.t. its input,
    /// given the output `a`.
    fn backprop(self, a: &Array2<f64>, mut d: Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Identity => d,
            Activation::Relu => {
                Zip::from(&mut d).and(a).for_each(|g, &y| {
                    if y <= 0.0 {
                        *g = 0.0
                    }
                });
                d
            }
            Activation::Sigmoid => {
                Zip::from(&mut d).and(a).for_each(|g, &y| *g *= y * (1.0 - y));
                d
            }
            Activation::Softmax => {
                let dot = (&d * a).sum_axis(Axis(1));
                Zip::from(d.rows_mut())
                    .and(a.rows())
                    .and(&dot)
                    .for_each(|mut g, y, &s| {
                        Zip::from(&mut g).and(&y).for_each(|g, &y| *g = y * (*g - s));
                    });
                d
            }
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            in_dim,
            out_dim,
            activation,
        }
    }
}

/// Build a chain of layer specs from widths, e.g. `[650, 128, 64, 13]`.
pub fn chain(widths: &[usize], hidden: Activation, output: Activation) -> Vec<LayerSpec> {
    let n = widths.len().saturating_sub(1);
    (0..n)
        .map(|i| {
            let act = if i + 1 == n { output } else { hidden };
            LayerSpec::new(widths[i], widths[i + 1], act)
        })
        .collect()
}

/// Dense layer: `y = act(x W + b)` with `W` of shape `in_dim x out_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    specs: Vec<LayerSpec>,
    pub layers: Vec<Dense>,
}

/// Outputs of every layer from one forward pass; `outputs[0]` is the input.
#[derive(Debug, Clone)]
pub struct Activations {
    /// The input followed by each layer's output.
    pub outputs: Vec<Array2<f64>>,
    /// Pre-activation of the final layer.
    pub logits: Array2<f64>,
}

impl Activations {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
    /// Gradient w.r.t. the network input.
    pub input: Array2<f64>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.extend(g.weights.iter());
            out.extend(g.bias.iter());
        }
        out
    }
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Empty("network has no layers"));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(Error::InvalidParameter(format!("layer {i} has a zero dimension")));
        }
        if s.activation == Activation::Softmax && i + 1 != specs.len() {
            return Err(Error::InvalidParameter(format!(
                "softmax is only allowed on the final layer (found on layer {i})"
            )));
        }
        if i > 0 && specs[i - 1].out_dim != s.in_dim {
            return Err(Error::Dimension {
                expected: specs[i - 1].out_dim,
                got: s.in_dim,
            });
        }
    }
    Ok(())
}

impl Network {
    /// He-style uniform initialization `U(-sqrt(6/in), sqrt(6/in))`, zero biases.
    pub fn new(specs: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        validate_specs(&specs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .map(|s| {
                let limit = (6.0 / s.in_dim as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((s.in_dim, s.out_dim), || {
                    samplers::uniform_range(&mut rng, -limit, limit)
                });
                Dense {
                    weights,
                    bias: Array1::zeros(s.out_dim),
                }
            })
            .collect();
        Ok(Network { specs, layers })
    }

    pub fn from_parts(specs: Vec<LayerSpec>, layers: Vec<Dense>) -> Result<Self> {
        validate_specs(&specs)?;
        if specs.len() != layers.len() {
            return Err(Error::Dimension {
                expected: specs.len(),
                got: layers.len(),
            });
        }
        for (s, l) in specs.iter().zip(&layers) {
            if l.weights.dim() != (s.in_dim, s.out_dim) || l.bias.len() != s.out_dim {
                return Err(Error::Format("layer parameters do not match their spec".into()));
            }
        }
        Ok(Network { specs, layers })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn input_dim(&self) -> usize {
        self.specs[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.specs.last().unwrap().out_dim
    }

    pub fn output_activation(&self) -> Activation {
        self.specs.last().unwrap().activation
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Activations> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(x.to_owned());
        let mut logits = Array2::zeros((0, 0));
        let last = self.layers.len() - 1;
        for (i, (spec, layer)) in self.specs.iter().zip(&self.layers).enumerate() {
            let mut z = outputs.last().unwrap().dot(&layer.weights);
            z += &layer.bias;
            if i == last {
                logits = z.clone();
            }
            spec.activation.apply(&mut z);
            outputs.push(z);
        }
        Ok(Activations { outputs, logits })
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x)?.outputs.pop().unwrap())
    }

    /// Backpropagate a gradient w.r.t. the network output.
    pub fn backward(&self, acts: &Activations, d_output: Array2<f64>) -> Gradients {
        let act = self.output_activation();
        let d_logits = act.backprop(acts.output(), d_output);
        self.backward_logits(acts, d_logits)
    }

    /// Backpropagate a gradient w.r.t. the final layer's pre-activation.
    pub fn backward_logits(&self, acts: &Activations, d_logits: Array2<f64>) -> Gradients {
        let n = self.layers.len();
        let mut grads = Vec::with_capacity(n);
        let mut dz = d_logits;
        let mut d_input = None;
        for i in (0..n).rev() {
            let a_prev = &acts.outputs[i];
            let weights = a_prev.t().dot(&dz);
            let bias = dz.sum_axis(Axis(0));
            let d_prev = dz.dot(&self.layers[i].weights.t());
            grads.push(Dense { weights, bias });
            if i > 0 {
                dz = self.specs[i - 1].activation.backprop(a_prev, d_prev);
            } else {
                d_input = Some(d_prev);
            }
        }
        grads.reverse();
        Gradients {
            layers: grads,
            input: d_input.unwrap(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters layer by layer, weights (row-major) before biases.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut it = params.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = *it.next().unwrap();
            }
        }
        Ok(())
    }

    fn locate(&self, mut index: usize) -> (usize, bool, usize) {
        for (li, l) in self.layers.iter().enumerate() {
            if index < l.weights.len() {
                return (li, true, index);
            }
            index -= l.weights.len();
            if index < l.bias.len() {
                return (li, false, index);
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn param(&self, index: usize) -> f64 {
        let (li, is_w, k) = self.locate(index);
        let l = &self.layers[li];
        if is_w {
            l.weights.as_slice().unwrap()[k]
        } else {
            l.bias[k]
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let (li, is_w, k) = self.locate(index);
        let l = &mut self.layers[li];
        if is_w {
            l.weights.as_slice_mut().unwrap()[k] = value;
        } else {
            l.bias[k] = value;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

/// Copy selected rows of a row-per-example matrix.
pub fn gather_rows(x: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), x.ncols()));
    for (dst, &r) in out.rows_mut().into_iter().zip(rows) {
        dst.into_iter().zip(x.row(r)).for_each(|(d, &s)| *d = s);
    }
    out
}

/// One-hot rows for class labels.
pub fn one_hot(labels: &[usize], n_classes: usize) -> Array2<f64> {
    let mut out = Array2::zeros((labels.len(), n_classes));
    for (i, &l) in labels.iter().enumerate() {
        out[[i, l]] = 1.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_identity_net_outputs_zero() {
        let mut net = Network::new(vec![LayerSpec::new(3, 2, Activation::Identity)], 1).unwrap();
        net.set_params_flat(&[0.0; 8]).unwrap();
        let y = net.predict(array![[1.0, -2.0, 3.0]].view()).unwrap();
        assert_eq!(y, array![[0.0, 0.0]]);
    }

    #[test]
    fn uniform_logits_give_uniform_softmax() {
        let mut z = Array2::zeros((2, 13));
        softmax_rows(&mut z);
        for &p in z.iter() {
            assert!((p - 1.0 / 13.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_computed_relu_unit() {
        let net = Network::from_parts(
            vec![LayerSpec::new(1, 1, Activation::Relu)],
            vec![Dense {
                weights: array![[2.0]],
                bias: array![1.0],
            }],
        )
        .unwrap();
        let acts = net.forward(array![[3.0]].view()).unwrap();
        assert_eq!(acts.output()[[0, 0]], 7.0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Network::new(vec![], 0).is_err());
        assert!(Network::new(
            vec![
                LayerSpec::new(3, 4, Activation::Softmax),
                LayerSpec::new(4, 2, Activation::Identity)
            ],
            0
        )
        .is_err());
        assert!(Network::new(chain(&[3, 4, 2], Activation::Relu, Activation::Identity), 0).is_ok());
        assert!(Network::new(
            vec![LayerSpec::new(3, 4, Activation::Relu), LayerSpec::new(5, 2, Activation::Identity)],
            0
        )
        .is_err());
        let net = Network::new(chain(&[3, 2], Activation::Relu, Activation::Identity), 0).unwrap();
        assert!(matches!(
            net.forward(Array2::zeros((1, 4)).view()),
            Err(Error::Dimension { expected: 3, got: 4 })
        ));
    }

    #[test]
    fn zero_loss_gradient_gives_zero_parameter_gradient() {
        let net = Network::new(chain(&[5, 7, 3], Activation::Relu, Activation::Softmax), 3).unwrap();
        let x = Array2::from_shape_fn((4, 5), |(i, j)| (i * 5 + j) as f64 / 10.0 - 1.0);
        let acts = net.forward(x.view()).unwrap();
        let g = net.backward(&acts, Array2::zeros((4, 3)));
        assert!(g.flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_example_doubles_summed_gradient() {
        // Batch-mean convention: the loss gradient carries the 1/batch factor, so
        // two identical rows give exactly the single-example gradient.
        let net = Network::new(chain(&[4, 6, 3], Activation::Relu, Activation::Sigmoid), 5).unwrap();
        let x1 = array![[0.3, -0.2, 0.9, 0.1]];
        let x2 = array![[0.3, -0.2, 0.9, 0.1], [0.3, -0.2, 0.9, 0.1]];
        let t = array![[1.0, 0.0, 1.0]];
        let t2 = array![[1.0, 0.0, 1.0], [1.0, 0.0, 1.0]];
        let a1 = net.forward(x1.view()).unwrap();
        let a2 = net.forward(x2.view()).unwrap();
        let g1 = net.backward_logits(&a1, loss::bce_logit_grad(a1.output(), &t));
        let g2 = net.backward_logits(&a2, loss::bce_logit_grad(a2.output(), &t2));
        for (a, b) in g1.flat().iter().zip(g2.flat()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }

    #[test]
    fn flat_params_round_trip() {
        let mut net = Network::new(chain(&[3, 4, 2], Activation::Relu, Activation::Identity), 9).unwrap();
        let p = net.params_flat();
        assert_eq!(p.len(), 3 * 4 + 4 + 4 * 2 + 2);
        for (i, &v) in p.iter().enumerate() {
            assert_eq!(net.param(i), v);
        }
        net.set_param(17, 42.0);
        assert_eq!(net.params_flat()[17], 42.0);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = Network::new(chain(&[650, 128, 13], Activation::Relu, Activation::Softmax), 1).unwrap();
        let b = Network::new(chain(&[650, 128, 13], Activation::Relu, Activation::Softmax), 1).unwrap();
        assert_eq!(a, b);
        let limit = (6.0f64 / 650.0).sqrt();
        assert!(a.layers[0].weights.iter().all(|w| w.abs() <= limit));
        assert!(a.layers[0].bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut z = Array2::from_shape_fn((50, 13), |(i, j)| ((i * 31 + j * 17) % 23) as f64 - 11.0);
        softmax_rows(&mut z);
        for row in z.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }
}
