//! Adaptive-rate optimizers.

use serde::{Deserialize, Serialize};

use super::{Gradients, Network};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// `a <- rho a + (1 - rho) g^2;  theta <- theta - lr g / (sqrt(a) + eps)`
    RmsProp,
    /// Zeiler's recurrence, scaled by `lr`:
    /// `a <- rho a + (1 - rho) g^2;  d = -sqrt(u + eps) / sqrt(a + eps) g;
    ///  u <- rho u + (1 - rho) d^2;  theta <- theta + lr d`
    Adadelta,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rmsprop" => Ok(OptimizerKind::RmsProp),
            "adadelta" => Ok(OptimizerKind::Adadelta),
            _ => Err(Error::InvalidParameter(format!("unknown optimizer `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::rmsprop()
    }
}

impl TrainConfig {
    pub fn rmsprop() -> Self {
        TrainConfig {
            batch_size: 128,
            epochs: 50,
            learning_rate: 1e-3,
            rho: 0.9,
            epsilon: 1e-8,
            optimizer: OptimizerKind::RmsProp,
            seed: 0,
        }
    }

    pub fn adadelta() -> Self {
        TrainConfig {
            batch_size: 128,
            epochs: 50,
            learning_rate: 1.0,
            rho: 0.95,
            epsilon: 1e-6,
            optimizer: OptimizerKind::Adadelta,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning_rate must be positive".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidParameter("rho must lie in (0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Per-parameter optimizer state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    config: TrainConfig,
    /// Running mean of squared gradients, one block per layer (weights then bias).
    grad_sq: Vec<Vec<f64>>,
    /// Running mean of squared updates (Adadelta only).
    update_sq: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(config: TrainConfig, net: &Network) -> Result<Self> {
        config.validate()?;
        let blocks: Vec<Vec<f64>> = net
            .layers
            .iter()
            .map(|l| vec![0.0; l.weights.len() + l.bias.len()])
            .collect();
        let update_sq = match config.optimizer {
            OptimizerKind::Adadelta => blocks.clone(),
            OptimizerKind::RmsProp => Vec::new(),
        };
        Ok(Optimizer {
            config,
            grad_sq: blocks,
            update_sq,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Apply one update. Fails without touching the network if any gradient is
    /// non-finite.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        for (i, g) in grads.layers.iter().enumerate() {
            if !g.weights.iter().chain(g.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::NonFiniteGradient(i));
            }
        }
        let TrainConfig {
            learning_rate: lr,
            rho,
            epsilon: eps,
            ..
        } = self.config;
        for (li, (layer, g)) in net.layers.iter_mut().zip(&grads.layers).enumerate() {
            let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
            let gs = g.weights.iter().chain(g.bias.iter());
            match self.config.optimizer {
                OptimizerKind::RmsProp => {
                    for ((p, &g), a) in params.zip(gs).zip(self.grad_sq[li].iter_mut()) {
                        *a = rho * *a + (1.0 - rho) * g * g;
                        *p -= lr * g / (a.sqrt() + eps);
                    }
                }
                OptimizerKind::Adadelta => {
                    let acc = self.grad_sq[li].iter_mut().zip(self.update_sq[li].iter_mut());
                    for ((p, &g), (a, u)) in params.zip(gs).zip(acc) {
                        *a = rho * *a + (1.0 - rho) * g * g;
                        let d = -((*u + eps).sqrt() / (*a + eps).sqrt()) * g;
                        *u = rho * *u + (1.0 - rho) * d * d;
                        *p += lr * d;
                    }
                }
            }
        }
        Ok(())
    }
}
