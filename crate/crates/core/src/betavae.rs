//! β-VAE over CDF grids.
//!
//! The encoder is a single network `input -> 512 -> 64 -> 2L` whose identity
//! output holds `[mu | logvar]`; the two halves are the mean and log-variance
//! heads over the shared 64-unit trunk. The decoder is `L -> 64 -> 512 -> input`
//! with a sigmoid output. Training minimizes the batch mean of
//! `BCE(decoded, input) + beta * KL(q(z|x) || N(0, I))`, BCE summed over cells.

use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cdfcodec::{CdfGrid, GridShape, SeriesStats};
use crate::classifier::{split_indices, Split};
use crate::distgen::{samplers, splitmix64, Family, LabeledDataset};
use crate::latentlab::{linspace, Bounds};
use crate::neuralcore::{
    chain, gather_rows, grad_check, loss, Activation, Checkpoint, Differentiable, GradCheckReport,
    Network, Optimizer, TrainConfig,
};
use crate::{Error, Result};

pub const ENCODER_HIDDEN: [usize; 2] = [512, 64];
pub const DECODER_HIDDEN: [usize; 2] = [64, 512];
pub const LOGVAR_LIMIT: f64 = 10.0;
pub const DEFAULT_BETA: f64 = 3.0;
pub const CHECKPOINT_KIND: &str = "bvae";

/// `-1/2 * sum(1 + logvar - mu^2 - exp(logvar))`, the KL divergence of
/// `N(mu, diag(exp(logvar)))` from the standard normal.
pub fn kl_term(mu: &[f64], logvar: &[f64]) -> f64 {
    mu.iter()
        .zip(logvar)
        .map(|(&m, &lv)| -0.5 * (1.0 + lv - m * m - lv.exp()))
        .sum()
}

/// `mu + exp(logvar / 2) * eps`.
pub fn reparameterize(mu: &[f64], logvar: &[f64], eps: &[f64]) -> Vec<f64> {
    mu.iter()
        .zip(logvar)
        .zip(eps)
        .map(|((&m, &lv), &e)| m + (0.5 * lv).exp() * e)
        .collect()
}

/// Deterministic encoding of one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// A DOE variable placed on the latent map at its encoder mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPoint {
    pub z: Vec<f64>,
    /// Posterior standard deviation, `exp(logvar / 2) > 0`.
    pub sigma: Vec<f64>,
    pub label: Family,
    pub stats: SeriesStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub encoder: Network,
    pub decoder: Network,
    pub beta: f64,
    pub latent_dim: usize,
    pub shape: GridShape,
}

/// Every intermediate of one stochastic forward pass.
struct Pass {
    enc: crate::neuralcore::Activations,
    mu: Array2<f64>,
    logvar: Array2<f64>,
    /// 1 where the raw log-variance lies inside the clamp, else 0.
    lv_live: Array2<f64>,
    eps: Array2<f64>,
    dec: crate::neuralcore::Activations,
}

/// Batch-mean loss components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VaeLoss {
    pub bce: f64,
    pub kl: f64,
}

impl VaeLoss {
    pub fn total(&self, beta: f64) -> f64 {
        self.bce + beta * self.kl
    }
}

impl VaeModel {
    pub fn new(shape: GridShape, latent_dim: usize, beta: f64, seed: u64) -> Result<Self> {
        shape.validate()?;
        if !(1..=2).contains(&latent_dim) {
            return Err(Error::InvalidParameter(format!(
                "latent_dim must be 1 or 2, got {latent_dim}"
            )));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
        }
        let d = shape.len();
        let encoder = Network::new(
            chain(
                &[d, ENCODER_HIDDEN[0], ENCODER_HIDDEN[1], 2 * latent_dim],
                Activation::Relu,
                Activation::Identity,
            ),
            seed,
        )?;
        let decoder = Network::new(
            chain(
                &[latent_dim, DECODER_HIDDEN[0], DECODER_HIDDEN[1], d],
                Activation::Relu,
                Activation::Sigmoid,
            ),
            splitmix64(seed ^ 0xDEC0_DE),
        )?;
        Ok(VaeModel {
            encoder,
            decoder,
            beta,
            latent_dim,
            shape,
        })
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    /// Means and clamped log-variances for a batch.
    pub fn encode_batch(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        let out = self.encoder.predict(x)?;
        let l = self.latent_dim;
        let mu = out.slice(s![.., ..l]).to_owned();
        let logvar = out.slice(s![.., l..]).mapv(|v| v.clamp(-LOGVAR_LIMIT, LOGVAR_LIMIT));
        Ok((mu, logvar))
    }

    pub fn decode_batch(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.decoder.predict(z)
    }

    fn pass(&self, x: ArrayView2<f64>, eps: &Array2<f64>) -> Result<Pass> {
        let l = self.latent_dim;
        if eps.dim() != (x.nrows(), l) {
            return Err(Error::Dimension {
                expected: l,
                got: eps.ncols(),
            });
        }
        let enc = self.encoder.forward(x)?;
        let out = enc.output();
        let mu = out.slice(s![.., ..l]).to_owned();
        let raw = out.slice(s![.., l..]);
        let logvar = raw.mapv(|v| v.clamp(-LOGVAR_LIMIT, LOGVAR_LIMIT));
        let lv_live = raw.mapv(|v| (v.abs() <= LOGVAR_LIMIT) as u8 as f64);
        let mut z = mu.clone();
        Zip::from(&mut z).and(&logvar).and(eps).for_each(|z, &lv, &e| *z += (0.5 * lv).exp() * e);
        let dec = self.decoder.forward(z.view())?;
        Ok(Pass {
            enc,
            mu,
            logvar,
            lv_live,
            eps: eps.clone(),
            dec,
        })
    }

    fn pass_loss(pass: &Pass, x: &Array2<f64>) -> VaeLoss {
        let b = x.nrows() as f64;
        let kl: f64 = pass
            .mu
            .iter()
            .zip(&pass.logvar)
            .map(|(&m, &lv)| -0.5 * (1.0 + lv - m * m - lv.exp()))
            .sum();
        VaeLoss {
            bce: loss::binary_cross_entropy(&pass.dec.logits, x),
            kl: kl / b,
        }
    }

    /// Loss and parameter gradients (encoder, decoder) at fixed noise `eps`.
    fn loss_and_grads(
        &self,
        x: &Array2<f64>,
        eps: &Array2<f64>,
    ) -> Result<(VaeLoss, crate::neuralcore::Gradients, crate::neuralcore::Gradients)> {
        let p = self.pass(x.view(), eps)?;
        let vl = Self::pass_loss(&p, x);
        let b = x.nrows() as f64;
        let dec_grads = self.decoder.backward_logits(&p.dec, loss::bce_logit_grad(p.dec.output(), x));
        let d_z = &dec_grads.input;
        let l = self.latent_dim;
        let mut d_out = Array2::zeros((x.nrows(), 2 * l));
        for r in 0..x.nrows() {
            for j in 0..l {
                let (m, lv, e) = (p.mu[[r, j]], p.logvar[[r, j]], p.eps[[r, j]]);
                let sigma = (0.5 * lv).exp();
                d_out[[r, j]] = d_z[[r, j]] + self.beta * m / b;
                let d_lv = d_z[[r, j]] * e * 0.5 * sigma + self.beta * 0.5 * (lv.exp() - 1.0) / b;
                d_out[[r, l + j]] = d_lv * p.lv_live[[r, j]];
            }
        }
        let enc_grads = self.encoder.backward(&p.enc, d_out);
        Ok((vl, enc_grads, dec_grads))
    }

    /// Loss with the posterior mean in place of a sample; the reconstruction
    /// term is what the training history reports as test BCE.
    pub fn mean_loss(&self, x: &Array2<f64>) -> Result<VaeLoss> {
        let mut total = VaeLoss::default();
        for start in (0..x.nrows()).step_by(1024) {
            let end = (start + 1024).min(x.nrows());
            let xb = x.slice(s![start..end, ..]);
            let (mu, logvar) = self.encode_batch(xb)?;
            let recon = self.decoder.forward(mu.view())?;
            let rows = loss::bce_rows(&recon.logits, &xb.to_owned());
            total.bce += rows.iter().sum::<f64>();
            total.kl += mu
                .iter()
                .zip(&logvar)
                .map(|(&m, &lv)| -0.5 * (1.0 + lv - m * m - lv.exp()))
                .sum::<f64>();
        }
        let n = x.nrows() as f64;
        Ok(VaeLoss {
            bce: total.bce / n,
            kl: total.kl / n,
        })
    }

    pub fn to_checkpoint(&self, config: &TrainConfig) -> Checkpoint {
        Checkpoint {
            kind: CHECKPOINT_KIND.into(),
            networks: vec![self.encoder.clone(), self.decoder.clone()],
            meta: json!({
                "beta": self.beta,
                "latent_dim": self.latent_dim,
                "grid": self.shape,
                "config": config,
            }),
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        if ckpt.kind != CHECKPOINT_KIND || ckpt.networks.len() != 2 {
            return Err(Error::Format(format!(
                "expected a bvae checkpoint, found `{}`",
                ckpt.kind
            )));
        }
        let beta = ckpt.meta["beta"]
            .as_f64()
            .ok_or_else(|| Error::Format("checkpoint lacks beta".into()))?;
        let latent_dim = ckpt.meta["latent_dim"]
            .as_u64()
            .ok_or_else(|| Error::Format("checkpoint lacks latent_dim".into()))? as usize;
        let shape: GridShape = serde_json::from_value(ckpt.meta["grid"].clone())?;
        let mut nets = ckpt.networks.into_iter();
        let (encoder, decoder) = (nets.next().unwrap(), nets.next().unwrap());
        if encoder.input_dim() != shape.len()
            || encoder.output_dim() != 2 * latent_dim
            || decoder.input_dim() != latent_dim
            || decoder.output_dim() != shape.len()
        {
            return Err(Error::Format("bvae networks disagree with header".into()));
        }
        Ok(VaeModel {
            encoder,
            decoder,
            beta,
            latent_dim,
            shape,
        })
    }
}

/// Standard-normal noise for one batch.
fn draw_eps(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || samplers::standard_normal(rng))
}

/// One row of the training history. Epoch 0 is evaluated before any update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaeEpoch {
    pub epoch: usize,
    /// Mean sampled BCE over the epoch's batches (posterior-mean BCE at epoch 0).
    pub train_bce: f64,
    pub train_kl: f64,
    /// Reconstruction BCE of the held-out set decoded from the posterior mean.
    pub test_bce: f64,
    pub test_kl: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedVae {
    pub model: VaeModel,
    pub history: Vec<VaeEpoch>,
    pub split: Split,
}

fn grid_matrix(ds: &LabeledDataset) -> Result<Array2<f64>> {
    let d = ds.shape.len();
    let mut cells = Vec::with_capacity(ds.len() * d);
    for e in &ds.entries {
        cells.extend_from_slice(&e.grid.cells);
    }
    Array2::from_shape_vec((ds.len(), d), cells).map_err(|e| Error::Format(e.to_string()))
}

/// Fit a β-VAE on a DOE with a seeded 67/33 split.
pub fn train_bvae(
    dataset: &LabeledDataset,
    beta: f64,
    latent_dim: usize,
    config: &TrainConfig,
) -> Result<TrainedVae> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut model = VaeModel::new(dataset.shape, latent_dim, beta, config.seed)?;
    let x = grid_matrix(dataset)?;
    let split = split_indices(x.nrows(), config.seed);
    let train = gather_rows(&x, &split.train);
    let test = gather_rows(&x, &split.test);
    let test_loss = |m: &VaeModel| -> Result<VaeLoss> {
        if test.nrows() == 0 {
            Ok(VaeLoss {
                bce: f64::NAN,
                kl: f64::NAN,
            })
        } else {
            m.mean_loss(&test)
        }
    };

    let start_train = model.mean_loss(&train)?;
    let start_test = test_loss(&model)?;
    let mut history = vec![VaeEpoch {
        epoch: 0,
        train_bce: start_train.bce,
        train_kl: start_train.kl,
        test_bce: start_test.bce,
        test_kl: start_test.kl,
    }];

    let mut enc_opt = Optimizer::new(*config, &model.encoder)?;
    let mut dec_opt = Optimizer::new(*config, &model.decoder)?;
    let mut order_rng = ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ 0xE90C_5));
    let mut noise_rng = ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ 0x0015E));
    let mut order: Vec<usize> = (0..train.nrows()).collect();
    for epoch in 1..=config.epochs {
        for i in (1..order.len()).rev() {
            let j = rand::Rng::random_range(&mut order_rng, 0..=i);
            order.swap(i, j);
        }
        let mut sum = VaeLoss::default();
        for batch in order.chunks(config.batch_size) {
            let xb = gather_rows(&train, batch);
            let eps = draw_eps(&mut noise_rng, batch.len(), latent_dim);
            let (vl, enc_g, dec_g) = model.loss_and_grads(&xb, &eps)?;
            if !vl.total(beta).is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    reason: format!("non-finite loss (bce {}, kl {})", vl.bce, vl.kl),
                });
            }
            let diverged = |e: Error| Error::Diverged {
                epoch,
                reason: e.to_string(),
            };
            enc_opt.step(&mut model.encoder, &enc_g).map_err(diverged)?;
            dec_opt.step(&mut model.decoder, &dec_g).map_err(diverged)?;
            sum.bce += vl.bce * batch.len() as f64;
            sum.kl += vl.kl * batch.len() as f64;
        }
        let n = train.nrows() as f64;
        let t = test_loss(&model)?;
        history.push(VaeEpoch {
            epoch,
            train_bce: sum.bce / n,
            train_kl: sum.kl / n,
            test_bce: t.bce,
            test_kl: t.kl,
        });
    }
    Ok(TrainedVae {
        model,
        history,
        split,
    })
}

/// Posterior mean and standard deviation of one grid.
pub fn encode(model: &VaeModel, grid: &CdfGrid) -> Result<Encoding> {
    if grid.shape != model.shape {
        return Err(Error::Dimension {
            expected: model.shape.len(),
            got: grid.cells.len(),
        });
    }
    let x = ArrayView2::from_shape((1, grid.cells.len()), &grid.cells)
        .map_err(|e| Error::Format(e.to_string()))?;
    let (mu, logvar) = model.encode_batch(x)?;
    Ok(Encoding {
        mu: mu.row(0).to_vec(),
        sigma: logvar.row(0).iter().map(|&lv| (0.5 * lv).exp()).collect(),
    })
}

/// Latent points of every entry, in dataset order.
pub fn encode_dataset(model: &VaeModel, dataset: &LabeledDataset) -> Result<Vec<LatentPoint>> {
    if dataset.shape != model.shape {
        return Err(Error::Dimension {
            expected: model.shape.len(),
            got: dataset.shape.len(),
        });
    }
    let x = grid_matrix(dataset)?;
    let mut points = Vec::with_capacity(dataset.len());
    for start in (0..x.nrows()).step_by(1024) {
        let end = (start + 1024).min(x.nrows());
        let (mu, logvar) = model.encode_batch(x.slice(s![start..end, ..]))?;
        for (r, e) in dataset.entries[start..end].iter().enumerate() {
            points.push(LatentPoint {
                z: mu.row(r).to_vec(),
                sigma: logvar.row(r).iter().map(|&lv| (0.5 * lv).exp()).collect(),
                label: e.family,
                stats: e.stats,
            });
        }
    }
    Ok(points)
}

/// Decoder output for one latent vector as a grid of intensities in (0, 1).
pub fn decode(model: &VaeModel, z: &[f64]) -> Result<CdfGrid> {
    if z.len() != model.latent_dim {
        return Err(Error::Dimension {
            expected: model.latent_dim,
            got: z.len(),
        });
    }
    let zb = ArrayView2::from_shape((1, z.len()), z).map_err(|e| Error::Format(e.to_string()))?;
    let out = model.decode_batch(zb)?;
    Ok(CdfGrid {
        shape: model.shape,
        cells: out.row(0).to_vec(),
    })
}

/// A decoded lattice point.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCell {
    pub z: Vec<f64>,
    pub grid: CdfGrid,
}

/// Decode an `nx` by `ny` lattice spanning `bounds` corner to corner, row-major
/// with the first latent axis varying fastest. A 1-D model uses the first axis
/// only and requires `ny == 1`.
pub fn generate_latent_grid(
    model: &VaeModel,
    bounds: &Bounds,
    nx: usize,
    ny: usize,
) -> Result<Vec<GeneratedCell>> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidParameter("lattice resolution must be positive".into()));
    }
    if model.latent_dim == 1 && ny != 1 {
        return Err(Error::InvalidParameter("a 1-D latent lattice needs ny = 1".into()));
    }
    let xs = linspace(bounds.lo[0], bounds.hi[0], nx);
    let ys = linspace(bounds.lo[1], bounds.hi[1], ny);
    let l = model.latent_dim;
    let mut z = Array2::zeros((nx * ny, l));
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            z[[j * nx + i, 0]] = x;
            if l == 2 {
                z[[j * nx + i, 1]] = y;
            }
        }
    }
    let out = model.decode_batch(z.view())?;
    Ok(z.axis_iter(Axis(0))
        .zip(out.axis_iter(Axis(0)))
        .map(|(zr, g)| GeneratedCell {
            z: zr.to_vec(),
            grid: CdfGrid {
                shape: model.shape,
                cells: g.to_vec(),
            },
        })
        .collect())
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// The 1st to 99th percentile box of the encodings, widened by 10% of its
/// extent (5% per side). Unused axes of a 1-D model collapse to `[0, 0]`.
pub fn default_bounds(points: &[LatentPoint]) -> Result<Bounds> {
    let first = points.first().ok_or(Error::Empty("latent points"))?;
    let mut lo = [0.0; 2];
    let mut hi = [0.0; 2];
    for axis in 0..first.z.len().min(2) {
        let mut v: Vec<f64> = points.iter().map(|p| p.z[axis]).collect();
        v.sort_by(f64::total_cmp);
        let (a, b) = (percentile(&v, 0.01), percentile(&v, 0.99));
        let pad = 0.05 * (b - a).max(1e-9);
        lo[axis] = a - pad;
        hi[axis] = b + pad;
    }
    Bounds::new(lo, hi)
}

/// The full VAE loss at fixed noise, as a function of all encoder then decoder
/// parameters.
pub struct VaeObjective<'a> {
    pub model: &'a mut VaeModel,
    pub inputs: &'a Array2<f64>,
    pub eps: &'a Array2<f64>,
}

impl Differentiable for VaeObjective<'_> {
    fn param_count(&self) -> usize {
        self.model.param_count()
    }
    fn param(&self, index: usize) -> f64 {
        let n = self.model.encoder.param_count();
        if index < n {
            self.model.encoder.param(index)
        } else {
            self.model.decoder.param(index - n)
        }
    }
    fn set_param(&mut self, index: usize, value: f64) {
        let n = self.model.encoder.param_count();
        if index < n {
            self.model.encoder.set_param(index, value)
        } else {
            self.model.decoder.set_param(index - n, value)
        }
    }
    fn loss(&self) -> f64 {
        let p = self.model.pass(self.inputs.view(), self.eps).expect("shapes checked");
        VaeModel::pass_loss(&p, self.inputs).total(self.model.beta)
    }
    fn loss_and_grad(&self) -> (f64, Vec<f64>) {
        let (vl, enc, dec) = self.model.loss_and_grads(self.inputs, self.eps).expect("shapes checked");
        let mut g = enc.flat();
        g.extend(dec.flat());
        (vl.total(self.model.beta), g)
    }
}

/// Gradient check of the full VAE loss through the reparameterization at
/// noise drawn from `seed`.
pub fn grad_check_vae(
    model: &mut VaeModel,
    inputs: &Array2<f64>,
    h: f64,
    n_samples: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    if inputs.ncols() != model.shape.len() {
        return Err(Error::Dimension {
            expected: model.shape.len(),
            got: inputs.ncols(),
        });
    }
    let eps = draw_eps(&mut ChaCha8Rng::seed_from_u64(seed), inputs.nrows(), model.latent_dim);
    let mut obj = VaeObjective {
        model,
        inputs,
        eps: &eps,
    };
    Ok(grad_check(&mut obj, h, n_samples, seed))
}

/// CSV of latent points: `z…, sigma…, family_id, entropy, skewness, ks`.
pub fn latent_csv(points: &[LatentPoint]) -> String {
    let dim = points.first().map_or(0, |p| p.z.len());
    let mut out = String::new();
    let head: Vec<String> = (1..=dim)
        .map(|i| format!("z{i}"))
        .chain((1..=dim).map(|i| format!("sigma{i}")))
        .chain(["family_id", "entropy", "skewness", "ks"].map(String::from))
        .collect();
    out.push_str(&head.join(","));
    out.push('\n');
    for p in points {
        for v in p.z.iter().chain(&p.sigma) {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.label.id(),
            p.stats.entropy,
            p.stats.skewness,
            p.stats.ks_uniform
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distgen::build_doe;

    #[test]
    fn kl_reference_values() {
        assert_eq!(kl_term(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert!((kl_term(&[1.0, 0.0], &[0.0, 0.0]) - 0.5).abs() < 1e-15);
        assert!(kl_term(&[0.0], &[1.0]) > 0.0);
    }

    #[test]
    fn reparameterize_cases() {
        assert_eq!(reparameterize(&[0.3, -1.0], &[0.4, 2.0], &[0.0, 0.0]), vec![0.3, -1.0]);
        assert_eq!(reparameterize(&[2.5], &[0.0], &[1.0]), vec![3.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| reparameterize(&[0.7], &[0.0], &[samplers::standard_normal(&mut rng)])[0])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.7).abs() < 0.02);
    }

    fn small_model(latent_dim: usize, beta: f64) -> VaeModel {
        // shrink the 650-wide ends; the hidden widths are fixed
        VaeModel::new(GridShape::new(4, 3).unwrap(), latent_dim, beta, 11).unwrap()
    }

    fn small_inputs(seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((5, 12), || samplers::unit(&mut rng))
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (dim, beta) in [(2, 3.0), (1, 3.0), (2, 0.0)] {
            let mut m = small_model(dim, beta);
            let x = small_inputs(dim as u64);
            let r = grad_check_vae(&mut m, &x, 1e-5, 400, 9).unwrap();
            assert_eq!(r.checked, 400);
            assert!(r.max_relative_error < 1e-4, "dim {dim} beta {beta}: {r:?}");
        }
    }

    #[test]
    fn clamped_logvar_has_no_gradient() {
        let mut m = small_model(2, 3.0);
        // push the logvar head far beyond the clamp
        let last = m.encoder.layers.len() - 1;
        m.encoder.layers[last].bias[2] = 50.0;
        m.encoder.layers[last].bias[3] = -50.0;
        let x = small_inputs(3);
        let eps = draw_eps(&mut ChaCha8Rng::seed_from_u64(0), 5, 2);
        let (_, enc, _) = m.loss_and_grads(&x, &eps).unwrap();
        assert_eq!(enc.layers[last].bias[2], 0.0);
        assert_eq!(enc.layers[last].bias[3], 0.0);
        let (_, lv) = m.encode_batch(x.view()).unwrap();
        assert!(lv.column(0).iter().all(|&v| v == LOGVAR_LIMIT));
        assert!(lv.column(1).iter().all(|&v| v == -LOGVAR_LIMIT));
    }

    #[test]
    fn decode_is_in_unit_interval_and_lattice_hits_corners() {
        let m = small_model(2, 3.0);
        let g = decode(&m, &[0.0, 0.0]).unwrap();
        assert!(g.cells.iter().all(|&c| c > 0.0 && c < 1.0));
        let b = Bounds::new([-1.0, -2.0], [3.0, 0.5]).unwrap();
        let cells = generate_latent_grid(&m, &b, 2, 2).unwrap();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[0].z, vec![-1.0, -2.0]);
        assert_eq!(cells[1].z, vec![3.0, -2.0]);
        assert_eq!(cells[3].z, vec![3.0, 0.5]);
        for c in &cells {
            assert_eq!(c.grid, decode(&m, &c.z).unwrap());
        }
        assert!(decode(&m, &[0.0]).is_err());
    }

    #[test]
    fn training_reduces_reconstruction_and_is_deterministic() {
        let ds = build_doe(8, GridShape::new(8, 6).unwrap(), 4).unwrap();
        let mut cfg = TrainConfig::rmsprop();
        cfg.epochs = 15;
        cfg.batch_size = 16;
        cfg.seed = 2;
        let a = train_bvae(&ds, 3.0, 2, &cfg).unwrap();
        assert_eq!(a.history.len(), 16);
        assert_eq!(a.history[0].epoch, 0);
        let first = a.history[0].test_bce;
        let last = a.history.last().unwrap().test_bce;
        assert!(last < first, "{first} -> {last}");
        let b = train_bvae(&ds, 3.0, 2, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);

        let pts = encode_dataset(&a.model, &ds).unwrap();
        assert_eq!(pts.len(), ds.len());
        let one = encode(&a.model, &ds.entries[7].grid).unwrap();
        assert_eq!(one.mu, pts[7].z);
        assert!(pts.iter().all(|p| p.sigma.iter().all(|&s| s > 0.0)));
        let csv = latent_csv(&pts);
        assert!(csv.starts_with("z1,z2,sigma1,sigma2,family_id,entropy,skewness,ks\n"));
        assert_eq!(csv.lines().count(), ds.len() + 1);

        let one_d = train_bvae(&ds, 3.0, 1, &cfg).unwrap();
        assert_eq!(one_d.model.encoder.output_dim(), 2);
    }

    #[test]
    fn checkpoint_records_beta_and_latent_dim() {
        let m = small_model(1, 0.5);
        let ckpt = m.to_checkpoint(&TrainConfig::rmsprop());
        assert_eq!(ckpt.meta["beta"], 0.5);
        assert_eq!(ckpt.meta["latent_dim"], 1);
        let mut bytes = Vec::new();
        ckpt.write(&mut bytes).unwrap();
        let back = VaeModel::from_checkpoint(Checkpoint::read(&bytes[..]).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn default_bounds_cover_the_bulk() {
        let pts: Vec<LatentPoint> = (0..101)
            .map(|i| LatentPoint {
                z: vec![i as f64, -(i as f64) / 10.0],
                sigma: vec![1.0, 1.0],
                label: Family::Beta,
                stats: SeriesStats::default(),
            })
            .collect();
        let b = default_bounds(&pts).unwrap();
        assert!((b.lo[0] - (1.0 - 4.9)).abs() < 1e-12);
        assert!((b.hi[0] - (99.0 + 4.9)).abs() < 1e-12);
        assert!((b.lo[1] - (-9.9 - 0.49)).abs() < 1e-12);
    }
}
