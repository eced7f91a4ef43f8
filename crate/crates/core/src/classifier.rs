//! Distribution-family classifiers: 650 -> 128 -> 64 -> 13 on CDF grids and
//! latent -> 1024 -> 64 -> 13 on encoder means. Both end in a softmax and train
//! on categorical cross-entropy with a seeded 67/33 train/test split.

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::betavae::LatentPoint;
use crate::cdfcodec::{CdfGrid, GridShape};
use crate::distgen::{splitmix64, Family, LabeledDataset, N_FAMILIES};
use crate::neuralcore::{
    chain, gather_rows, loss, one_hot, Activation, Checkpoint, Network, Optimizer, TrainConfig,
};
use crate::{Error, Result};

pub const TRAIN_FRACTION: f64 = 0.67;
pub const GRID_HIDDEN: [usize; 2] = [128, 64];
pub const LATENT_HIDDEN: [usize; 2] = [1024, 64];

/// Row-per-example features with family labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
}

impl LabeledMatrix {
    pub fn new(features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Dimension {
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= N_FAMILIES) {
            return Err(Error::InvalidFamily(bad as u32));
        }
        Ok(LabeledMatrix { features, labels })
    }

    pub fn from_grids<'a>(grids: impl IntoIterator<Item = (&'a CdfGrid, usize)>) -> Result<Self> {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut width = None;
        for (g, label) in grids {
            let w = *width.get_or_insert(g.cells.len());
            if g.cells.len() != w {
                return Err(Error::Dimension {
                    expected: w,
                    got: g.cells.len(),
                });
            }
            rows.extend_from_slice(&g.cells);
            labels.push(label);
        }
        let width = width.ok_or(Error::Empty("no grids"))?;
        let features = Array2::from_shape_vec((labels.len(), width), rows)
            .map_err(|e| Error::Format(e.to_string()))?;
        LabeledMatrix::new(features, labels)
    }

    pub fn from_dataset(ds: &LabeledDataset) -> Result<Self> {
        Self::from_grids(ds.entries.iter().map(|e| (&e.grid, e.family.id())))
    }

    pub fn from_latent(points: &[LatentPoint]) -> Result<Self> {
        let dim = points.first().ok_or(Error::Empty("no latent points"))?.z.len();
        let mut rows = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.z.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: p.z.len(),
                });
            }
            rows.extend_from_slice(&p.z);
        }
        let features = Array2::from_shape_vec((points.len(), dim), rows)
            .map_err(|e| Error::Format(e.to_string()))?;
        LabeledMatrix::new(features, points.iter().map(|p| p.label.id()).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.ncols()
    }

    pub fn subset(&self, rows: &[usize]) -> LabeledMatrix {
        LabeledMatrix {
            features: gather_rows(&self.features, rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }
}

/// Disjoint train/test index sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded, unstratified shuffle split; `round(0.67 n)` examples go to training.
pub fn split_indices(n: usize, seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    shuffle(&mut idx, &mut ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x5EED_5917)));
    let n_train = (TRAIN_FRACTION * n as f64).round() as usize;
    let test = idx.split_off(n_train.min(n));
    Split { train: idx, test }
}

fn shuffle<R: Rng>(xs: &mut [usize], rng: &mut R) {
    for i in (1..xs.len()).rev() {
        let j = rng.random_range(0..=i);
        xs.swap(i, j);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

/// Minibatch training of a softmax network on cross-entropy.
///
/// Each epoch reshuffles the training rows with a generator seeded from
/// `config.seed`; results are a pure function of inputs and config.
pub fn fit_softmax(
    net: &mut Network,
    train: &LabeledMatrix,
    test: &LabeledMatrix,
    config: &TrainConfig,
) -> Result<Vec<EpochRecord>> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if train.width() != net.input_dim() {
        return Err(Error::Dimension {
            expected: net.input_dim(),
            got: train.width(),
        });
    }
    let mut opt = Optimizer::new(*config, net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ 0xE90C_5));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        shuffle(&mut order, &mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let x = gather_rows(&train.features, batch);
            let labels: Vec<usize> = batch.iter().map(|&i| train.labels[i]).collect();
            let y = one_hot(&labels, N_FAMILIES);
            let acts = net.forward(x.view())?;
            let l = loss::softmax_cross_entropy(&acts.logits, &y);
            if !l.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    reason: format!("non-finite training loss {l}"),
                });
            }
            total += l * batch.len() as f64;
            let grads = net.backward_logits(&acts, loss::cce_logit_grad(acts.output(), &y));
            opt.step(net, &grads).map_err(|e| Error::Diverged {
                epoch,
                reason: e.to_string(),
            })?;
        }
        let (test_loss, test_accuracy) = if test.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            score(net, test)?
        };
        history.push(EpochRecord {
            epoch,
            train_loss: total / train.len() as f64,
            test_loss,
            test_accuracy,
        });
    }
    Ok(history)
}

fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy and accuracy of a softmax network.
fn score(net: &Network, data: &LabeledMatrix) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut correct = 0;
    for start in (0..data.len()).step_by(1024) {
        let end = (start + 1024).min(data.len());
        let acts = net.forward(data.features.slice(ndarray::s![start..end, ..]))?;
        let labels = &data.labels[start..end];
        total += loss::softmax_cross_entropy(&acts.logits, &one_hot(labels, N_FAMILIES)) * labels.len() as f64;
        correct += acts
            .logits
            .axis_iter(Axis(0))
            .zip(labels)
            .filter(|(row, &label)| argmax(row.view()) == label)
            .count();
    }
    Ok((total / data.len() as f64, correct as f64 / data.len() as f64))
}

fn predict_matrix(net: &Network, x: &Array2<f64>) -> Result<Array2<f64>> {
    // fixed-size chunks keep memory flat on large sets
    let mut out = Array2::zeros((x.nrows(), net.output_dim()));
    for start in (0..x.nrows()).step_by(1024) {
        let end = (start + 1024).min(x.nrows());
        let p = net.predict(x.slice(ndarray::s![start..end, ..]))?;
        out.slice_mut(ndarray::s![start..end, ..]).assign(&p);
    }
    Ok(out)
}

/// Softmax output over the 13 families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProbabilities(pub [f64; N_FAMILIES]);

impl ClassProbabilities {
    pub fn argmax(&self) -> Family {
        let mut best = 0;
        for i in 1..N_FAMILIES {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        Family::ALL[best]
    }

    pub fn get(&self, family: Family) -> f64 {
        self.0[family.id()]
    }

    /// Probabilities rounded to 6 decimals.
    pub fn rounded(&self) -> [f64; N_FAMILIES] {
        self.0.map(|p| (p * 1e6).round() / 1e6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "input", rename_all = "snake_case")]
pub enum InputKind {
    Grid { shape: GridShape },
    Latent { dim: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub net: Network,
    pub input: InputKind,
    pub config: TrainConfig,
    /// Seed of the train/test split the model was fitted on.
    pub split_seed: u64,
}

pub const CHECKPOINT_KIND: &str = "classifier";

impl Model {
    pub fn predict_features(&self, features: &[f64]) -> Result<ClassProbabilities> {
        if features.len() != self.net.input_dim() {
            return Err(Error::Dimension {
                expected: self.net.input_dim(),
                got: features.len(),
            });
        }
        let x = Array2::from_shape_vec((1, features.len()), features.to_vec())
            .map_err(|e| Error::Format(e.to_string()))?;
        let p = self.net.predict(x.view())?;
        let mut out = [0.0; N_FAMILIES];
        out.iter_mut().zip(p.iter()).for_each(|(o, &v)| *o = v);
        Ok(ClassProbabilities(out))
    }

    pub fn predict_batch(&self, features: &Array2<f64>) -> Result<Vec<ClassProbabilities>> {
        let p = predict_matrix(&self.net, features)?;
        Ok(p.axis_iter(Axis(0))
            .map(|row| {
                let mut out = [0.0; N_FAMILIES];
                out.iter_mut().zip(row.iter()).for_each(|(o, &v)| *o = v);
                ClassProbabilities(out)
            })
            .collect())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: CHECKPOINT_KIND.into(),
            networks: vec![self.net.clone()],
            meta: json!({
                "input": self.input,
                "config": self.config,
                "split_seed": self.split_seed,
                "classes": Family::ALL.iter().map(|f| f.name()).collect::<Vec<_>>(),
            }),
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        if ckpt.kind != CHECKPOINT_KIND || ckpt.networks.len() != 1 {
            return Err(Error::Format(format!(
                "expected a classifier checkpoint, found `{}`",
                ckpt.kind
            )));
        }
        let input: InputKind = serde_json::from_value(ckpt.meta["input"].clone())?;
        let config: TrainConfig = serde_json::from_value(ckpt.meta["config"].clone())?;
        let split_seed = ckpt.meta["split_seed"]
            .as_u64()
            .ok_or_else(|| Error::Format("checkpoint lacks split_seed".into()))?;
        let net = ckpt.networks.into_iter().next().unwrap();
        Ok(Model {
            net,
            input,
            config,
            split_seed,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub split: Split,
}

/// Train the grid classifier (input -> 128 -> 64 -> 13) on a DOE.
pub fn train_classifier(dataset: &LabeledDataset, config: &TrainConfig) -> Result<Trained> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let data = LabeledMatrix::from_dataset(dataset)?;
    let widths = [dataset.shape.len(), GRID_HIDDEN[0], GRID_HIDDEN[1], N_FAMILIES];
    train_on(data, &widths, InputKind::Grid { shape: dataset.shape }, config)
}

/// Train the latent classifier (latent -> 1024 -> 64 -> 13) on encoder means.
pub fn train_latent_classifier(points: &[LatentPoint], config: &TrainConfig) -> Result<Trained> {
    let data = LabeledMatrix::from_latent(points)?;
    let dim = data.width();
    let widths = [dim, LATENT_HIDDEN[0], LATENT_HIDDEN[1], N_FAMILIES];
    train_on(data, &widths, InputKind::Latent { dim }, config)
}

fn train_on(data: LabeledMatrix, widths: &[usize], input: InputKind, config: &TrainConfig) -> Result<Trained> {
    let split = split_indices(data.len(), config.seed);
    let train = data.subset(&split.train);
    let test = data.subset(&split.test);
    let mut net = Network::new(chain(widths, Activation::Relu, Activation::Softmax), config.seed)?;
    let history = fit_softmax(&mut net, &train, &test, config)?;
    Ok(Trained {
        model: Model {
            net,
            input,
            config: *config,
            split_seed: config.seed,
        },
        history,
        split,
    })
}

/// Class probabilities for one grid.
pub fn predict(model: &Model, grid: &CdfGrid) -> Result<ClassProbabilities> {
    match model.input {
        InputKind::Grid { shape } if shape == grid.shape => model.predict_features(&grid.cells),
        InputKind::Grid { .. } => Err(Error::Dimension {
            expected: model.net.input_dim(),
            got: grid.cells.len(),
        }),
        InputKind::Latent { dim } => Err(Error::Dimension {
            expected: dim,
            got: grid.cells.len(),
        }),
    }
}

/// Generated-true rows by predicted columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; N_FAMILIES]; N_FAMILIES],
}

impl ConfusionMatrix {
    pub fn from_predictions(truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Dimension {
                expected: truth.len(),
                got: predicted.len(),
            });
        }
        let mut counts = [[0u64; N_FAMILIES]; N_FAMILIES];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= N_FAMILIES || p >= N_FAMILIES {
                return Err(Error::InvalidFamily(t.max(p) as u32));
            }
            counts[t][p] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, family: usize) -> u64 {
        self.counts[family].iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let trace: u64 = (0..N_FAMILIES).map(|i| self.counts[i][i]).sum();
        trace as f64 / self.total() as f64
    }

    /// Recall of each family; `None` for families absent from the test set.
    pub fn recall(&self) -> [Option<f64>; N_FAMILIES] {
        std::array::from_fn(|i| {
            let n = self.row_total(i);
            (n > 0).then(|| self.counts[i][i] as f64 / n as f64)
        })
    }

    fn error_share(&self, pick: impl Fn(Family, Family) -> bool) -> f64 {
        let mut errors = 0u64;
        let mut hits = 0u64;
        for (t, row) in self.counts.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                if t != p {
                    errors += c;
                    if pick(Family::ALL[t], Family::ALL[p]) {
                        hits += c;
                    }
                }
            }
        }
        if errors == 0 {
            0.0
        } else {
            hits as f64 / errors as f64
        }
    }

    /// Share of misclassifications that predict a less-parametrized family.
    pub fn simpler_confusion_rate(&self) -> f64 {
        self.error_share(|t, p| p.parameter_count() < t.parameter_count())
    }

    /// Share of misclassifications that predict a more-parametrized family.
    pub fn more_parametrized_rate(&self) -> f64 {
        self.error_share(|t, p| p.parameter_count() > t.parameter_count())
    }

    pub fn report(&self) -> EvaluationReport {
        EvaluationReport {
            classes: Family::ALL.iter().map(|f| f.name().to_string()).collect(),
            matrix: self.counts,
            recall: self.recall(),
            overall_accuracy: self.accuracy(),
            simpler_confusion_rate: self.simpler_confusion_rate(),
            more_parametrized_rate: self.more_parametrized_rate(),
            total: self.total(),
        }
    }

    /// CSV with a header of predicted family names, one row per true family,
    /// followed by the row total and recall.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for f in Family::ALL {
            out.push(',');
            out.push_str(f.name());
        }
        out.push_str(",total,recall\n");
        let recall = self.recall();
        for (i, row) in self.counts.iter().enumerate() {
            out.push_str(Family::ALL[i].name());
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            let r = recall[i].map(|r| format!("{r:.6}")).unwrap_or_default();
            out.push_str(&format!(",{},{r}\n", self.row_total(i)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub classes: Vec<String>,
    pub matrix: [[u64; N_FAMILIES]; N_FAMILIES],
    pub recall: [Option<f64>; N_FAMILIES],
    pub overall_accuracy: f64,
    pub simpler_confusion_rate: f64,
    pub more_parametrized_rate: f64,
    pub total: u64,
}

/// Confusion matrix of `model` on a held-out set.
pub fn evaluate(model: &Model, test: &LabeledMatrix) -> Result<ConfusionMatrix> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let probs = predict_matrix(&model.net, &test.features)?;
    let predicted: Vec<usize> = probs.axis_iter(Axis(0)).map(|r| argmax(r.view())).collect();
    ConfusionMatrix::from_predictions(&test.labels, &predicted)
}
