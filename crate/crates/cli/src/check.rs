//! `grad-check` and `eval`.

use distmap::betavae::{encode_dataset, grad_check_vae, VaeModel};
use distmap::classifier::{evaluate, split_indices, InputKind, LabeledMatrix, Model, GRID_HIDDEN, LATENT_HIDDEN};
use distmap::distgen::samplers::standard_normal;
use distmap::distgen::{LabeledDataset, N_FAMILIES};
use distmap::neuralcore::gradcheck::LossKind;
use distmap::neuralcore::{chain, grad_check_network, one_hot, Activation, Network};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::artifacts::{load_classifier, load_dataset, load_vae, Context, DATASET_FILE};
use crate::cli::{EvalArgs, GradCheckArgs, ModelKind};
use crate::error::{CliError, CliResult};

/// First `batch` rows of the dataset as a grid matrix with their labels.
fn grid_batch(ds: &LabeledDataset, batch: usize) -> CliResult<(Array2<f64>, Vec<usize>)> {
    let data = LabeledMatrix::from_dataset(ds)?;
    let rows: Vec<usize> = (0..batch.min(data.len())).collect();
    let sub = data.subset(&rows);
    Ok((sub.features, sub.labels))
}

fn check_dataset(ctx: &Context, args: &GradCheckArgs) -> CliResult<LabeledDataset> {
    load_dataset(&ctx.or_default(&args.dataset, DATASET_FILE))
}

pub fn grad_check(ctx: &mut Context, args: &GradCheckArgs) -> CliResult<()> {
    if !(args.h > 0.0) || args.batch == 0 || args.samples == 0 {
        return Err(CliError::Spec("--h, --batch and --samples must be positive".into()));
    }
    let seed = ctx.seed.unwrap_or(0);
    let report = match args.model {
        ModelKind::Bvae => {
            let ds = check_dataset(ctx, args)?;
            let mut vae = match &args.checkpoint {
                Some(p) => load_vae(p)?,
                None => VaeModel::new(ds.shape, args.latent_dim, 3.0, seed)?,
            };
            if vae.shape != ds.shape {
                return Err(CliError::Mismatch(format!(
                    "beta-VAE expects {} grids, dataset holds {}",
                    vae.shape, ds.shape
                )));
            }
            let (x, _) = grid_batch(&ds, args.batch)?;
            grad_check_vae(&mut vae, &x, args.h, args.samples, seed)?
        }
        ModelKind::Classifier | ModelKind::LatentClassifier => {
            let latent = args.model == ModelKind::LatentClassifier;
            let mut net = match &args.checkpoint {
                Some(p) => {
                    let m = load_classifier(p)?;
                    if matches!(m.input, InputKind::Latent { .. }) != latent {
                        return Err(CliError::Mismatch(format!(
                            "`{}` holds a {:?} classifier",
                            p.display(),
                            m.input
                        )));
                    }
                    m.net
                }
                None if latent => Network::new(
                    chain(
                        &[args.latent_dim, LATENT_HIDDEN[0], LATENT_HIDDEN[1], N_FAMILIES],
                        Activation::Relu,
                        Activation::Softmax,
                    ),
                    seed,
                )?,
                None => {
                    let shape = ctx.grid.unwrap_or_default();
                    Network::new(
                        chain(
                            &[shape.len(), GRID_HIDDEN[0], GRID_HIDDEN[1], N_FAMILIES],
                            Activation::Relu,
                            Activation::Softmax,
                        ),
                        seed,
                    )?
                }
            };
            let (x, labels) = if latent {
                // latent inputs are standard-normal draws with cycling labels
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let dim = net.input_dim();
                let x = Array2::from_shape_fn((args.batch, dim), |_| standard_normal(&mut rng));
                (x, (0..args.batch).map(|i| i % N_FAMILIES).collect())
            } else {
                let ds = check_dataset(ctx, args)?;
                if ds.shape.len() != net.input_dim() {
                    return Err(CliError::Mismatch(format!(
                        "classifier reads {} inputs, dataset grids have {}",
                        net.input_dim(),
                        ds.shape.len()
                    )));
                }
                grid_batch(&ds, args.batch)?
            };
            let y = one_hot(&labels, N_FAMILIES);
            grad_check_network(&mut net, &x, &y, LossKind::CrossEntropy, args.h, args.samples, seed)?
        }
    };
    let passed = report.max_relative_error < args.tolerance;
    let out = json!({
        "model": args.model.stem(),
        "h": args.h,
        "tolerance": args.tolerance,
        "max_relative_error": report.max_relative_error,
        "checked": report.checked,
        "loss": report.loss,
        "passed": passed,
    });
    ctx.write_json(&format!("gradcheck_{}.json", args.model.stem()), &out)?;
    ctx.append_ledger("grad-check", out.clone())?;
    println!("{out}");
    if passed {
        Ok(())
    } else {
        Err(CliError::Mismatch(format!(
            "max relative error {:.3e} is not below {:.1e}",
            report.max_relative_error, args.tolerance
        )))
    }
}

pub fn eval(ctx: &mut Context, args: &EvalArgs) -> CliResult<()> {
    let model: Model = load_classifier(&ctx.or_default(&args.classifier, "classifier.ckpt"))?;
    let ds = load_dataset(&ctx.or_default(&args.dataset, DATASET_FILE))?;
    let data = match model.input {
        InputKind::Grid { shape } => {
            if shape != ds.shape {
                return Err(CliError::Mismatch(format!(
                    "classifier reads {shape} grids, dataset holds {}",
                    ds.shape
                )));
            }
            LabeledMatrix::from_dataset(&ds)?
        }
        InputKind::Latent { dim } => {
            let vae = load_vae(&ctx.or_default(&args.vae, "bvae.ckpt"))?;
            if vae.latent_dim != dim || vae.shape != ds.shape {
                return Err(CliError::Mismatch(format!(
                    "latent classifier ({dim}-D) does not fit the beta-VAE ({}-D, {} grids) on {} data",
                    vae.latent_dim, vae.shape, ds.shape
                )));
            }
            LabeledMatrix::from_latent(&encode_dataset(&vae, &ds)?)?
        }
    };
    let split = split_indices(data.len(), model.split_seed);
    let cm = evaluate(&model, &data.subset(&split.test))?;
    let report = cm.report();
    ctx.write_json("evaluation.json", &report)?;
    ctx.write("confusion.csv", cm.to_csv().as_bytes())?;
    let summary = json!({
        "held_out": report.total,
        "overall_accuracy": report.overall_accuracy,
        "simpler_confusion_rate": report.simpler_confusion_rate,
        "more_parametrized_rate": report.more_parametrized_rate,
    });
    ctx.append_ledger("eval", summary.clone())?;
    println!("{summary}");
    Ok(())
}
