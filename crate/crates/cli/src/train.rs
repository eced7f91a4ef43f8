use distmap::betavae::{encode_dataset, train_bvae, VaeEpoch};
use distmap::classifier::{train_classifier, train_latent_classifier, EpochRecord};
use distmap::neuralcore::TrainConfig;
use serde_json::json;

use crate::artifacts::{checkpoint_bytes, load_dataset, load_vae, Context, DATASET_FILE};
use crate::cli::{ModelKind, TrainArgs};
use crate::error::{CliError, CliResult};

/// Per-model defaults overridden by explicit flags.
pub fn config_for(ctx: &Context, args: &TrainArgs) -> CliResult<TrainConfig> {
    let mut cfg = match args.model {
        ModelKind::Classifier => TrainConfig::rmsprop(),
        ModelKind::Bvae => TrainConfig {
            epochs: 100,
            ..TrainConfig::rmsprop()
        },
        ModelKind::LatentClassifier => TrainConfig::adadelta(),
    };
    if let Some(opt) = args.optimizer {
        // switching optimizer family switches to its defaults first
        if opt != cfg.optimizer {
            let epochs = cfg.epochs;
            cfg = match opt {
                distmap::neuralcore::OptimizerKind::RmsProp => TrainConfig::rmsprop(),
                distmap::neuralcore::OptimizerKind::Adadelta => TrainConfig::adadelta(),
            };
            cfg.epochs = epochs;
        }
    }
    cfg.seed = ctx.seed.unwrap_or(0);
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.rho {
        cfg.rho = v;
    }
    if let Some(v) = args.epsilon {
        cfg.epsilon = v;
    }
    cfg.validate().map_err(|e| CliError::Spec(e.to_string()))?;
    Ok(cfg)
}

pub fn classifier_history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,test_loss,test_accuracy\n");
    for r in history {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.epoch, r.train_loss, r.test_loss, r.test_accuracy
        ));
    }
    out
}

pub fn vae_history_csv(history: &[VaeEpoch], beta: f64) -> String {
    let mut out = String::from("epoch,train_bce,train_kl,train_loss,test_bce,test_kl,test_loss\n");
    for r in history {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.epoch,
            r.train_bce,
            r.train_kl,
            r.train_bce + beta * r.train_kl,
            r.test_bce,
            r.test_kl,
            r.test_bce + beta * r.test_kl
        ));
    }
    out
}

pub fn run(ctx: &mut Context, args: &TrainArgs) -> CliResult<()> {
    let cfg = config_for(ctx, args)?;
    let ds_path = ctx.or_default(&args.dataset, DATASET_FILE);
    let ds = load_dataset(&ds_path)?;
    if let Some(g) = ctx.grid {
        if g != ds.shape {
            return Err(CliError::Mismatch(format!(
                "--grid {g} but the dataset is {}",
                ds.shape
            )));
        }
    }
    let stem = args.model.stem();
    let summary = match args.model {
        ModelKind::Classifier => {
            let t = train_classifier(&ds, &cfg)?;
            ctx.write(&format!("{stem}.ckpt"), &checkpoint_bytes(&t.model.to_checkpoint())?)?;
            ctx.write(&format!("{stem}_history.csv"), classifier_history_csv(&t.history).as_bytes())?;
            json!({"final": t.history.last()})
        }
        ModelKind::Bvae => {
            let t = train_bvae(&ds, args.beta, args.latent_dim, &cfg)?;
            ctx.write(&format!("{stem}.ckpt"), &checkpoint_bytes(&t.model.to_checkpoint(&cfg))?)?;
            ctx.write(
                &format!("{stem}_history.csv"),
                vae_history_csv(&t.history, args.beta).as_bytes(),
            )?;
            json!({
                "beta": args.beta,
                "latent_dim": args.latent_dim,
                "initial": t.history.first(),
                "final": t.history.last(),
            })
        }
        ModelKind::LatentClassifier => {
            let vae_path = ctx.or_default(&args.vae, "bvae.ckpt");
            let vae = load_vae(&vae_path)?;
            if vae.shape != ds.shape {
                return Err(CliError::Mismatch(format!(
                    "beta-VAE expects {} grids, dataset holds {}",
                    vae.shape, ds.shape
                )));
            }
            let points = encode_dataset(&vae, &ds)?;
            let t = train_latent_classifier(&points, &cfg)?;
            ctx.write(&format!("{stem}.ckpt"), &checkpoint_bytes(&t.model.to_checkpoint())?)?;
            ctx.write(&format!("{stem}_history.csv"), classifier_history_csv(&t.history).as_bytes())?;
            json!({"latent_dim": vae.latent_dim, "final": t.history.last()})
        }
    };
    ctx.append_ledger("train", json!({"model": stem, "config": cfg, "summary": summary}))?;
    println!("{summary}");
    Ok(())
}
