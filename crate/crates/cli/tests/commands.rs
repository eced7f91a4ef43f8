use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use distmap::neuralcore::Checkpoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn distmap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_distmap"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn distmap")
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = distmap(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str(stdout.trim()).unwrap_or(Value::Null)
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    distmap(dir, args).status.code().expect("exit code")
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: impl AsRef<Path>) -> (Vec<String>, usize) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.count())
}

/// Dataset, grid classifier, beta-VAE, latent classifier and map outputs in `out/`.
fn pipeline(dir: &Path, per_family: &str, clf_epochs: &str, vae_epochs: &str) {
    ok(dir, &["--seed", "4", "generate", "--per-family", per_family]);
    ok(dir, &["train", "classifier", "--epochs", clf_epochs]);
    ok(dir, &["train", "bvae", "--epochs", vae_epochs]);
    ok(dir, &["train", "latent-classifier", "--epochs", "2"]);
    ok(
        dir,
        &["map", "--resolution", "10", "--density-resolution", "20", "--generate-resolution", "4"],
    );
}

fn schema() -> jsonschema::Validator {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schema/metadata_record.schema.json");
    jsonschema::validator_for(&read_json(path)).expect("schema compiles")
}

fn records(dir: &Path) -> Vec<Value> {
    fs::read_to_string(dir.join("out/metadata.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn generate_reports_entries_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let first = ok(dir.path(), &["generate", "--per-family", "10", "--seed", "9"]);
    let manifest = read_json(dir.path().join("out/manifest.json"));
    assert_eq!(manifest["entries"], 130);
    assert_eq!(manifest["cells_per_entry"], 650);
    assert_eq!(manifest["families"].as_array().unwrap().len(), 13);
    let again = ok(dir.path(), &["generate", "--per-family", "10", "--seed", "9"]);
    assert_eq!(first["manifest_sha256"], again["manifest_sha256"]);
    let other = ok(dir.path(), &["generate", "--per-family", "10", "--seed", "10"]);
    assert_ne!(first["manifest_sha256"], other["manifest_sha256"]);
}

#[test]
fn generate_from_spec_file_with_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("plan.json"),
        r#"{"master_seed": 5, "per_family_count": 3, "grid": {"x_bins": 16, "y_levels": 15}}"#,
    )
    .unwrap();
    ok(dir.path(), &["generate", "--spec", "plan.json"]);
    let manifest = read_json(dir.path().join("out/manifest.json"));
    assert_eq!(manifest["grid"], "16x15");
    assert_eq!(manifest["cells_per_entry"], 240);
    assert_eq!(manifest["entries"], 39);
}

#[test]
fn malformed_or_conflicting_spec_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), "{\"master_seed\": 1").unwrap();
    fs::write(dir.path().join("extra.json"), r#"{"master_seed":1,"per_family_count":2,"grid":{"x_bins":26,"y_levels":25},"x":1}"#).unwrap();
    fs::write(dir.path().join("zero.json"), r#"{"master_seed":1,"per_family_count":0,"grid":{"x_bins":26,"y_levels":25}}"#).unwrap();
    assert_eq!(code(dir.path(), &["generate", "--spec", "bad.json"]), 2);
    assert_eq!(code(dir.path(), &["generate", "--spec", "extra.json"]), 2);
    assert_eq!(code(dir.path(), &["generate", "--spec", "zero.json"]), 2);
    assert_eq!(code(dir.path(), &["generate", "--spec", "absent.json"]), 2);
    assert_eq!(code(dir.path(), &["generate"]), 2);
    assert_eq!(code(dir.path(), &["--seed", "3", "generate", "--spec", "bad.json"]), 2);
}

#[test]
fn missing_artifacts_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(dir.path(), &["train", "classifier"]), 3);
    assert_eq!(code(dir.path(), &["map"]), 3);
    assert_eq!(code(dir.path(), &["eval"]), 3);
}

#[test]
fn training_records_beta_and_latent_dim_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--per-family", "15"]);
    let train = ["train", "bvae", "--beta", "3", "--latent-dim", "2", "--epochs", "2", "--batch-size", "32"];
    ok(d, &train);
    let ckpt = Checkpoint::load(&d.join("out/bvae.ckpt")).unwrap();
    assert_eq!(ckpt.kind, "bvae");
    assert_eq!(ckpt.meta["beta"], 3.0);
    assert_eq!(ckpt.meta["latent_dim"], 2);
    let first = fs::read(d.join("out/bvae_history.csv")).unwrap();
    let (header, rows) = csv_rows(d.join("out/bvae_history.csv"));
    assert_eq!(header, ["epoch", "train_bce", "train_kl", "train_loss", "test_bce", "test_kl", "test_loss"]);
    assert_eq!(rows, 3);
    ok(d, &train);
    assert_eq!(first, fs::read(d.join("out/bvae_history.csv")).unwrap());

    ok(d, &["train", "classifier", "--epochs", "3"]);
    let first = fs::read(d.join("out/classifier_history.csv")).unwrap();
    ok(d, &["train", "classifier", "--epochs", "3"]);
    assert_eq!(first, fs::read(d.join("out/classifier_history.csv")).unwrap());
    let (header, rows) = csv_rows(d.join("out/classifier_history.csv"));
    assert_eq!(header, ["epoch", "train_loss", "test_loss", "test_accuracy"]);
    assert_eq!(rows, 3);

    let ledger = fs::read_to_string(d.join("out/ledger.jsonl")).unwrap();
    let last: Value = serde_json::from_str(ledger.lines().last().unwrap()).unwrap();
    assert_eq!(last["command"], "train");
    assert_eq!(last["argv"], serde_json::json!(["train", "classifier", "--epochs", "3"]));
}

#[test]
fn divergence_and_bad_config_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--per-family", "8"]);
    assert_eq!(code(d, &["train", "bvae", "--epochs", "2", "--learning-rate", "1e100"]), 4);
    assert_eq!(code(d, &["train", "classifier", "--batch-size", "0"]), 2);
    assert_eq!(code(d, &["--grid", "16x15", "train", "classifier", "--epochs", "1"]), 5);
}

#[test]
fn map_exports_and_grid_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--per-family", "12"]);
    ok(d, &["train", "bvae", "--epochs", "2"]);
    ok(d, &["train", "latent-classifier", "--epochs", "1"]);
    let summary = ok(d, &["map", "--resolution", "75", "--density-resolution", "30", "--generate-resolution", "3"]);
    assert_eq!(summary["points"], 156);

    let map = d.join("out/map");
    let (header, rows) = csv_rows(map.join("class_map.csv"));
    assert_eq!(rows, 5625);
    assert_eq!(header.last().unwrap(), "family");
    assert_eq!(csv_rows(map.join("woe_lattice.csv")).1, 900);
    assert_eq!(csv_rows(map.join("latent_points.csv")).1, 156);
    let (header, rows) = csv_rows(map.join("overlap.csv"));
    assert_eq!((header.len(), rows), (14, 13));
    let (header, rows) = csv_rows(map.join("generated_curves.csv"));
    assert_eq!(header, ["cell", "z1", "z2", "bin_center", "raw", "repaired"]);
    assert_eq!(rows, 9 * 26);

    let seg = read_json(map.join("segmentation.json"));
    assert_eq!(seg["w_star"], 2.5);
    assert_eq!(seg["p_min"], 0.025);
    assert_eq!(seg["labels"].as_array().unwrap().len(), 900);
    let trajs = read_json(map.join("trajectories.json"));
    for t in trajs.as_array().unwrap() {
        let e: Vec<f64> = t["waypoints"].as_array().unwrap().iter().map(|w| w["entropy"].as_f64().unwrap()).collect();
        assert!(e.windows(2).all(|w| w[0] < w[1]));
    }
    assert!(!map.join("woe_crossings.json").exists());

    fs::create_dir(d.join("small")).unwrap();
    ok(&d.join("small"), &["--grid", "16x15", "generate", "--per-family", "3"]);
    assert_eq!(code(d, &["map", "--dataset", "small/out/dataset.bin"]), 5);
    assert_eq!(code(d, &["map", "--latent-classifier", "out/bvae.ckpt"]), 5);
}

#[test]
fn one_dimensional_latent_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--per-family", "12"]);
    ok(d, &["train", "bvae", "--latent-dim", "1", "--epochs", "2"]);
    ok(d, &["train", "latent-classifier", "--epochs", "1"]);
    let summary = ok(d, &["map", "--resolution", "30", "--density-resolution", "40", "--generate-resolution", "5"]);
    assert_eq!(summary["latent_dim"], 1);
    let map = d.join("out/map");
    assert_eq!(csv_rows(map.join("class_map.csv")).1, 30);
    assert_eq!(csv_rows(map.join("woe_lattice.csv")).1, 40);
    assert_eq!(csv_rows(map.join("generated_curves.csv")).1, 5 * 26);
    assert!(read_json(map.join("woe_crossings.json")).is_array());
    ok(d, &["grad-check", "bvae", "--checkpoint", "out/bvae.ckpt", "--samples", "40"]);
    ok(d, &["eval", "--classifier", "out/latent_classifier.ckpt"]);
}

#[test]
fn grad_check_and_eval_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--per-family", "6"]);
    for model in ["classifier", "bvae", "latent-classifier"] {
        let report = ok(d, &["grad-check", model, "--samples", "60", "--batch", "8"]);
        assert_eq!(report["passed"], true, "{model}: {report}");
        assert!(d.join(format!("out/gradcheck_{}.json", model.replace('-', "_"))).exists());
    }
    // a tolerance no check can meet
    assert_eq!(code(d, &["grad-check", "classifier", "--tolerance", "0"]), 5);

    ok(d, &["train", "classifier", "--epochs", "2"]);
    let summary = ok(d, &["eval"]);
    // 78 entries, 52 train, 26 held out
    assert_eq!(summary["held_out"], 26);
    let report = read_json(d.join("out/evaluation.json"));
    assert_eq!(report["classes"].as_array().unwrap().len(), 13);
    let (header, rows) = csv_rows(d.join("out/confusion.csv"));
    assert_eq!(header.len(), 16);
    assert_eq!(rows, 13);
}

#[test]
fn describe_emits_schema_valid_affine_invariant_records() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d, "150", "30", "3");

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let uniform: Vec<f64> = (0..36).map(|_| rng.random::<f64>()).collect();
    let skewed: Vec<f64> = (0..200).map(|_| -rng.random::<f64>().ln()).collect();
    let mut csv = String::from("uniform,x,y,flat,label,sparse\n");
    for i in 0..200 {
        let u = uniform.get(i).map_or(String::new(), |v| v.to_string());
        let x = skewed[i];
        let sparse = if i == 0 { "1.0" } else if i < 4 { "2.5" } else { "NA" };
        csv.push_str(&format!("{u},{x},{},4.25,row{i},{sparse}\n", 3.0 * x + 7.0));
    }
    fs::write(d.join("data.csv"), csv).unwrap();
    let summary = ok(d, &["describe", "--csv", "data.csv"]);
    assert_eq!(summary["records"], 5);
    assert_eq!(summary["skipped"][0]["column"], "label");

    let recs = records(d);
    let validator = schema();
    for r in &recs {
        let errors: Vec<String> = validator.iter_errors(r).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{}: {errors:?}", r["name"]);
        let total: f64 = r["probabilities"].as_object().unwrap().values().map(|p| p.as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-5, "{total}");
    }
    let by_name = |n: &str| recs.iter().find(|r| r["name"] == n).unwrap().clone();

    let u = by_name("uniform");
    assert_eq!(u["sample_size"], 36);
    assert_eq!(u["missing"], 164);
    assert_eq!(u["low_confidence"], false);
    assert_eq!(u["predicted_family"], "Uniform");
    assert!(u["probabilities"]["Uniform"].as_f64().unwrap() > 0.5, "{u}");
    assert!(u["entropy"].as_f64().unwrap() > 0.85, "{u}");

    let mut x = by_name("x");
    let mut y = by_name("y");
    x["name"] = Value::Null;
    y["name"] = Value::Null;
    assert_eq!(x, y);

    let flat = by_name("flat");
    assert_eq!(flat["entropy"], 0.0);
    assert_eq!(flat["sample_size"], 200);

    let sparse = by_name("sparse");
    assert_eq!(sparse["sample_size"], 4);
    assert_eq!(sparse["low_confidence"], true);
    assert_eq!(sparse["missing"], 196);

    let ledger = fs::read_to_string(d.join("out/ledger.jsonl")).unwrap();
    assert!(ledger.lines().last().unwrap().contains("\"describe\""));
}

#[test]
fn describe_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d, "6", "1", "1");
    fs::write(d.join("text.csv"), "a,b\nx,y\nz,w\n").unwrap();
    fs::write(d.join("short.csv"), "a\n1\nNA\n").unwrap();
    assert_eq!(code(d, &["describe", "--csv", "text.csv"]), 6);
    assert_eq!(code(d, &["describe", "--csv", "short.csv"]), 6);
    assert_eq!(code(d, &["describe", "--csv", "absent.csv"]), 3);
    fs::write(d.join("ok.csv"), "a\n1\n2\n3\n").unwrap();
    assert_eq!(code(d, &["describe", "--csv", "ok.csv", "--segments", "nowhere.json"]), 3);
    assert_eq!(code(d, &["describe", "--csv", "ok.csv", "--classifier", "out/latent_classifier.ckpt"]), 5);
    assert_eq!(code(d, &["describe", "--csv", "ok.csv", "--vae", "out/classifier.ckpt"]), 5);
}
