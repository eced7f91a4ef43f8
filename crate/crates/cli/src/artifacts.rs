//! Artifact paths, loading, hashing and the run ledger.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use distmap::betavae::VaeModel;
use distmap::cdfcodec::GridShape;
use distmap::classifier::Model;
use distmap::distgen::{cache, LabeledDataset};
use distmap::neuralcore::Checkpoint;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const DATASET_FILE: &str = "dataset.bin";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LEDGER_FILE: &str = "ledger.jsonl";

/// Global flags and the invocation, shared by every command.
pub struct Context {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub grid: Option<GridShape>,
    pub argv: Vec<String>,
    /// Files written so far, with their SHA-256, keyed by path relative to `out_dir`.
    outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Context {
    pub fn new(out_dir: PathBuf, seed: Option<u64>, grid: Option<GridShape>, argv: Vec<String>) -> Self {
        Context {
            out_dir,
            seed,
            grid,
            argv,
            outputs: BTreeMap::new(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn or_default(&self, given: &Option<PathBuf>, name: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.path(name))
    }

    /// Write `bytes` under the output directory and remember their hash.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<String> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        let hash = sha256_hex(bytes);
        self.outputs.insert(name.to_string(), hash.clone());
        Ok(hash)
    }

    pub fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> CliResult<String> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Append one line recording the invocation and its outputs. The record
    /// carries no timestamps so identical invocations log identical lines.
    pub fn append_ledger(&self, command: &str, extra: serde_json::Value) -> CliResult<()> {
        fs::create_dir_all(&self.out_dir)?;
        let record = json!({
            "command": command,
            "argv": self.argv,
            "seed": self.seed,
            "grid": self.grid.map(|g| g.to_string()),
            "outputs": self.outputs,
            "details": extra,
        });
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.path(LEDGER_FILE))?;
        writeln!(f, "{}", serde_json::to_string(&record)?)?;
        Ok(())
    }
}

fn read_bytes(path: &Path, what: &str) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Missing(format!("{what} `{}` not found", path.display())),
        _ => CliError::Io(e),
    })
}

pub fn load_dataset(path: &Path) -> CliResult<LabeledDataset> {
    let bytes = read_bytes(path, "dataset cache")?;
    cache::read_cache(&bytes[..])
        .map_err(|e| CliError::BadInput(format!("dataset cache `{}`: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    let bytes = read_bytes(path, "checkpoint")?;
    Checkpoint::read(&bytes[..])
        .map_err(|e| CliError::BadInput(format!("checkpoint `{}`: {e}", path.display())))
}

pub fn load_classifier(path: &Path) -> CliResult<Model> {
    Model::from_checkpoint(load_checkpoint(path)?)
        .map_err(|e| CliError::Mismatch(format!("`{}`: {e}", path.display())))
}

pub fn load_vae(path: &Path) -> CliResult<VaeModel> {
    VaeModel::from_checkpoint(load_checkpoint(path)?)
        .map_err(|e| CliError::Mismatch(format!("`{}`: {e}", path.display())))
}

pub fn checkpoint_bytes(ckpt: &Checkpoint) -> CliResult<Vec<u8>> {
    let mut bytes = Vec::new();
    ckpt.write(&mut bytes)?;
    Ok(bytes)
}
