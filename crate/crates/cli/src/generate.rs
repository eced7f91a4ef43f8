use std::fs;

use distmap::cdfcodec::GridShape;
use distmap::distgen::{cache, DatasetSpec, Family, LabeledDataset};
use serde::Serialize;
use serde_json::json;

use crate::artifacts::{sha256_hex, Context, DATASET_FILE, MANIFEST_FILE};
use crate::cli::GenerateArgs;
use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize)]
struct FamilySummary {
    id: usize,
    name: &'static str,
    count: usize,
    mean_sample_size: f64,
    mean_entropy: f64,
    mean_skewness: f64,
    mean_ks_uniform: f64,
}

#[derive(Debug, Serialize)]
struct Manifest {
    format: &'static str,
    master_seed: u64,
    per_family_count: u32,
    grid: String,
    cells_per_entry: usize,
    entries: usize,
    cache_file: &'static str,
    cache_sha256: String,
    families: Vec<FamilySummary>,
}

fn summarize(ds: &LabeledDataset) -> Vec<FamilySummary> {
    Family::ALL
        .iter()
        .map(|&f| {
            let members: Vec<_> = ds.entries.iter().filter(|e| e.family == f).collect();
            let n = members.len().max(1) as f64;
            let mean = |g: &dyn Fn(&distmap::distgen::DoeEntry) -> f64| members.iter().map(|e| g(e)).sum::<f64>() / n;
            FamilySummary {
                id: f.id(),
                name: f.name(),
                count: members.len(),
                mean_sample_size: mean(&|e| e.spec.sample_size as f64),
                mean_entropy: mean(&|e| e.stats.entropy),
                mean_skewness: mean(&|e| e.stats.skewness),
                mean_ks_uniform: mean(&|e| e.stats.ks_uniform),
            }
        })
        .collect()
}

fn resolve_spec(ctx: &Context, args: &GenerateArgs) -> CliResult<DatasetSpec> {
    match (&args.spec, args.per_family) {
        (Some(path), _) => {
            if ctx.seed.is_some() || ctx.grid.is_some() {
                return Err(CliError::Spec(
                    "--seed and --grid come from the spec file when --spec is given".into(),
                ));
            }
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Spec(format!("cannot read `{}`: {e}", path.display())))?;
            let spec: DatasetSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Spec(format!("`{}`: {e}", path.display())))?;
            Ok(spec)
        }
        (None, Some(per_family_count)) => Ok(DatasetSpec {
            master_seed: ctx.seed.unwrap_or(0),
            per_family_count,
            grid: ctx.grid.unwrap_or_default(),
        }),
        (None, None) => Err(CliError::Spec("either --spec or --per-family is required".into())),
    }
}

fn validate(spec: &DatasetSpec) -> CliResult<()> {
    if spec.per_family_count == 0 {
        return Err(CliError::Spec("per_family_count must be at least 1".into()));
    }
    GridShape::new(spec.grid.x_bins, spec.grid.y_levels).map_err(|e| CliError::Spec(e.to_string()))?;
    Ok(())
}

pub fn run(ctx: &mut Context, args: &GenerateArgs) -> CliResult<()> {
    let spec = resolve_spec(ctx, args)?;
    validate(&spec)?;
    let ds = spec.build()?;
    let mut bytes = Vec::new();
    cache::write_cache(&ds, &mut bytes)?;
    ctx.write(DATASET_FILE, &bytes)?;
    let manifest = Manifest {
        format: "distmap-doe/1",
        master_seed: spec.master_seed,
        per_family_count: spec.per_family_count,
        grid: spec.grid.to_string(),
        cells_per_entry: spec.grid.len(),
        entries: ds.len(),
        cache_file: DATASET_FILE,
        cache_sha256: sha256_hex(&bytes),
        families: summarize(&ds),
    };
    let manifest_hash = ctx.write_json(MANIFEST_FILE, &manifest)?;
    ctx.append_ledger("generate", json!({"spec": spec}))?;
    println!(
        "{}",
        json!({"entries": ds.len(), "grid": spec.grid.to_string(), "manifest_sha256": manifest_hash})
    );
    Ok(())
}
