//! Metadata records for real data columns.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use distmap::betavae::encode;
use distmap::cdfcodec::{describe, encode_cdf};
use distmap::classifier::{predict, InputKind};
use distmap::distgen::{Family, MIN_SAMPLE_SIZE};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::artifacts::{load_classifier, load_vae, Context};
use crate::cli::DescribeArgs;
use crate::error::{CliError, CliResult};
use crate::map::{SegmentationFile, SEGMENTATION_FILE};

pub const METADATA_FILE: &str = "metadata.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub name: String,
    /// Non-missing values used.
    pub sample_size: usize,
    pub missing: usize,
    /// Fewer values than the smallest simulated sample size.
    pub low_confidence: bool,
    pub entropy: f64,
    pub skewness: f64,
    pub ks_uniform: f64,
    pub predicted_family: String,
    pub probabilities: BTreeMap<String, f64>,
    pub z: Vec<f64>,
    pub sigma: Vec<f64>,
    pub segment: String,
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.trim().to_ascii_lowercase().as_str(),
        "" | "na" | "n/a" | "nan" | "null" | "none"
    )
}

/// A column's finite values and its missing count; `None` when any present
/// cell is not a finite number.
fn numeric_column(cells: &[String]) -> Option<(Vec<f64>, usize)> {
    let mut values = Vec::with_capacity(cells.len());
    let mut missing = 0;
    for c in cells {
        if is_missing(c) {
            missing += 1;
            continue;
        }
        match c.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => return None,
        }
    }
    Some((values, missing))
}

fn read_columns(path: &Path) -> CliResult<Vec<(String, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Missing(format!("csv `{}` not found", path.display())),
        _ => CliError::Io(e),
    })?;
    let bad = |e: csv::Error| CliError::BadInput(format!("`{}`: {e}", path.display()));
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers().map_err(bad)?.iter().map(str::to_string).collect();
    let mut columns: Vec<(String, Vec<String>)> = headers.into_iter().map(|h| (h, Vec::new())).collect();
    for row in reader.records() {
        let row = row.map_err(bad)?;
        for (i, col) in columns.iter_mut().enumerate() {
            col.1.push(row.get(i).unwrap_or("").to_string());
        }
    }
    Ok(columns)
}

pub fn run(ctx: &mut Context, args: &DescribeArgs) -> CliResult<()> {
    let clf = load_classifier(&ctx.or_default(&args.classifier, "classifier.ckpt"))?;
    let InputKind::Grid { shape } = clf.input else {
        return Err(CliError::Mismatch("describe needs the grid classifier, not the latent one".into()));
    };
    let vae = load_vae(&ctx.or_default(&args.vae, "bvae.ckpt"))?;
    if vae.shape != shape {
        return Err(CliError::Mismatch(format!(
            "classifier reads {shape} grids but the beta-VAE reads {}",
            vae.shape
        )));
    }
    let seg_path = ctx.or_default(&args.segments, SEGMENTATION_FILE);
    let seg_text = fs::read_to_string(&seg_path)
        .map_err(|_| CliError::Missing(format!("segmentation `{}` not found", seg_path.display())))?;
    let seg: SegmentationFile = serde_json::from_str(&seg_text)
        .map_err(|e| CliError::BadInput(format!("`{}`: {e}", seg_path.display())))?;
    if seg.lattice.dims != vae.latent_dim {
        return Err(CliError::Mismatch(format!(
            "segmentation is {}-D but the beta-VAE latent space is {}-D",
            seg.lattice.dims, vae.latent_dim
        )));
    }

    let mut lines = String::new();
    let mut skipped = Vec::new();
    let mut count = 0;
    for (name, cells) in read_columns(&args.csv)? {
        let Some((values, missing)) = numeric_column(&cells) else {
            skipped.push(json!({"column": name, "reason": "not numeric"}));
            continue;
        };
        if values.len() < 2 {
            skipped.push(json!({"column": name, "reason": "fewer than 2 values"}));
            continue;
        }
        let grid = encode_cdf(&values, shape)?;
        let stats = describe(&values, shape.x_bins)?;
        let probs = predict(&clf, &grid)?;
        let enc = encode(&vae, &grid)?;
        let record = MetadataRecord {
            name,
            sample_size: values.len(),
            missing,
            low_confidence: values.len() < MIN_SAMPLE_SIZE as usize,
            entropy: round_to(stats.entropy, 12),
            skewness: round_to(stats.skewness, 12),
            ks_uniform: round_to(stats.ks_uniform, 12),
            predicted_family: probs.argmax().name().to_string(),
            probabilities: Family::ALL
                .iter()
                .zip(probs.rounded())
                .map(|(f, p)| (f.name().to_string(), p))
                .collect(),
            segment: seg.label_at(&enc.mu),
            z: enc.mu.iter().map(|&v| round_to(v, 6)).collect(),
            sigma: enc.sigma.iter().map(|&v| round_to(v, 6)).collect(),
        };
        lines.push_str(&serde_json::to_string(&record)?);
        lines.push('\n');
        count += 1;
    }
    if count == 0 {
        return Err(CliError::BadInput(format!(
            "`{}` has no numeric column with at least 2 values",
            args.csv.display()
        )));
    }
    ctx.write(METADATA_FILE, lines.as_bytes())?;
    let summary = json!({"records": count, "skipped": skipped});
    ctx.append_ledger("describe", summary.clone())?;
    println!("{summary}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_markers_and_numeric_detection() {
        let cells: Vec<String> = ["1.5", "", "NA", "2", " nan ", "-3e2"].map(String::from).to_vec();
        let (v, missing) = numeric_column(&cells).unwrap();
        assert_eq!(v, vec![1.5, 2.0, -300.0]);
        assert_eq!(missing, 3);
        let text: Vec<String> = ["1", "abc"].map(String::from).to_vec();
        assert!(numeric_column(&text).is_none());
        let inf: Vec<String> = ["1", "inf"].map(String::from).to_vec();
        assert!(numeric_column(&inf).is_none());
    }

    #[test]
    fn rounding() {
        assert_eq!(round_to(0.123456789, 6), 0.123457);
        assert_eq!(round_to(-2.5e-7, 6), -0.0);
    }
}
