use distmap::betavae::{default_bounds, encode_dataset, generate_latent_grid, latent_csv};
use distmap::cdfrepair::{grid_to_curve, monotone_repair};
use distmap::classifier::InputKind;
use distmap::latentlab::{
    class_map, class_map_csv, coords_of, estimate_density, lattice_csv, overlap_csv, overlap_matrix,
    segment, trajectories, woe_crossings_1d, woe_map, Lattice, Segmentation,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::artifacts::{load_classifier, load_dataset, load_vae, Context, DATASET_FILE};
use crate::cli::MapArgs;
use crate::error::{CliError, CliResult};

pub const SEGMENTATION_FILE: &str = "map/segmentation.json";

/// Segmentation with its lattice, as consumed by `describe`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SegmentationFile {
    pub lattice: Lattice,
    #[serde(flatten)]
    pub segmentation: Segmentation,
}

impl SegmentationFile {
    pub fn label_at(&self, z: &[f64]) -> String {
        let label = self.lattice.locate(z).and_then(|k| self.segmentation.labels[k]);
        Segmentation::label_name(label)
    }
}

fn check_args(args: &MapArgs) -> CliResult<()> {
    for (name, v) in [
        ("--resolution", args.resolution),
        ("--density-resolution", args.density_resolution),
        ("--generate-resolution", args.generate_resolution),
        ("--entropy-bins", args.entropy_bins),
        ("--min-count", args.min_count),
    ] {
        if v == 0 {
            return Err(CliError::Spec(format!("{name} must be positive")));
        }
    }
    if !(args.w_star >= 0.0) || !(args.p_min >= 0.0) {
        return Err(CliError::Spec("--w-star and --p-min must be nonnegative".into()));
    }
    Ok(())
}

pub fn run(ctx: &mut Context, args: &MapArgs) -> CliResult<()> {
    check_args(args)?;
    let vae = load_vae(&ctx.or_default(&args.vae, "bvae.ckpt"))?;
    let ds = load_dataset(&ctx.or_default(&args.dataset, DATASET_FILE))?;
    if vae.shape != ds.shape {
        return Err(CliError::Mismatch(format!(
            "beta-VAE expects {} grids, dataset holds {}",
            vae.shape, ds.shape
        )));
    }
    let lc = load_classifier(&ctx.or_default(&args.latent_classifier, "latent_classifier.ckpt"))?;
    if lc.input != (InputKind::Latent { dim: vae.latent_dim }) {
        return Err(CliError::Mismatch(format!(
            "latent classifier input {:?} does not match a {}-D latent space",
            lc.input, vae.latent_dim
        )));
    }
    let dims = vae.latent_dim;
    let per_axis = |n: usize| if dims == 2 { n } else { 1 };

    let points = encode_dataset(&vae, &ds)?;
    ctx.write("map/latent_points.csv", latent_csv(&points).as_bytes())?;

    let bounds = default_bounds(&points)?;
    let density_lattice = Lattice::new(bounds, args.density_resolution, per_axis(args.density_resolution), dims)?;
    let density = estimate_density(&coords_of(&points), density_lattice, None)?;
    let woe = woe_map(&density);
    let seg = segment(&woe, args.w_star, args.p_min);
    ctx.write("map/woe_lattice.csv", lattice_csv(&woe, &seg).as_bytes())?;
    let seg_file = SegmentationFile {
        lattice: density_lattice,
        segmentation: seg,
    };
    ctx.write_json(SEGMENTATION_FILE, &seg_file)?;
    if dims == 1 {
        ctx.write_json("map/woe_crossings.json", &woe_crossings_1d(&woe, args.w_star))?;
    }

    let trajs = trajectories(&points, args.entropy_bins, args.min_count);
    ctx.write_json("map/trajectories.json", &trajs)?;

    let cm_lattice = Lattice::new(bounds, args.resolution, per_axis(args.resolution), dims)?;
    let cm = class_map(&lc, cm_lattice)?;
    ctx.write("map/class_map.csv", class_map_csv(&cm).as_bytes())?;

    ctx.write("map/overlap.csv", overlap_csv(&overlap_matrix(&points)).as_bytes())?;

    let g = args.generate_resolution;
    let cells = generate_latent_grid(&vae, &bounds, g, per_axis(g))?;
    let mut curves = String::from("cell,z1,z2,bin_center,raw,repaired\n");
    for (k, cell) in cells.iter().enumerate() {
        let raw = grid_to_curve(&cell.grid)?;
        let fixed = monotone_repair(&raw)?;
        let n = raw.len() as f64;
        let z2 = cell.z.get(1).copied().unwrap_or(0.0);
        for (b, (r, m)) in raw.values.iter().zip(&fixed.values).enumerate() {
            curves.push_str(&format!("{k},{},{z2},{},{r},{m}\n", cell.z[0], (b as f64 + 0.5) / n));
        }
    }
    ctx.write("map/generated_curves.csv", curves.as_bytes())?;

    let summary = json!({
        "points": points.len(),
        "latent_dim": dims,
        "bounds": bounds,
        "bandwidth": density.bandwidth,
        "exceptional_components": seg_file.segmentation.n_components,
        "exceptional_cells": seg_file.segmentation.exceptional_cells(),
        "trajectories": trajs.len(),
        "class_map_cells": cm.labels.len(),
        "generated_cells": cells.len(),
    });
    ctx.write_json("map/summary.json", &summary)?;
    ctx.append_ledger("map", summary.clone())?;
    println!("{summary}");
    Ok(())
}
