//! Latent-space analysis: kernel density of the encodings, weight of evidence
//! against the standard normal, WOE segmentation, entropy-ordered trajectories,
//! nearest-neighbour family overlap and the classifier's class map.
//!
//! Lattices are stored row-major with the first latent axis varying fastest and
//! are evaluated at cell centres. A 1-D lattice has `ny == 1` and ignores the
//! second axis.

use std::collections::VecDeque;
use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::betavae::LatentPoint;
use crate::classifier::Model;
use crate::distgen::{Family, N_FAMILIES};
use crate::{Error, Result};

pub const DENSITY_RESOLUTION: usize = 100;
pub const CLASS_MAP_RESOLUTION: usize = 75;
pub const DEFAULT_W_STAR: f64 = 2.5;
pub const DEFAULT_P_MIN: f64 = 0.025;
pub const DEFAULT_ENTROPY_BINS: usize = 20;
pub const DEFAULT_MIN_COUNT: usize = 20;
/// Branches holding less than this share of a family are folded into the other.
pub const MINOR_BRANCH_SHARE: f64 = 0.10;

/// `n` evenly spaced values from `lo` to `hi` inclusive; the midpoint when `n == 1`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Axis-aligned rectangle in latent space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Bounds {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        for a in 0..2 {
            if !(lo[a].is_finite() && hi[a].is_finite() && lo[a] <= hi[a]) {
                return Err(Error::InvalidParameter(format!(
                    "invalid bounds on axis {a}: [{}, {}]",
                    lo[a], hi[a]
                )));
            }
        }
        Ok(Bounds { lo, hi })
    }

    pub fn symmetric(half_width: f64) -> Self {
        Bounds {
            lo: [-half_width; 2],
            hi: [half_width; 2],
        }
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.iter()
            .take(2)
            .enumerate()
            .all(|(a, &v)| v >= self.lo[a] && v <= self.hi[a])
    }
}

/// Cell geometry shared by every lattice field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub bounds: Bounds,
    pub nx: usize,
    pub ny: usize,
    /// 1 or 2.
    pub dims: usize,
}

impl Lattice {
    pub fn new(bounds: Bounds, nx: usize, ny: usize, dims: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter("lattice resolution must be positive".into()));
        }
        if !(1..=2).contains(&dims) || (dims == 1 && ny != 1) {
            return Err(Error::InvalidParameter(format!(
                "a {dims}-D lattice cannot have ny = {ny}"
            )));
        }
        for a in 0..dims {
            if !(bounds.hi[a] > bounds.lo[a]) {
                return Err(Error::InvalidParameter(format!("lattice axis {a} has zero extent")));
            }
        }
        Ok(Lattice { bounds, nx, ny, dims })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn step(&self, axis: usize) -> f64 {
        let n = if axis == 0 { self.nx } else { self.ny };
        (self.bounds.hi[axis] - self.bounds.lo[axis]) / n as f64
    }

    pub fn cell_area(&self) -> f64 {
        if self.dims == 1 {
            self.step(0)
        } else {
            self.step(0) * self.step(1)
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        let d = self.step(0);
        (0..self.nx).map(|i| self.bounds.lo[0] + (i as f64 + 0.5) * d).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        if self.dims == 1 {
            return vec![0.0];
        }
        let d = self.step(1);
        (0..self.ny).map(|j| self.bounds.lo[1] + (j as f64 + 0.5) * d).collect()
    }

    /// Centre of cell `k` (row-major, x fastest), truncated to `dims` coordinates.
    pub fn center(&self, k: usize) -> Vec<f64> {
        let (i, j) = (k % self.nx, k / self.nx);
        let x = self.bounds.lo[0] + (i as f64 + 0.5) * self.step(0);
        if self.dims == 1 {
            vec![x]
        } else {
            vec![x, self.bounds.lo[1] + (j as f64 + 0.5) * self.step(1)]
        }
    }

    /// Cell containing `z`, if inside the bounds.
    pub fn locate(&self, z: &[f64]) -> Option<usize> {
        if z.len() < self.dims || !self.bounds.contains(&z[..self.dims]) {
            return None;
        }
        let idx = |a: usize, n: usize| {
            (((z[a] - self.bounds.lo[a]) / self.step(a)).floor() as usize).min(n - 1)
        };
        let i = idx(0, self.nx);
        let j = if self.dims == 1 { 0 } else { idx(1, self.ny) };
        Some(j * self.nx + i)
    }
}

/// Probability density on a lattice, normalized so `sum(density) * cell_area = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub lattice: Lattice,
    /// Kernel bandwidth per axis; zero for fields not built by a kernel estimate.
    pub bandwidth: [f64; 2],
    pub density: Vec<f64>,
}

impl DensityField {
    fn normalized(lattice: Lattice, bandwidth: [f64; 2], mut density: Vec<f64>) -> Result<Self> {
        let mass: f64 = density.iter().sum::<f64>() * lattice.cell_area();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter("density has no mass on the lattice".into()));
        }
        density.iter_mut().for_each(|p| *p /= mass);
        Ok(DensityField {
            lattice,
            bandwidth,
            density,
        })
    }

    /// Evaluate a nonnegative function at every cell centre and normalize.
    pub fn from_fn(lattice: Lattice, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let density = (0..lattice.len()).map(|k| f(&lattice.center(k))).collect();
        Self::normalized(lattice, [0.0; 2], density)
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.lattice.cell_area()
    }

    /// Density of the cell containing `z`.
    pub fn at(&self, z: &[f64]) -> Option<f64> {
        self.lattice.locate(z).map(|k| self.density[k])
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.density.iter().enumerate() {
            if p > self.density[best] {
                best = k;
            }
        }
        best
    }
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
}

/// Rule-of-thumb bandwidths: `sigma * n^(-1/6)` per axis in 2-D and
/// `(4/3)^(1/5) sigma n^(-1/5)` in 1-D. A degenerate axis falls back to one
/// lattice cell.
pub fn silverman_bandwidth(coords: &[Vec<f64>], lattice: &Lattice) -> [f64; 2] {
    let n = coords.len() as f64;
    let mut h = [0.0; 2];
    for (a, slot) in h.iter_mut().enumerate().take(lattice.dims) {
        let v: Vec<f64> = coords.iter().map(|z| z[a]).collect();
        let s = std_dev(&v);
        let rule = if lattice.dims == 2 {
            s * n.powf(-1.0 / 6.0)
        } else {
            (4.0f64 / 3.0).powf(0.2) * s * n.powf(-0.2)
        };
        *slot = if rule > 0.0 { rule } else { lattice.step(a) };
    }
    h
}

/// Gaussian product-kernel density of `coords` on `lattice`, renormalized to
/// unit mass over the lattice. `bandwidth` defaults to [`silverman_bandwidth`].
pub fn estimate_density(
    coords: &[Vec<f64>],
    lattice: Lattice,
    bandwidth: Option<[f64; 2]>,
) -> Result<DensityField> {
    if coords.is_empty() {
        return Err(Error::Empty("latent points"));
    }
    if let Some(z) = coords.iter().find(|z| z.len() < lattice.dims) {
        return Err(Error::Dimension {
            expected: lattice.dims,
            got: z.len(),
        });
    }
    let h = bandwidth.unwrap_or_else(|| silverman_bandwidth(coords, &lattice));
    if (0..lattice.dims).any(|a| !(h[a] > 0.0)) {
        return Err(Error::InvalidParameter("bandwidth must be positive".into()));
    }
    // kernel factors per axis; the product kernel separates into one matmul
    let kernel = |centers: &[f64], axis: usize| {
        Array2::from_shape_fn((centers.len(), coords.len()), |(c, k)| {
            let u = (centers[c] - coords[k][axis]) / h[axis];
            (-0.5 * u * u).exp()
        })
    };
    let kx = kernel(&lattice.xs(), 0);
    let density: Vec<f64> = if lattice.dims == 1 {
        kx.rows().into_iter().map(|r| r.sum()).collect()
    } else {
        let ky = kernel(&lattice.ys(), 1);
        ky.dot(&kx.t()).iter().copied().collect()
    };
    DensityField::normalized(lattice, h, density)
}

/// Coordinates of the latent points.
pub fn coords_of(points: &[LatentPoint]) -> Vec<Vec<f64>> {
    points.iter().map(|p| p.z.clone()).collect()
}

/// Log density of the standard normal in `z.len()` dimensions.
pub fn standard_normal_log_density(z: &[f64]) -> f64 {
    -0.5 * z.len() as f64 * (2.0 * PI).ln() - 0.5 * z.iter().map(|v| v * v).sum::<f64>()
}

/// `ln p - ln phi(z)`: weight of evidence of density `p` at `z` against the
/// standard normal of matching dimension.
pub fn woe_at(p: f64, z: &[f64]) -> f64 {
    p.ln() - standard_normal_log_density(z)
}

/// Density together with its weight of evidence. Cells without positive
/// density carry `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WoeField {
    pub density: DensityField,
    pub woe: Vec<Option<f64>>,
}

pub fn woe_map(density: &DensityField) -> WoeField {
    let woe = density
        .density
        .iter()
        .enumerate()
        .map(|(k, &p)| (p > 0.0).then(|| woe_at(p, &density.lattice.center(k))))
        .collect();
    WoeField {
        density: density.clone(),
        woe,
    }
}

/// Exceptional regions: 4-connected components of cells with
/// `|WOE| > w_star` and `density >= p_min`. Components are numbered from 1 in
/// raster order of their first cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub w_star: f64,
    pub p_min: f64,
    /// `None` for common cells.
    pub labels: Vec<Option<u32>>,
    pub n_components: u32,
}

impl Segmentation {
    pub fn exceptional_cells(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }

    pub fn label_name(label: Option<u32>) -> String {
        match label {
            None => "common".into(),
            Some(k) => format!("exceptional-{k}"),
        }
    }
}

pub fn segment(woe: &WoeField, w_star: f64, p_min: f64) -> Segmentation {
    let lat = woe.density.lattice;
    let flagged: Vec<bool> = woe
        .woe
        .iter()
        .zip(&woe.density.density)
        .map(|(w, &p)| matches!(w, Some(w) if w.abs() > w_star) && p >= p_min)
        .collect();
    let mut labels = vec![None; lat.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..lat.len() {
        if !flagged[start] || labels[start].is_some() {
            continue;
        }
        next += 1;
        labels[start] = Some(next);
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k % lat.nx, k / lat.nx);
            let mut nbrs = Vec::with_capacity(4);
            if i > 0 {
                nbrs.push(k - 1);
            }
            if i + 1 < lat.nx {
                nbrs.push(k + 1);
            }
            if j > 0 {
                nbrs.push(k - lat.nx);
            }
            if j + 1 < lat.ny {
                nbrs.push(k + lat.nx);
            }
            for n in nbrs {
                if flagged[n] && labels[n].is_none() {
                    labels[n] = Some(next);
                    queue.push_back(n);
                }
            }
        }
    }
    Segmentation {
        w_star,
        p_min,
        labels,
        n_components: next,
    }
}

/// Positions along a 1-D lattice where `|WOE|` crosses `w_star`, linearly
/// interpolated between neighbouring cell centres.
pub fn woe_crossings_1d(woe: &WoeField, w_star: f64) -> Vec<f64> {
    let lat = woe.density.lattice;
    let xs = lat.xs();
    let mut out = Vec::new();
    for i in 1..lat.nx {
        if let (Some(a), Some(b)) = (woe.woe[i - 1], woe.woe[i]) {
            let (fa, fb) = (a.abs() - w_star, b.abs() - w_star);
            if (fa > 0.0) != (fb > 0.0) {
                let t = fa / (fa - fb);
                out.push(xs[i - 1] + t * (xs[i] - xs[i - 1]));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub entropy: f64,
    pub z: Vec<f64>,
    pub count: usize,
    /// Root-mean-square distance of the member points to `z`.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub family: Family,
    pub branch: usize,
    /// +1 for the nonnegative-skewness branch, -1 for the negative one.
    pub skew_sign: i8,
    pub waypoints: Vec<Waypoint>,
}

fn waypoint(members: &[&LatentPoint]) -> Waypoint {
    let n = members.len() as f64;
    let dim = members[0].z.len();
    let mut z = vec![0.0; dim];
    let mut entropy = 0.0;
    for p in members {
        entropy += p.stats.entropy;
        z.iter_mut().zip(&p.z).for_each(|(a, &b)| *a += b);
    }
    z.iter_mut().for_each(|a| *a /= n);
    let ss: f64 = members
        .iter()
        .map(|p| p.z.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sum();
    Waypoint {
        entropy: entropy / n,
        z,
        count: members.len(),
        spread: (ss / n).sqrt(),
    }
}

fn merge(a: &Waypoint, b: &Waypoint) -> Waypoint {
    let (na, nb) = (a.count as f64, b.count as f64);
    let n = na + nb;
    let z: Vec<f64> = a.z.iter().zip(&b.z).map(|(x, y)| (na * x + nb * y) / n).collect();
    // pooled second moment about the merged mean
    let shift = |w: &Waypoint| w.z.iter().zip(&z).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
    let ss = na * (a.spread.powi(2) + shift(a)) + nb * (b.spread.powi(2) + shift(b));
    Waypoint {
        entropy: (na * a.entropy + nb * b.entropy) / n,
        z,
        count: a.count + b.count,
        spread: (ss / n).sqrt(),
    }
}

fn branch_waypoints(mut members: Vec<&LatentPoint>, n_entropy_bins: usize, min_count: usize) -> Vec<Waypoint> {
    members.sort_by(|a, b| a.stats.entropy.total_cmp(&b.stats.entropy));
    let n = members.len();
    let bins = (n / min_count.max(1)).clamp(1, n_entropy_bins.max(1));
    let mut out: Vec<Waypoint> = Vec::with_capacity(bins);
    for b in 0..bins {
        let w = waypoint(&members[b * n / bins..(b + 1) * n / bins]);
        match out.last_mut() {
            // tied entropies can make neighbouring bins equal; pool them
            Some(prev) if w.entropy <= prev.entropy => *prev = merge(prev, &w),
            _ => out.push(w),
        }
    }
    out
}

/// Per-family trajectories in increasing entropy.
///
/// Each family splits by skewness sign; a branch with less than 10% of the
/// family's points is folded into the other. Within a branch the points are
/// sorted by entropy and cut into `min(n_entropy_bins, count / min_count)`
/// equal-count bins (at least one).
pub fn trajectories(points: &[LatentPoint], n_entropy_bins: usize, min_count: usize) -> Vec<Trajectory> {
    let mut out = Vec::new();
    for family in Family::ALL {
        let members: Vec<&LatentPoint> = points.iter().filter(|p| p.label == family).collect();
        if members.is_empty() {
            continue;
        }
        let (pos, neg): (Vec<&LatentPoint>, Vec<&LatentPoint>) =
            members.iter().partition(|p| p.stats.skewness >= 0.0);
        let minor = MINOR_BRANCH_SHARE * members.len() as f64;
        let branches: Vec<(i8, Vec<&LatentPoint>)> = if (pos.len() as f64) < minor {
            vec![(-1, members.clone())]
        } else if (neg.len() as f64) < minor {
            vec![(1, members.clone())]
        } else {
            vec![(1, pos), (-1, neg)]
        };
        for (branch, (skew_sign, pts)) in branches.into_iter().enumerate() {
            out.push(Trajectory {
                family,
                branch,
                skew_sign,
                waypoints: branch_waypoints(pts, n_entropy_bins, min_count),
            });
        }
    }
    out
}

/// Argmax family of the latent classifier over a lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMap {
    pub lattice: Lattice,
    pub labels: Vec<Family>,
}

pub fn class_map(model: &Model, lattice: Lattice) -> Result<ClassMap> {
    if model.net.input_dim() != lattice.dims {
        return Err(Error::Dimension {
            expected: model.net.input_dim(),
            got: lattice.dims,
        });
    }
    let x = Array2::from_shape_fn((lattice.len(), lattice.dims), |(k, a)| lattice.center(k)[a]);
    let probs = model.predict_batch(&x)?;
    Ok(ClassMap {
        lattice,
        labels: probs.iter().map(|p| p.argmax()).collect(),
    })
}

/// `score[i][j]`: share of family-`i` points whose nearest neighbour outside
/// family `i` belongs to family `j`. Rows of absent families, or of a family
/// with no foreign neighbour, are zero.
pub fn overlap_matrix(points: &[LatentPoint]) -> [[f64; N_FAMILIES]; N_FAMILIES] {
    let mut counts = [[0u64; N_FAMILIES]; N_FAMILIES];
    for p in points {
        let mut best: Option<(f64, usize)> = None;
        for q in points {
            if q.label == p.label {
                continue;
            }
            let d: f64 = p.z.iter().zip(&q.z).map(|(a, b)| (a - b).powi(2)).sum();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, q.label.id()));
            }
        }
        if let Some((_, j)) = best {
            counts[p.label.id()][j] += 1;
        }
    }
    let mut out = [[0.0; N_FAMILIES]; N_FAMILIES];
    for (row, c) in out.iter_mut().zip(&counts) {
        let total: u64 = c.iter().sum();
        if total > 0 {
            row.iter_mut().zip(c).for_each(|(o, &v)| *o = v as f64 / total as f64);
        }
    }
    out
}

/// `ix,iy,l1,l2,density,woe,segment` per cell; `woe` is empty where undefined.
pub fn lattice_csv(woe: &WoeField, seg: &Segmentation) -> String {
    let lat = woe.density.lattice;
    let mut out = String::from("ix,iy,l1,l2,density,woe,segment\n");
    for k in 0..lat.len() {
        let c = lat.center(k);
        let w = woe.woe[k].map(|w| w.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            k % lat.nx,
            k / lat.nx,
            c[0],
            c.get(1).copied().unwrap_or(0.0),
            woe.density.density[k],
            w,
            Segmentation::label_name(seg.labels[k])
        ));
    }
    out
}

/// `ix,iy,l1,l2,family_id,family` per cell.
pub fn class_map_csv(map: &ClassMap) -> String {
    let lat = map.lattice;
    let mut out = String::from("ix,iy,l1,l2,family_id,family\n");
    for (k, f) in map.labels.iter().enumerate() {
        let c = lat.center(k);
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            k % lat.nx,
            k / lat.nx,
            c[0],
            c.get(1).copied().unwrap_or(0.0),
            f.id(),
            f.name()
        ));
    }
    out
}

/// Square CSV with family names on both axes.
pub fn overlap_csv(m: &[[f64; N_FAMILIES]; N_FAMILIES]) -> String {
    let mut out = String::from("family");
    for f in Family::ALL {
        out.push(',');
        out.push_str(f.name());
    }
    out.push('\n');
    for (i, row) in m.iter().enumerate() {
        out.push_str(Family::ALL[i].name());
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}
