//! Modified-CDF grid encoding and scalar series characteristics.
//!
//! A series is min-max scaled to `[0, 1]`, binned along the value axis into
//! `x_bins` columns and ranked (ties broken by original order) into `y_levels`
//! rows. Counting observations per (bin, level) cell and dividing by the largest
//! count yields an image whose intensities lie in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_X_BINS: usize = 26;
pub const DEFAULT_Y_LEVELS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    pub x_bins: usize,
    pub y_levels: usize,
}

impl Default for GridShape {
    fn default() -> Self {
        GridShape {
            x_bins: DEFAULT_X_BINS,
            y_levels: DEFAULT_Y_LEVELS,
        }
    }
}

impl GridShape {
    pub fn new(x_bins: usize, y_levels: usize) -> Result<Self> {
        let shape = GridShape { x_bins, y_levels };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_bins < 2 || self.y_levels < 2 {
            return Err(Error::InvalidShape {
                x_bins: self.x_bins,
                y_levels: self.y_levels,
            });
        }
        Ok(())
    }

    /// Number of cells, i.e. the network input width.
    pub fn len(&self) -> usize {
        self.x_bins * self.y_levels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of the cell at value bin `bin` (0-based) and rank level `level` (1-based).
    pub fn index(&self, bin: usize, level: usize) -> usize {
        bin * self.y_levels + (level - 1)
    }
}

impl std::fmt::Display for GridShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.x_bins, self.y_levels)
    }
}

impl std::str::FromStr for GridShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (x, y) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::Format(format!("grid shape `{s}` is not of the form NxM")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Format(format!("grid shape `{s}` is not of the form NxM")))
        };
        GridShape::new(parse(x)?, parse(y)?)
    }
}

/// Normalized-count image of a series' CDF.
///
/// Cells are stored row-major with one row per value bin: the cell for bin `b`
/// and level `l` (1-based) lives at `b * y_levels + l - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfGrid {
    pub shape: GridShape,
    pub cells: Vec<f64>,
}

impl CdfGrid {
    pub fn get(&self, bin: usize, level: usize) -> f64 {
        self.cells[self.shape.index(bin, level)]
    }

    /// Serialize as a little-endian header (`x_bins`, `y_levels` as u32) followed
    /// by the cells as little-endian f32.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.cells.len());
        out.extend_from_slice(&(self.shape.x_bins as u32).to_le_bytes());
        out.extend_from_slice(&(self.shape.y_levels as u32).to_le_bytes());
        for &c in &self.cells {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Format("grid header truncated".into()));
        }
        let x_bins = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let y_levels = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let shape = GridShape::new(x_bins, y_levels)?;
        let body = &bytes[8..];
        if body.len() != 4 * shape.len() {
            return Err(Error::Format(format!(
                "grid body has {} bytes, expected {}",
                body.len(),
                4 * shape.len()
            )));
        }
        let cells = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Ok(CdfGrid { shape, cells })
    }
}

/// Scalar characteristics of a series.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesStats {
    /// Shannon entropy of the value-bin histogram, normalized to `[0, 1]`.
    pub entropy: f64,
    /// `d_pos - d_neg`.
    pub skewness: f64,
    /// `max(d_pos, d_neg)`.
    pub ks_uniform: f64,
    /// Largest excursion of the scaled ECDF above the diagonal.
    pub d_pos: f64,
    /// Largest excursion of the scaled ECDF below the diagonal.
    pub d_neg: f64,
}

/// One-sided K-S distances of the scaled ECDF to the uniform CDF.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SignedKs {
    pub d_pos: f64,
    pub d_neg: f64,
}

impl SignedKs {
    pub fn skewness(&self) -> f64 {
        self.d_pos - self.d_neg
    }

    pub fn ks_uniform(&self) -> f64 {
        self.d_pos.max(self.d_neg)
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Value-axis bin of every observation. A constant series maps entirely to bin 0.
fn value_bins(values: &[f64], n_bins: usize) -> Vec<usize> {
    let (lo, hi) = min_max(values);
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0; values.len()];
    }
    values
        .iter()
        .map(|&v| {
            let u = (v - lo) / range;
            // u == 1.0 lands in the last bin rather than one past it
            ((u * n_bins as f64).floor() as usize).min(n_bins - 1)
        })
        .collect()
}

/// Encode a series as a modified-CDF grid.
///
/// Ranks use the "first" method: equal values are ranked in their original
/// order, so a Bernoulli series spreads over the levels exactly as a continuous
/// one would.
pub fn encode_cdf(values: &[f64], shape: GridShape) -> Result<CdfGrid> {
    shape.validate()?;
    if values.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: values.len(),
        });
    }
    check_finite(values)?;

    let n = values.len();
    let bins = value_bins(values, shape.x_bins);

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps original order among ties
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());

    let mut counts = vec![0u32; shape.len()];
    for (pos, &i) in order.iter().enumerate() {
        let rank = pos + 1;
        let level = (shape.y_levels * rank).div_ceil(n).clamp(1, shape.y_levels);
        counts[shape.index(bins[i], level)] += 1;
    }

    let max = *counts.iter().max().unwrap() as f64;
    let cells = counts.iter().map(|&c| c as f64 / max).collect();
    Ok(CdfGrid { shape, cells })
}

/// Normalized Shannon entropy of the `n_bins`-bin histogram of the scaled series.
///
/// `E = -sum(P_i log2 P_i) / log2(n_bins)`, with `0 log 0 = 0`.
pub fn entropy(values: &[f64], n_bins: usize) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::SeriesTooShort { needed: 1, got: 0 });
    }
    if n_bins < 2 {
        return Err(Error::InvalidParameter(format!(
            "entropy needs at least 2 bins, got {n_bins}"
        )));
    }
    check_finite(values)?;
    let mut counts = vec![0usize; n_bins];
    for b in value_bins(values, n_bins) {
        counts[b] += 1;
    }
    Ok(entropy_of_counts(&counts))
}

/// Normalized entropy of a histogram; the normalizer is `log2(counts.len())`.
pub fn entropy_of_counts(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 || counts.len() < 2 {
        return 0.0;
    }
    let n = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    (h / (counts.len() as f64).log2()).clamp(0.0, 1.0)
}

/// Signed one-sample K-S distances of the min-max scaled series to `U(0, 1)`.
///
/// The ECDF is evaluated on both sides of each step. Both excursions are computed
/// from differences to the nearer end of the range, which makes the result exactly
/// antisymmetric under reflection `x -> -x`. A constant series yields zeros.
pub fn signed_ks(values: &[f64]) -> Result<SignedKs> {
    if values.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: values.len(),
        });
    }
    check_finite(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    let range = hi - lo;
    if !(range > 0.0) {
        return Ok(SignedKs::default());
    }

    let n = sorted.len();
    let nf = n as f64;
    let mut d_pos = 0.0f64;
    let mut d_neg = 0.0f64;
    for (k, &x) in sorted.iter().enumerate() {
        let i = k + 1;
        // ECDF right limit minus u
        d_pos = d_pos.max(i as f64 / nf - (x - lo) / range);
        // u minus ECDF left limit, written as (1 - F(u-)) - (1 - u)
        d_neg = d_neg.max((n - i + 1) as f64 / nf - (hi - x) / range);
    }
    Ok(SignedKs {
        d_pos: d_pos.max(0.0),
        d_neg: d_neg.max(0.0),
    })
}

/// Entropy over `n_bins` value bins together with the signed K-S summary.
pub fn describe(values: &[f64], n_bins: usize) -> Result<SeriesStats> {
    let e = entropy(values, n_bins)?;
    let ks = signed_ks(values)?;
    Ok(SeriesStats {
        entropy: e,
        skewness: ks.skewness(),
        ks_uniform: ks.ks_uniform(),
        d_pos: ks.d_pos,
        d_neg: ks.d_neg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn occupied(grid: &CdfGrid) -> Vec<(usize, usize, f64)> {
        let mut out = vec![];
        for b in 0..grid.shape.x_bins {
            for l in 1..=grid.shape.y_levels {
                let v = grid.get(b, l);
                if v > 0.0 {
                    out.push((b, l, v));
                }
            }
        }
        out
    }

    #[test]
    fn two_point_series() {
        let g = encode_cdf(&[0.0, 1.0], GridShape::default()).unwrap();
        assert_eq!(occupied(&g), vec![(0, 13, 1.0), (25, 25, 1.0)]);
    }

    #[test]
    fn evenly_spaced_series_forms_staircase() {
        // 26 distinct evenly spaced values: value k/25 falls in bin floor(26k/25),
        // rank k+1 in level ceil(25(k+1)/26).
        let values: Vec<f64> = (0..26).map(|k| k as f64).collect();
        let g = encode_cdf(&values, GridShape::default()).unwrap();
        let mut expected = std::collections::BTreeMap::new();
        for k in 0..26usize {
            let bin = ((26 * k) / 25).min(25);
            let level = (25 * (k + 1)).div_ceil(26);
            *expected.entry((bin, level)).or_insert(0u32) += 1;
        }
        let max = *expected.values().max().unwrap() as f64;
        let got: Vec<_> = occupied(&g);
        let want: Vec<_> = expected
            .iter()
            .map(|(&(b, l), &c)| (b, l, c as f64 / max))
            .collect();
        assert_eq!(got, want);
        // staircase: levels nondecreasing along bins
        for w in got.windows(2) {
            assert!(w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
        }
        assert!(got.iter().any(|c| c.2 == 1.0));
    }

    #[test]
    fn ties_ranked_in_original_order() {
        // Bernoulli-like series: all zeros share bin 0 but spread over levels.
        let values = [0.0, 1.0, 0.0, 0.0, 1.0];
        let g = encode_cdf(&values, GridShape::new(4, 5).unwrap()).unwrap();
        // ranks 1..3 for the zeros -> levels 1,2,3; ranks 4,5 -> levels 4,5
        assert_eq!(
            occupied(&g),
            vec![(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (3, 4, 1.0), (3, 5, 1.0)]
        );
    }

    #[test]
    fn constant_series_maps_to_first_bin() {
        let g = encode_cdf(&[4.2; 50], GridShape::default()).unwrap();
        for (b, _, _) in occupied(&g) {
            assert_eq!(b, 0);
        }
        assert_eq!(entropy(&[4.2; 50], 26).unwrap(), 0.0);
        let ks = signed_ks(&[4.2; 50]).unwrap();
        assert_eq!(ks.skewness(), 0.0);
        assert_eq!(ks.ks_uniform(), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            encode_cdf(&[1.0], GridShape::default()),
            Err(Error::SeriesTooShort { .. })
        ));
        assert!(matches!(
            encode_cdf(&[1.0, f64::NAN], GridShape::default()),
            Err(Error::NonFinite(1))
        ));
        assert!(GridShape::new(1, 25).is_err());
        assert!(entropy(&[], 26).is_err());
    }

    #[test]
    fn entropy_reference_values() {
        let uniform_counts: Vec<f64> = (0..26 * 10).map(|i| (i / 10) as f64 + 0.5).collect();
        assert!((entropy(&uniform_counts, 26).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(entropy(&[1.0], 26).unwrap(), 0.0);
        // two halves at the ends of the range
        let split: Vec<f64> = (0..40).map(|i| if i < 20 { 0.0 } else { 1.0 }).collect();
        let want = 1.0 / 26f64.log2();
        assert!((entropy(&split, 26).unwrap() - want).abs() < 1e-12);
        assert!((want - 0.21274).abs() < 1e-5);
    }

    #[test]
    fn midpoint_series_is_nearly_symmetric() {
        for n in [5usize, 10, 37, 100] {
            let values: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
            let ks = signed_ks(&values).unwrap();
            assert!(ks.skewness().abs() <= 1.0 / (2.0 * n as f64) + 1e-12, "n={n}");
        }
    }

    #[test]
    fn grid_bytes_round_trip() {
        let g = encode_cdf(&[0.1, 0.7, 0.3, 0.3, 2.0], GridShape::new(4, 3).unwrap()).unwrap();
        let back = CdfGrid::from_le_bytes(&g.to_le_bytes()).unwrap();
        assert_eq!(back, g);
        assert!(CdfGrid::from_le_bytes(&g.to_le_bytes()[..10]).is_err());
    }

    #[test]
    fn shape_parses() {
        assert_eq!("16x15".parse::<GridShape>().unwrap(), GridShape::new(16, 15).unwrap());
        assert!("16-15".parse::<GridShape>().is_err());
        assert!("1x15".parse::<GridShape>().is_err());
    }

    fn series() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3f64..1e3, 2..200)
    }

    proptest! {
        #[test]
        fn cells_in_unit_interval(values in series()) {
            let g = encode_cdf(&values, GridShape::default()).unwrap();
            prop_assert!(g.cells.iter().all(|&c| (0.0..=1.0).contains(&c)));
            prop_assert!(g.cells.iter().any(|&c| c == 1.0));
            let occupied = g.cells.iter().filter(|&&c| c > 0.0).count();
            prop_assert!(occupied <= values.len());
        }

        #[test]
        fn affine_invariance(values in series(), a in 0.5f64..4.0, b in -10.0f64..10.0) {
            let moved: Vec<f64> = values.iter().map(|v| a * v + b).collect();
            let g1 = encode_cdf(&values, GridShape::default()).unwrap();
            let g2 = encode_cdf(&moved, GridShape::default()).unwrap();
            prop_assert_eq!(g1, g2);
        }

        #[test]
        fn min_level_nondecreasing_along_bins(values in series()) {
            let g = encode_cdf(&values, GridShape::default()).unwrap();
            let mut last_min = 0;
            for b in 0..g.shape.x_bins {
                if let Some(l) = (1..=g.shape.y_levels).find(|&l| g.get(b, l) > 0.0) {
                    prop_assert!(l >= last_min);
                    last_min = l;
                }
            }
        }

        #[test]
        fn entropy_in_unit_interval(values in prop::collection::vec(-1e3f64..1e3, 1..300)) {
            let e = entropy(&values, 26).unwrap();
            prop_assert!((0.0..=1.0).contains(&e));
        }

        #[test]
        fn reflection_negates_skewness(values in series()) {
            let ks = signed_ks(&values).unwrap();
            let mirrored: Vec<f64> = values.iter().map(|v| -v).collect();
            let km = signed_ks(&mirrored).unwrap();
            prop_assert_eq!(km.skewness(), -ks.skewness());
            prop_assert_eq!(km.ks_uniform(), ks.ks_uniform());
            prop_assert!(ks.ks_uniform() >= ks.skewness().abs() - 1e-15);
            prop_assert!(ks.d_pos >= 0.0 && ks.d_neg >= 0.0 && ks.ks_uniform() <= 1.0);
        }
    }
}
