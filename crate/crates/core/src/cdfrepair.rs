//! Turning decoded intensity grids into monotone CDF curves.

use serde::{Deserialize, Serialize};

use crate::cdfcodec::CdfGrid;
use crate::{Error, Result};

/// Columns lighter than this carry no usable level information.
pub const MIN_COLUMN_WEIGHT: f64 = 1e-6;

/// One level in `[0, 1]` per value bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfCurve {
    pub values: Vec<f64>,
}

impl CdfCurve {
    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Intensity-weighted mean level of every value bin, as a fraction of the
/// level count. Empty columns are filled by linear interpolation between the
/// nearest weighted columns, or copied from the nearest one at either end.
pub fn grid_to_curve(grid: &CdfGrid) -> Result<CdfCurve> {
    let shape = grid.shape;
    if grid.cells.len() != shape.len() {
        return Err(Error::Dimension {
            expected: shape.len(),
            got: grid.cells.len(),
        });
    }
    if let Some(i) = grid.cells.iter().position(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::InvalidParameter(format!("cell {i} is not a nonnegative intensity")));
    }
    let y = shape.y_levels as f64;
    let raw: Vec<Option<f64>> = (0..shape.x_bins)
        .map(|b| {
            let col = &grid.cells[b * shape.y_levels..(b + 1) * shape.y_levels];
            let w: f64 = col.iter().sum();
            (w >= MIN_COLUMN_WEIGHT).then(|| {
                col.iter()
                    .enumerate()
                    .map(|(l, &c)| (l + 1) as f64 / y * c)
                    .sum::<f64>()
                    / w
            })
        })
        .collect();
    let known: Vec<usize> = (0..raw.len()).filter(|&b| raw[b].is_some()).collect();
    if known.is_empty() {
        return Err(Error::Empty("grid has no intensity"));
    }
    let values = (0..raw.len())
        .map(|b| match raw[b] {
            Some(v) => v,
            None => {
                let right = known.partition_point(|&k| k < b);
                match (right.checked_sub(1).map(|i| known[i]), known.get(right)) {
                    (Some(l), Some(&r)) => {
                        let (vl, vr) = (raw[l].unwrap(), raw[r].unwrap());
                        vl + (vr - vl) * (b - l) as f64 / (r - l) as f64
                    }
                    (Some(l), None) => raw[l].unwrap(),
                    (None, Some(&r)) => raw[r].unwrap(),
                    (None, None) => unreachable!(),
                }
            }
        })
        .collect();
    Ok(CdfCurve { values })
}

/// Least-squares nondecreasing fit by pool-adjacent-violators, unclamped.
pub fn isotonic_fit(values: &[f64]) -> Vec<f64> {
    // blocks of (sum, count); a block merges only on a strict violation
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s0 / n0 as f64 > s1 / n1 as f64 {
                blocks.pop();
                *blocks.last_mut().unwrap() = (s0 + s1, n0 + n1);
            } else {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (s, n) in blocks {
        out.extend(std::iter::repeat_n(s / n as f64, n));
    }
    out
}

/// Closest nondecreasing curve in squared error, clamped to `[0, 1]`.
pub fn monotone_repair(curve: &CdfCurve) -> Result<CdfCurve> {
    if let Some(i) = curve.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let mut values = isotonic_fit(&curve.values);
    // clamping preserves order
    values.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    let out = CdfCurve { values };
    assert!(out.is_nondecreasing(), "isotonic fit produced a decreasing step");
    Ok(out)
}

/// `bin_center,raw,repaired` rows with bin centres in `(0, 1)`.
pub fn curves_csv(raw: &CdfCurve, repaired: &CdfCurve) -> String {
    let n = raw.len() as f64;
    let mut out = String::from("bin_center,raw,repaired\n");
    for (b, (r, m)) in raw.values.iter().zip(&repaired.values).enumerate() {
        out.push_str(&format!("{},{r},{m}\n", (b as f64 + 0.5) / n));
    }
    out
}
