//! Seeded design of experiment: 13 distribution families with randomized
//! parameters and sample sizes, encoded into labeled CDF grids.

pub mod cache;
pub mod samplers;

pub use cache::{read_cache, write_cache, CACHE_MAGIC, CACHE_VERSION};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cdfcodec::{self, CdfGrid, GridShape, SeriesStats};
use crate::{Error, Result};

pub const N_FAMILIES: usize = 13;
pub const MIN_SAMPLE_SIZE: u32 = 35;
pub const MAX_SAMPLE_SIZE: u32 = 1000;

/// Shape parameters of beta, gamma, weibull and the lognormal reciprocal.
pub const SHAPE_RANGE: (f64, f64) = (0.1, 9.0);
pub const BERNOULLI_P_RANGE: (f64, f64) = (0.001, 0.999);
pub const SUPNORMAL_W_RANGE: (f64, f64) = (0.1, 0.9);
pub const SUPNORMAL_LOC2_RANGE: (f64, f64) = (0.0, 1.0);
pub const CHI_DF_MAX: u32 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Beta = 0,
    Cauchy = 1,
    Exponential = 2,
    Gamma = 3,
    LogNormal = 4,
    Normal = 5,
    Uniform = 6,
    SupNormal = 7,
    Weibull = 8,
    Chi = 9,
    Bernoulli = 10,
    GumbelL = 11,
    GumbelR = 12,
}

impl Family {
    pub const ALL: [Family; N_FAMILIES] = [
        Family::Beta,
        Family::Cauchy,
        Family::Exponential,
        Family::Gamma,
        Family::LogNormal,
        Family::Normal,
        Family::Uniform,
        Family::SupNormal,
        Family::Weibull,
        Family::Chi,
        Family::Bernoulli,
        Family::GumbelL,
        Family::GumbelR,
    ];

    pub fn from_id(id: u32) -> Result<Family> {
        Family::ALL
            .get(id as usize)
            .copied()
            .ok_or(Error::InvalidFamily(id))
    }

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Beta => "Beta",
            Family::Cauchy => "Cauchy",
            Family::Exponential => "Exponential",
            Family::Gamma => "Gamma",
            Family::LogNormal => "Log-Normal",
            Family::Normal => "Normal",
            Family::Uniform => "Uniform",
            Family::SupNormal => "Sup-Normal",
            Family::Weibull => "Weibull",
            Family::Chi => "Chi",
            Family::Bernoulli => "Bernoulli",
            Family::GumbelL => "Gumbel_L",
            Family::GumbelR => "Gumbel_R",
        }
    }

    /// Number of randomized parameters in the generation plan, used to rank
    /// families from simpler to more parametrized.
    pub fn parameter_count(self) -> usize {
        match self {
            Family::Cauchy
            | Family::Exponential
            | Family::Normal
            | Family::Uniform
            | Family::GumbelL
            | Family::GumbelR => 0,
            Family::Gamma | Family::Weibull | Family::LogNormal | Family::Chi | Family::Bernoulli => 1,
            Family::Beta => 2,
            Family::SupNormal => 5,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Family parameters. Location/scale families carry their (fixed) location and scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ParamSet {
    Beta { alpha: f64, beta: f64 },
    Cauchy { loc: f64, scale: f64 },
    Exponential { loc: f64, scale: f64 },
    Gamma { alpha: f64 },
    /// Shape `s` of a lognormal with unit scale (`exp(s * N(0, 1))`).
    LogNormal { s: f64 },
    Normal { loc: f64, scale: f64 },
    Uniform { loc: f64, scale: f64 },
    /// Mixture: `N(loc1, scale1)` with probability `w`, else `N(loc2, scale2)`.
    SupNormal { loc1: f64, scale1: f64, loc2: f64, scale2: f64, w: f64 },
    Weibull { alpha: f64 },
    Chi { df: u32 },
    Bernoulli { p: f64 },
    GumbelL { loc: f64, scale: f64 },
    GumbelR { loc: f64, scale: f64 },
}

fn in_range(name: &str, v: f64, (lo, hi): (f64, f64)) -> Result<()> {
    if v.is_finite() && v >= lo && v <= hi {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name}={v} outside [{lo}, {hi}]")))
    }
}

fn loc_scale(loc: f64, scale: f64) -> Result<()> {
    if !loc.is_finite() {
        return Err(Error::InvalidParameter(format!("loc={loc} is not finite")));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(format!("scale={scale} must be positive")));
    }
    Ok(())
}

impl ParamSet {
    pub fn family(&self) -> Family {
        match self {
            ParamSet::Beta { .. } => Family::Beta,
            ParamSet::Cauchy { .. } => Family::Cauchy,
            ParamSet::Exponential { .. } => Family::Exponential,
            ParamSet::Gamma { .. } => Family::Gamma,
            ParamSet::LogNormal { .. } => Family::LogNormal,
            ParamSet::Normal { .. } => Family::Normal,
            ParamSet::Uniform { .. } => Family::Uniform,
            ParamSet::SupNormal { .. } => Family::SupNormal,
            ParamSet::Weibull { .. } => Family::Weibull,
            ParamSet::Chi { .. } => Family::Chi,
            ParamSet::Bernoulli { .. } => Family::Bernoulli,
            ParamSet::GumbelL { .. } => Family::GumbelL,
            ParamSet::GumbelR { .. } => Family::GumbelR,
        }
    }

    /// Check the parameters against the generation plan's ranges.
    pub fn validate(&self) -> Result<()> {
        match *self {
            ParamSet::Beta { alpha, beta } => {
                in_range("alpha", alpha, SHAPE_RANGE)?;
                in_range("beta", beta, SHAPE_RANGE)
            }
            ParamSet::Gamma { alpha } | ParamSet::Weibull { alpha } => {
                in_range("alpha", alpha, SHAPE_RANGE)
            }
            ParamSet::LogNormal { s } => {
                in_range("s", s, (1.0 / SHAPE_RANGE.1, 1.0 / SHAPE_RANGE.0))
            }
            ParamSet::Chi { df } => {
                if (1..=CHI_DF_MAX).contains(&df) {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("df={df} outside 1..={CHI_DF_MAX}")))
                }
            }
            ParamSet::Bernoulli { p } => in_range("p", p, BERNOULLI_P_RANGE),
            ParamSet::SupNormal {
                loc1,
                scale1,
                loc2,
                scale2,
                w,
            } => {
                loc_scale(loc1, scale1)?;
                in_range("loc2", loc2, SUPNORMAL_LOC2_RANGE)?;
                in_range("scale2", scale2, SHAPE_RANGE)?;
                in_range("w", w, SUPNORMAL_W_RANGE)
            }
            ParamSet::Cauchy { loc, scale }
            | ParamSet::Exponential { loc, scale }
            | ParamSet::Normal { loc, scale }
            | ParamSet::Uniform { loc, scale }
            | ParamSet::GumbelL { loc, scale }
            | ParamSet::GumbelR { loc, scale } => loc_scale(loc, scale),
        }
    }

    /// Parameters as a fixed 5-slot vector (zero-padded), in declaration order.
    pub fn to_slots(&self) -> [f64; 5] {
        match *self {
            ParamSet::Beta { alpha, beta } => [alpha, beta, 0.0, 0.0, 0.0],
            ParamSet::Gamma { alpha } | ParamSet::Weibull { alpha } => [alpha, 0.0, 0.0, 0.0, 0.0],
            ParamSet::LogNormal { s } => [s, 0.0, 0.0, 0.0, 0.0],
            ParamSet::Chi { df } => [df as f64, 0.0, 0.0, 0.0, 0.0],
            ParamSet::Bernoulli { p } => [p, 0.0, 0.0, 0.0, 0.0],
            ParamSet::SupNormal {
                loc1,
                scale1,
                loc2,
                scale2,
                w,
            } => [loc1, scale1, loc2, scale2, w],
            ParamSet::Cauchy { loc, scale }
            | ParamSet::Exponential { loc, scale }
            | ParamSet::Normal { loc, scale }
            | ParamSet::Uniform { loc, scale }
            | ParamSet::GumbelL { loc, scale }
            | ParamSet::GumbelR { loc, scale } => [loc, scale, 0.0, 0.0, 0.0],
        }
    }

    pub fn from_slots(family: Family, s: [f64; 5]) -> ParamSet {
        match family {
            Family::Beta => ParamSet::Beta { alpha: s[0], beta: s[1] },
            Family::Cauchy => ParamSet::Cauchy { loc: s[0], scale: s[1] },
            Family::Exponential => ParamSet::Exponential { loc: s[0], scale: s[1] },
            Family::Gamma => ParamSet::Gamma { alpha: s[0] },
            Family::LogNormal => ParamSet::LogNormal { s: s[0] },
            Family::Normal => ParamSet::Normal { loc: s[0], scale: s[1] },
            Family::Uniform => ParamSet::Uniform { loc: s[0], scale: s[1] },
            Family::SupNormal => ParamSet::SupNormal {
                loc1: s[0],
                scale1: s[1],
                loc2: s[2],
                scale2: s[3],
                w: s[4],
            },
            Family::Weibull => ParamSet::Weibull { alpha: s[0] },
            Family::Chi => ParamSet::Chi { df: s[0] as u32 },
            Family::Bernoulli => ParamSet::Bernoulli { p: s[0] },
            Family::GumbelL => ParamSet::GumbelL { loc: s[0], scale: s[1] },
            Family::GumbelR => ParamSet::GumbelR { loc: s[0], scale: s[1] },
        }
    }
}

/// Draw parameters for `family_id` from the generation plan.
pub fn draw_params<R: RngCore + ?Sized>(family_id: u32, rng: &mut R) -> Result<ParamSet> {
    use samplers::uniform_range as u;
    let (lo, hi) = SHAPE_RANGE;
    let params = match Family::from_id(family_id)? {
        Family::Beta => ParamSet::Beta {
            alpha: u(rng, lo, hi),
            beta: u(rng, lo, hi),
        },
        Family::Cauchy => ParamSet::Cauchy { loc: 0.0, scale: 1.0 },
        Family::Exponential => ParamSet::Exponential { loc: 0.0, scale: 1.0 },
        Family::Gamma => ParamSet::Gamma { alpha: u(rng, lo, hi) },
        Family::LogNormal => ParamSet::LogNormal {
            s: 1.0 / u(rng, lo, hi),
        },
        Family::Normal => ParamSet::Normal { loc: 0.0, scale: 1.0 },
        Family::Uniform => ParamSet::Uniform { loc: 0.0, scale: 1.0 },
        Family::SupNormal => ParamSet::SupNormal {
            loc1: 0.0,
            scale1: 1.0,
            loc2: u(rng, SUPNORMAL_LOC2_RANGE.0, SUPNORMAL_LOC2_RANGE.1),
            scale2: u(rng, lo, hi),
            w: u(rng, SUPNORMAL_W_RANGE.0, SUPNORMAL_W_RANGE.1),
        },
        Family::Weibull => ParamSet::Weibull { alpha: u(rng, lo, hi) },
        Family::Chi => ParamSet::Chi {
            df: samplers::int_inclusive(&mut RngAdapter(rng), 1, CHI_DF_MAX),
        },
        Family::Bernoulli => ParamSet::Bernoulli {
            p: u(rng, BERNOULLI_P_RANGE.0, BERNOULLI_P_RANGE.1),
        },
        Family::GumbelL => ParamSet::GumbelL { loc: 0.0, scale: 1.0 },
        Family::GumbelR => ParamSet::GumbelR { loc: 0.0, scale: 1.0 },
    };
    Ok(params)
}

// Sized wrapper so `Rng` helpers work on `?Sized` generators.
struct RngAdapter<'a, R: RngCore + ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistSpec {
    pub family: Family,
    pub params: ParamSet,
    pub sample_size: u32,
}

impl DistSpec {
    pub fn new(params: ParamSet, sample_size: u32) -> DistSpec {
        DistSpec {
            family: params.family(),
            params,
            sample_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.family() != self.family {
            return Err(Error::InvalidParameter(format!(
                "parameters for {} attached to family {}",
                self.params.family(),
                self.family
            )));
        }
        if self.sample_size == 0 {
            return Err(Error::InvalidParameter("sample_size must be positive".into()));
        }
        self.params.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub values: Vec<f64>,
    pub spec: DistSpec,
    pub seed: u64,
}

/// Draw `spec.sample_size` values; a pure function of `(spec, seed)`.
///
/// The sample size is not restricted to the generation plan's 35..=1000 here so
/// that samplers can be checked on larger draws.
pub fn sample_variable(spec: &DistSpec, seed: u64) -> Result<RawSeries> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = &mut rng;
    let n = spec.sample_size as usize;
    let values: Vec<f64> = match spec.params {
        ParamSet::Beta { alpha, beta } => (0..n).map(|_| samplers::beta(r, alpha, beta)).collect(),
        ParamSet::Cauchy { loc, scale } => (0..n).map(|_| loc + scale * samplers::cauchy(r)).collect(),
        ParamSet::Exponential { loc, scale } => {
            (0..n).map(|_| loc + scale * samplers::exponential(r)).collect()
        }
        ParamSet::Gamma { alpha } => (0..n).map(|_| samplers::gamma(r, alpha)).collect(),
        ParamSet::LogNormal { s } => (0..n).map(|_| (s * samplers::standard_normal(r)).exp()).collect(),
        ParamSet::Normal { loc, scale } => {
            (0..n).map(|_| loc + scale * samplers::standard_normal(r)).collect()
        }
        ParamSet::Uniform { loc, scale } => (0..n).map(|_| loc + scale * samplers::unit(r)).collect(),
        ParamSet::SupNormal {
            loc1,
            scale1,
            loc2,
            scale2,
            w,
        } => (0..n)
            .map(|_| {
                let first = samplers::unit(r) < w;
                let z = samplers::standard_normal(r);
                if first {
                    loc1 + scale1 * z
                } else {
                    loc2 + scale2 * z
                }
            })
            .collect(),
        ParamSet::Weibull { alpha } => (0..n).map(|_| samplers::weibull(r, alpha)).collect(),
        ParamSet::Chi { df } => (0..n).map(|_| samplers::chi(r, df)).collect(),
        ParamSet::Bernoulli { p } => (0..n).map(|_| samplers::bernoulli(r, p)).collect(),
        ParamSet::GumbelL { loc, scale } => (0..n).map(|_| loc + scale * samplers::gumbel_l(r)).collect(),
        ParamSet::GumbelR { loc, scale } => (0..n).map(|_| loc + scale * samplers::gumbel_r(r)).collect(),
    };
    Ok(RawSeries {
        values,
        spec: *spec,
        seed,
    })
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-entry seed: `splitmix64(splitmix64(splitmix64(master) ^ family) ^ index)`.
pub fn mix64(master_seed: u64, family_id: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ family_id) ^ index)
}

/// One labeled DOE variable.
#[derive(Debug, Clone, PartialEq)]
pub struct DoeEntry {
    pub family: Family,
    pub index: u32,
    pub spec: DistSpec,
    /// Seed of the drawn series.
    pub seed: u64,
    pub grid: CdfGrid,
    pub stats: SeriesStats,
}

/// Full DOE, ordered family-major then by index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub shape: GridShape,
    pub master_seed: u64,
    pub per_family_count: u32,
    pub entries: Vec<DoeEntry>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.family.id()).collect()
    }
}

/// Dataset plan as stored in a spec file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub master_seed: u64,
    pub per_family_count: u32,
    pub grid: GridShape,
}

/// Generate one DOE entry.
pub fn doe_entry(family: Family, index: u32, shape: GridShape, master_seed: u64) -> Result<DoeEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(master_seed, family.id() as u64, index as u64));
    let params = draw_params(family.id() as u32, &mut rng)?;
    let sample_size = samplers::int_inclusive(&mut rng, MIN_SAMPLE_SIZE, MAX_SAMPLE_SIZE);
    let seed = rng.next_u64();
    let spec = DistSpec::new(params, sample_size);
    let series = sample_variable(&spec, seed)?;
    let grid = cdfcodec::encode_cdf(&series.values, shape)?;
    let stats = cdfcodec::describe(&series.values, shape.x_bins)?;
    Ok(DoeEntry {
        family,
        index,
        spec,
        seed,
        grid,
        stats,
    })
}

pub fn build_doe(per_family_count: u32, shape: GridShape, master_seed: u64) -> Result<LabeledDataset> {
    if per_family_count == 0 {
        return Err(Error::InvalidParameter("per_family_count must be at least 1".into()));
    }
    shape.validate()?;
    let mut entries = Vec::with_capacity(N_FAMILIES * per_family_count as usize);
    for family in Family::ALL {
        for index in 0..per_family_count {
            entries.push(doe_entry(family, index, shape, master_seed)?);
        }
    }
    Ok(LabeledDataset {
        shape,
        master_seed,
        per_family_count,
        entries,
    })
}

impl DatasetSpec {
    pub fn build(&self) -> Result<LabeledDataset> {
        build_doe(self.per_family_count, self.grid, self.master_seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_families_are_standard() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for id in [1u32, 2, 5, 6, 11, 12] {
            let p = draw_params(id, &mut rng).unwrap();
            assert_eq!(&p.to_slots()[..2], &[0.0, 1.0], "family {id}");
        }
    }

    #[test]
    fn unknown_family_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(draw_params(13, &mut rng), Err(Error::InvalidFamily(13))));
    }

    #[test]
    fn bernoulli_near_one() {
        let spec = DistSpec::new(ParamSet::Bernoulli { p: 0.999 }, 1000);
        let s = sample_variable(&spec, 9).unwrap();
        let ones = s.values.iter().filter(|&&v| v == 1.0).count() as f64 / 1000.0;
        assert!((0.97..=1.0).contains(&ones));
        assert!(s.values.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn uniform_and_exponential_draws() {
        let u = sample_variable(&DistSpec::new(ParamSet::Uniform { loc: 0.0, scale: 1.0 }, 1000), 3).unwrap();
        assert!(u.values.iter().all(|v| (0.0..=1.0).contains(v)));
        let e = sample_variable(&DistSpec::new(ParamSet::Exponential { loc: 0.0, scale: 1.0 }, 1000), 3)
            .unwrap();
        let mean = e.values.iter().sum::<f64>() / 1000.0;
        assert!((0.85..=1.15).contains(&mean), "{mean}");
    }

    #[test]
    fn invalid_parameters_rejected() {
        for p in [
            ParamSet::Beta { alpha: 0.0, beta: 1.0 },
            ParamSet::Bernoulli { p: 1.0 },
            ParamSet::Chi { df: 0 },
            ParamSet::Normal { loc: 0.0, scale: -1.0 },
            ParamSet::SupNormal { loc1: 0.0, scale1: 1.0, loc2: 0.5, scale2: 1.0, w: 0.95 },
        ] {
            assert!(sample_variable(&DistSpec::new(p, 10), 0).is_err(), "{p:?}");
        }
        let mismatched = DistSpec {
            family: Family::Normal,
            params: ParamSet::Gamma { alpha: 1.0 },
            sample_size: 10,
        };
        assert!(sample_variable(&mismatched, 0).is_err());
    }

    #[test]
    fn doe_counts_and_determinism() {
        let ds = build_doe(1, GridShape::default(), 7).unwrap();
        assert_eq!(ds.len(), 13);
        let fams: Vec<_> = ds.entries.iter().map(|e| e.family).collect();
        assert_eq!(fams, Family::ALL.to_vec());
        let again = build_doe(1, GridShape::default(), 7).unwrap();
        assert_eq!(ds, again);
        let other = build_doe(1, GridShape::default(), 8).unwrap();
        assert_ne!(ds, other);
        assert!(build_doe(0, GridShape::default(), 7).is_err());
    }

    #[test]
    fn mix64_separates_coordinates() {
        let a = mix64(1, 2, 3);
        assert_ne!(a, mix64(1, 3, 2));
        assert_ne!(a, mix64(2, 2, 3));
        assert_eq!(a, mix64(1, 2, 3));
    }

    #[test]
    fn spec_file_json() {
        let s: DatasetSpec =
            serde_json::from_str(r#"{"master_seed": 5, "per_family_count": 10, "grid": {"x_bins": 16, "y_levels": 15}}"#)
                .unwrap();
        assert_eq!(s.grid, GridShape::new(16, 15).unwrap());
        assert!(serde_json::from_str::<DatasetSpec>(r#"{"master_seed": 5}"#).is_err());
    }

    fn domain_ok(p: &ParamSet, v: f64) -> bool {
        match p {
            ParamSet::Beta { .. } => v > 0.0 && v < 1.0,
            ParamSet::Gamma { .. } | ParamSet::LogNormal { .. } => v > 0.0,
            ParamSet::Exponential { .. } | ParamSet::Weibull { .. } | ParamSet::Chi { .. } => v >= 0.0,
            ParamSet::Uniform { loc, scale } => v >= *loc && v <= loc + scale,
            ParamSet::Bernoulli { .. } => v == 0.0 || v == 1.0,
            _ => v.is_finite(),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn draws_respect_ranges_and_domains(family in 0u32..13, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = draw_params(family, &mut rng).unwrap();
            prop_assert!(p.validate().is_ok());
            if let ParamSet::Chi { df } = p {
                prop_assert!((1..=9).contains(&df));
            }
            let s = sample_variable(&DistSpec::new(p, 200), seed).unwrap();
            prop_assert!(s.values.iter().all(|&v| domain_ok(&p, v)), "{:?}", p);
            prop_assert_eq!(&s, &sample_variable(&DistSpec::new(p, 200), seed).unwrap());
        }

        #[test]
        fn doe_entry_in_plan(family in 0u32..13, index in 0u32..10_000, seed in any::<u64>()) {
            let e = doe_entry(Family::from_id(family).unwrap(), index, GridShape::new(6, 5).unwrap(), seed).unwrap();
            prop_assert!((MIN_SAMPLE_SIZE..=MAX_SAMPLE_SIZE).contains(&e.spec.sample_size));
            prop_assert!(e.spec.validate().is_ok());
        }
    }
}
