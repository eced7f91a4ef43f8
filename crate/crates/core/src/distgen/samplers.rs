//! Hand-rolled variate generators on top of a uniform bit source.

use rand::{Rng, RngCore};

/// Uniform on `[0, 1)` with 53 random bits.
pub fn unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on the open interval `(0, 1)`.
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

pub fn uniform_range<R: RngCore + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit(rng)
}

/// Standard normal by the Marsaglia polar method (one variate per call).
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = 2.0 * unit(rng) - 1.0;
        let v = 2.0 * unit(rng) - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// Natural log of a `Gamma(shape, 1)` variate (Marsaglia-Tsang).
///
/// Working in log space keeps tiny shapes representable: for `shape < 1` the
/// variate is `G(shape + 1) * U^(1/shape)`, which underflows quickly.
pub fn ln_gamma_variate<R: RngCore + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    debug_assert!(shape > 0.0);
    if shape < 1.0 {
        let boost = open_unit(rng).ln() / shape;
        return ln_gamma_variate(rng, shape + 1.0) + boost;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = open_unit(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return (d * v).ln();
        }
    }
}

pub fn gamma<R: RngCore + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    ln_gamma_variate(rng, shape).exp()
}

/// `Beta(a, b)` as `X / (X + Y)` with gamma variates, evaluated from their logs.
///
/// The result is kept inside the open interval `(0, 1)`; for shapes near 0.1 the
/// exact ratio can round to an endpoint.
pub fn beta<R: RngCore + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let lx = ln_gamma_variate(rng, a);
    let ly = ln_gamma_variate(rng, b);
    let v = 1.0 / (1.0 + (ly - lx).exp());
    v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Chi with `df` degrees of freedom: square root of `2 * Gamma(df / 2)`.
pub fn chi<R: RngCore + ?Sized>(rng: &mut R, df: u32) -> f64 {
    (2.0 * gamma(rng, df as f64 / 2.0)).sqrt()
}

pub fn exponential<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    -(1.0 - unit(rng)).ln()
}

pub fn cauchy<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (std::f64::consts::PI * (open_unit(rng) - 0.5)).tan()
}

pub fn weibull<R: RngCore + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    exponential(rng).powf(1.0 / shape)
}

/// Right-skewed (maximum) Gumbel.
pub fn gumbel_r<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    -(-open_unit(rng).ln()).ln()
}

/// Left-skewed (minimum) Gumbel.
pub fn gumbel_l<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (-open_unit(rng).ln()).ln()
}

pub fn bernoulli<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> f64 {
    if unit(rng) < p {
        1.0
    } else {
        0.0
    }
}

/// Integer uniformly distributed on `lo..=hi`.
pub fn int_inclusive<R: Rng + ?Sized>(rng: &mut R, lo: u32, hi: u32) -> u32 {
    rng.random_range(lo..=hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    fn draws(n: usize, f: impl Fn(&mut ChaCha8Rng) -> f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(12345);
        (0..n).map(|_| f(&mut rng)).collect()
    }

    // Sample means are checked against 5 standard errors.
    fn assert_mean(xs: &[f64], mean: f64, var: f64) {
        let (m, _) = moments(xs);
        let se = (var / xs.len() as f64).sqrt();
        assert!((m - mean).abs() < 5.0 * se, "mean {m} vs {mean} (se {se})");
    }

    #[test]
    fn normal_moments() {
        let xs = draws(200_000, |r| standard_normal(r));
        let (m, v) = moments(&xs);
        assert!(m.abs() < 5.0 / (200_000f64).sqrt());
        assert!((v - 1.0).abs() < 0.02);
    }

    #[test]
    fn gamma_moments() {
        for shape in [0.1, 0.5, 1.0, 2.5, 9.0] {
            let xs = draws(100_000, |r| gamma(r, shape));
            assert_mean(&xs, shape, shape);
            assert!(xs.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn beta_moments_and_domain() {
        for (a, b) in [(0.1, 0.1), (0.5, 3.0), (2.0, 2.0), (9.0, 0.1)] {
            let xs = draws(100_000, |r| beta(r, a, b));
            let mean = a / (a + b);
            let var = a * b / ((a + b).powi(2) * (a + b + 1.0));
            assert_mean(&xs, mean, var);
            assert!(xs.iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn chi_moments() {
        for df in [1u32, 4, 9] {
            let xs = draws(100_000, |r| chi(r, df));
            // E[chi^2] = df
            let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
            assert_mean(&sq, df as f64, 2.0 * df as f64);
        }
    }

    #[test]
    fn closed_form_samplers() {
        let xs = draws(100_000, |r| exponential(r));
        assert_mean(&xs, 1.0, 1.0);
        let xs = draws(100_000, |r| weibull(r, 2.0));
        // mean Gamma(1.5) = sqrt(pi)/2, var 1 - pi/4
        let pi = std::f64::consts::PI;
        assert_mean(&xs, pi.sqrt() / 2.0, 1.0 - pi / 4.0);
        let euler = 0.577_215_664_901_532_9;
        let var = pi * pi / 6.0;
        assert_mean(&draws(100_000, |r| gumbel_r(r)), euler, var);
        assert_mean(&draws(100_000, |r| gumbel_l(r)), -euler, var);
        let xs = draws(100_000, |r| bernoulli(r, 0.3));
        assert_mean(&xs, 0.3, 0.21);
    }

    #[test]
    fn cauchy_median_and_quartiles() {
        let mut xs = draws(100_001, |r| cauchy(r));
        xs.sort_by(f64::total_cmp);
        let q = |p: f64| xs[(p * 100_000.0) as usize];
        assert!(q(0.5).abs() < 0.02);
        assert!((q(0.25) + 1.0).abs() < 0.03);
        assert!((q(0.75) - 1.0).abs() < 0.03);
    }

    #[test]
    fn open_unit_never_hits_endpoints() {
        let xs = draws(10_000, |r| open_unit(r));
        assert!(xs.iter().all(|&x| x > 0.0 && x < 1.0));
    }
}
