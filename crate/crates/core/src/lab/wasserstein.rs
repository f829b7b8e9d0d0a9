//! One-dimensional Wasserstein distances and the Stein-type bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::km::poisson_central_abs_moment;
use super::{accepted, for_each_poisson_index, harmonic_table, sample_draws, ExperimentConfig};
use crate::equidist::least_squares;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// `d_W` between the empirical law of `samples` and `N(mean, sd^2)`:
/// the mean over order statistics of `|x_(k) - mean - sd Phi^{-1}((k - 1/2) / N)|`.
pub fn wasserstein_1d(samples: &[f64], mean: f64, sd: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    if !(sd > 0.0) {
        return Err(Error::invalid("target standard deviation must be positive"));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    let n = x.len() as f64;
    let total: f64 = x
        .iter()
        .enumerate()
        .map(|(k, v)| (v - mean - sd * normal.inverse_cdf((k as f64 + 0.5) / n)).abs())
        .sum();
    Ok(total / n)
}

/// `d_W` between two empirical laws, `int_0^1 |F^{-1}(u) - G^{-1}(u)| du`.
pub fn wasserstein_empirical(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("empty sample"));
    }
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut u = 0.0;
    let mut total = 0.0;
    while i < na && j < nb {
        let next_a = (i + 1) as f64 / na as f64;
        let next_b = (j + 1) as f64 / nb as f64;
        let next = next_a.min(next_b);
        total += (next - u) * (a[i] - b[j]).abs();
        u = next;
        // exact integer comparison of the breakpoints (i+1)/na vs (j+1)/nb
        let (ka, kb) = ((i + 1) * nb, (j + 1) * na);
        if ka <= kb {
            i += 1;
        }
        if kb <= ka {
            j += 1;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WassersteinReport {
    pub n: usize,
    pub samples: usize,
    pub d_w_re: f64,
    pub d_w_im: Option<f64>,
    /// `V = theta sum a_m^2 / m / log n`.
    pub variance: f64,
    /// `3 V^{3/2} sum E|xi_m|^3`, as printed.
    pub stein_bound: f64,
    /// `3 sum E|xi_m|^3 / V`, the bound for `d_W(S, N(0, V))` obtained from the
    /// unit-variance form.
    pub standardized_bound: f64,
    /// `sum E|xi_m|^3` by Poisson series.
    pub third_moment_series: f64,
    /// The same by Monte Carlo, when computed.
    pub third_moment_mc: Option<f64>,
    pub respects_printed_bound: bool,
    pub respects_standardized_bound: bool,
    /// `d_w_re * sqrt(log n)`.
    pub trend_coefficient: f64,
}

struct BoundTerms {
    variance: f64,
    third: f64,
}

fn bound_terms(a: &[f64], theta: f64, log_n: f64) -> BoundTerms {
    let mut var = 0.0;
    let mut third = 0.0;
    for (i, &am) in a.iter().enumerate() {
        let lambda = theta / (i + 1) as f64;
        var += am * am * lambda;
        third += am.abs().powi(3) * poisson_central_abs_moment(lambda, 3.0);
    }
    BoundTerms { variance: var / log_n, third: third / log_n.powf(1.5) }
}

/// `xi_m = a_m (Y_m - theta/m) / sqrt(log n)` with independent
/// `Y_m ~ Poisson(theta/m)`: compares the empirical `d_W(sum xi_m, N(0, V))`
/// with the Stein-type bound, both as printed and standardized, and checks
/// `sum E|xi_m|^3` by series against Monte Carlo.
pub fn stein_bound_check(a: &[f64], theta: f64, n: usize, samples: usize, stream: &RngStream) -> Result<WassersteinReport> {
    if n < 2 || a.len() < n {
        return Err(Error::invalid("need n >= 2 and at least n coefficients"));
    }
    if !(theta > 0.0) || a[..n].iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("theta must be positive and a finite"));
    }
    if samples < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let a = &a[..n];
    let log_n = (n as f64).ln();
    let scale = log_n.sqrt();
    let terms = bound_terms(a, theta, log_n);
    let harmonic = harmonic_table(n);
    let centering: f64 = a.iter().enumerate().map(|(i, v)| v * theta / (i + 1) as f64).sum();
    let base_third: f64 = a.iter().enumerate().map(|(i, v)| (v.abs() * theta / (i + 1) as f64).powi(3)).sum();

    let draws: Vec<(f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.substream(i).rng();
            let mut hits = Vec::new();
            for_each_poisson_index(&harmonic, theta, &mut rng, |m| hits.push(m));
            hits.sort_unstable();
            let mut sum = 0.0;
            let mut third = base_third;
            let mut k = 0;
            while k < hits.len() {
                let m = hits[k];
                let mut count = 0;
                while k < hits.len() && hits[k] == m {
                    count += 1;
                    k += 1;
                }
                let am = a[m - 1];
                let lambda = theta / m as f64;
                sum += am * count as f64;
                third += am.abs().powi(3) * ((count as f64 - lambda).abs().powi(3) - lambda.powi(3));
            }
            ((sum - centering) / scale, third / log_n.powf(1.5))
        })
        .collect();

    let xs: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let third_mc = draws.iter().map(|d| d.1).sum::<f64>() / samples as f64;
    let d_w = if terms.variance > 0.0 {
        wasserstein_1d(&xs, 0.0, terms.variance.sqrt())?
    } else {
        // degenerate target: the point mass at 0
        xs.iter().map(|v| v.abs()).sum::<f64>() / samples as f64
    };
    let stein_bound = 3.0 * terms.variance.powf(1.5) * terms.third;
    let standardized_bound = if terms.variance > 0.0 { 3.0 * terms.third / terms.variance } else { 0.0 };
    Ok(WassersteinReport {
        n,
        samples,
        d_w_re: d_w,
        d_w_im: None,
        variance: terms.variance,
        stein_bound,
        standardized_bound,
        third_moment_series: terms.third,
        third_moment_mc: Some(third_mc),
        respects_printed_bound: d_w <= stein_bound,
        respects_standardized_bound: d_w <= standardized_bound,
        trend_coefficient: d_w * scale,
    })
}

/// `d_W` of the real and imaginary parts of the statistic against
/// `N(0, theta V_a)` and `N(0, theta V_b)` at every `n` of the grid.
pub fn wasserstein_experiment(config: &ExperimentConfig) -> Result<Vec<WassersteinReport>> {
    config.validate()?;
    let limit = config.limit_parameters()?;
    let mut out = Vec::new();
    for &n in &config.n_grid {
        let draws = sample_draws(config, &limit, n)?;
        let samples = accepted(&draws);
        if samples.len() < 2 {
            return Err(Error::invalid(format!("fewer than two accepted draws at n = {n}")));
        }
        let re: Vec<f64> = samples.iter().map(|s| s.re).collect();
        let im: Vec<f64> = samples.iter().map(|s| s.im).collect();
        let sd_a = limit.sigma[0][0].sqrt();
        let sd_b = limit.sigma[1][1].sqrt();
        let d_w_re = if sd_a > 0.0 { wasserstein_1d(&re, 0.0, sd_a)? } else { mean_abs(&re) };
        let d_w_im = if sd_b > 0.0 { wasserstein_1d(&im, 0.0, sd_b)? } else { mean_abs(&im) };
        let log_n = (n as f64).ln();
        let a: Vec<f64> = crate::circle::LogTable::new(&config.f, &config.x, n).iter().map(|v| v.re).collect();
        let terms = bound_terms(&a, config.theta, log_n);
        let stein_bound = 3.0 * terms.variance.powf(1.5) * terms.third;
        let standardized_bound = if terms.variance > 0.0 { 3.0 * terms.third / terms.variance } else { 0.0 };
        out.push(WassersteinReport {
            n,
            samples: samples.len(),
            d_w_re,
            d_w_im: Some(d_w_im),
            variance: terms.variance,
            stein_bound,
            standardized_bound,
            third_moment_series: terms.third,
            third_moment_mc: None,
            respects_printed_bound: d_w_re <= stein_bound,
            respects_standardized_bound: d_w_re <= standardized_bound,
            trend_coefficient: d_w_re * log_n.sqrt(),
        });
    }
    Ok(out)
}

fn mean_abs(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum::<f64>() / x.len() as f64
}

/// Largest `max / min` of `d_W sqrt(log n)` accepted as bounded.
pub const TREND_MAX_RATIO: f64 = 3.0;
/// Largest slope of `log(d_W sqrt(log n))` against `log log n` accepted as
/// non-exploding. An uncentered statistic has `d_W ~ sqrt(log n)`, i.e.
/// slope 1.
pub const TREND_MAX_SLOPE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub n: Vec<usize>,
    pub scaled: Vec<f64>,
    pub ratio: f64,
    pub slope: f64,
    pub bounded: bool,
    pub non_exploding: bool,
    pub passes: bool,
}

/// Checks that `d_W sqrt(log n)` stays bounded across the grid.
pub fn rate_trend(reports: &[WassersteinReport]) -> Result<TrendFit> {
    if reports.len() < 3 {
        return Err(Error::invalid("need at least three grid points"));
    }
    let scaled: Vec<f64> = reports.iter().map(|r| r.trend_coefficient).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = max / min;
    let xs: Vec<f64> = reports.iter().map(|r| (r.n as f64).ln().ln()).collect();
    let ys: Vec<f64> = scaled.iter().map(|s| s.ln()).collect();
    let (slope, _) = least_squares(&xs, &ys);
    let bounded = ratio <= TREND_MAX_RATIO;
    let non_exploding = slope <= TREND_MAX_SLOPE;
    Ok(TrendFit {
        n: reports.iter().map(|r| r.n).collect(),
        scaled,
        ratio,
        slope,
        bounded,
        non_exploding,
        passes: bounded && non_exploding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_samples(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0).rng();
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn self_distance_is_small() {
        let x = normal_samples(100_000, 1);
        assert!(wasserstein_1d(&x, 0.0, 1.0).unwrap() <= 0.01);
    }

    #[test]
    fn quantiles_give_zero() {
        let n = 10_000;
        let normal = Normal::standard();
        let q: Vec<f64> = (0..n).map(|k| normal.inverse_cdf((k as f64 + 0.5) / n as f64)).collect();
        assert!(wasserstein_1d(&q, 0.0, 1.0).unwrap() <= 1e-3);
    }

    #[test]
    fn shift_adds_its_size() {
        let x: Vec<f64> = normal_samples(100_000, 2).iter().map(|v| v + 0.3).collect();
        assert!((wasserstein_1d(&x, 0.0, 1.0).unwrap() - 0.3).abs() < 0.01);
        assert!(wasserstein_1d(&[], 0.0, 1.0).is_err());
        assert!(wasserstein_1d(&[1.0, 2.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn empirical_distance_is_a_metric() {
        let mut rng = RngStream::new(3, 0).rng();
        for _ in 0..50 {
            let sizes: Vec<usize> = (0..3).map(|_| rng.random_range(1..40)).collect();
            let sets: Vec<Vec<f64>> = sizes.iter().map(|&s| (0..s).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect()).collect();
            let d = |i: usize, j: usize| wasserstein_empirical(&sets[i], &sets[j]).unwrap();
            assert!((d(0, 1) - d(1, 0)).abs() < 1e-9);
            assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
            assert!(d(0, 0) < 1e-15);
        }
        assert!((wasserstein_empirical(&[0.0], &[0.25, 0.75]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_coefficients() {
        let r = stein_bound_check(&[0.0; 100], 1.0, 100, 200, &RngStream::new(1, 1)).unwrap();
        assert_eq!(r.d_w_re, 0.0);
        assert_eq!(r.stein_bound, 0.0);
    }

    #[test]
    fn third_moment_two_ways() {
        let f = crate::circle::CircleFunction::one_minus_z();
        let n = 10_000;
        let a: Vec<f64> = crate::circle::LogTable::new(&f, &crate::point::EvaluationPoint::golden(), n).iter().map(|v| v.re).collect();
        let r = stein_bound_check(&a, 1.0, n, 400_000, &RngStream::new(4, 0)).unwrap();
        let mc = r.third_moment_mc.unwrap();
        assert!((mc - r.third_moment_series).abs() / r.third_moment_series < 0.01, "{mc} vs {}", r.third_moment_series);
        assert!(r.d_w_re > 0.0 && r.d_w_re < 1.0);
    }

    fn report(n: usize, scaled: f64) -> WassersteinReport {
        let d = scaled / (n as f64).ln().sqrt();
        WassersteinReport {
            n,
            samples: 1000,
            d_w_re: d,
            d_w_im: None,
            variance: 1.0,
            stein_bound: 0.0,
            standardized_bound: 0.0,
            third_moment_series: 0.0,
            third_moment_mc: None,
            respects_printed_bound: false,
            respects_standardized_bound: false,
            trend_coefficient: scaled,
        }
    }

    #[test]
    fn trend_rules() {
        let grid = [100usize, 1000, 10_000, 100_000];
        let flat: Vec<_> = grid.iter().zip([0.11, 0.09, 0.1, 0.12]).map(|(&n, s)| report(n, s)).collect();
        assert!(rate_trend(&flat).unwrap().passes);
        // d_W ~ sqrt(log n): scaled grows like log n
        let growing: Vec<_> = grid.iter().map(|&n| report(n, 0.1 * (n as f64).ln())).collect();
        let t = rate_trend(&growing).unwrap();
        assert!(!t.non_exploding && (t.slope - 1.0).abs() < 1e-9);
        assert!(rate_trend(&flat[..2]).is_err());
    }
}
