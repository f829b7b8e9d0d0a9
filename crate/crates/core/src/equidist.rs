//! Fractional-part sequences `{m t}`, discrepancy and finite type.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mahler::total_variation;
use crate::point::EvaluationPoint;
use crate::quad::integrate_panels;

/// `{m t}` for `m = 1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FracSequence {
    pub t: Option<EvaluationPoint>,
    pub values: Vec<f64>,
    /// Largest absolute error of any value.
    pub precision_bound: f64,
}

impl FracSequence {
    /// An arbitrary point set in `[0, 1)`, taken as exact.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("sequence values must lie in [0, 1]"));
        }
        Ok(Self { t: None, values, precision_bound: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn frac_parts(t: &EvaluationPoint, n: usize) -> Result<FracSequence> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    Ok(FracSequence {
        t: Some(t.clone()),
        values: t.frac_iter().take(n).collect(),
        precision_bound: t.precision_bound(n as u64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub n: usize,
    pub d_star: f64,
    pub d_n: f64,
    /// Whether the input was already in ascending order.
    pub sorted: bool,
}

/// `D*_n = max_i max(i/n - x_(i), x_(i) - (i-1)/n)` over the sorted points,
/// and `D_n = 1/n + max_i (i/n - x_(i)) - min_i (i/n - x_(i))`.
pub fn star_discrepancy(seq: &FracSequence) -> Result<DiscrepancyReport> {
    if seq.is_empty() {
        return Err(Error::invalid("empty sequence"));
    }
    let sorted = seq.values.windows(2).all(|w| w[0] <= w[1]);
    let mut x = seq.values.clone();
    if !sorted {
        x.sort_by(f64::total_cmp);
    }
    let n = x.len() as f64;
    let mut d_star: f64 = 0.0;
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for (i, &v) in x.iter().enumerate() {
        let above = (i + 1) as f64 / n - v;
        let below = v - i as f64 / n;
        d_star = d_star.max(above).max(below);
        hi = hi.max(above);
        lo = lo.min(above);
    }
    Ok(DiscrepancyReport { n: x.len(), d_star, d_n: 1.0 / n + hi - lo, sorted })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteTypeReport {
    pub gamma: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub max_m: u64,
    /// Grid denominator for the shifted certificate, if any.
    pub grid_q: Option<u64>,
    /// The first violations (at most [`MAX_LISTED_VIOLATIONS`]).
    pub violations: Vec<u64>,
    pub violation_count: u64,
    /// `min_m dist_m * m^gamma`; the certificate holds iff this exceeds `K`.
    pub min_scaled_distance: f64,
    pub eta_estimate: f64,
}

pub const MAX_LISTED_VIOLATIONS: usize = 10_000;

impl FiniteTypeReport {
    pub fn holds(&self) -> bool {
        self.violation_count == 0
    }
}

/// Checks `||{m t}|| > K / m^gamma` for `1 <= m <= max_m`, or with `grid_q`
/// the shifted form `min_p |{m t} - p/q| > K / m^gamma`.
pub fn finite_type_scan(
    t: &EvaluationPoint,
    gamma: f64,
    k: f64,
    max_m: u64,
    grid_q: Option<u64>,
) -> Result<FiniteTypeReport> {
    let Some(irr) = t.irrational() else {
        return Err(Error::invalid(format!("finite type needs an irrational t given by a continued fraction, got {t}")));
    };
    if max_m == 0 || !(gamma > 0.0) || !(k > 0.0) {
        return Err(Error::invalid("need max_m >= 1, gamma > 0, K > 0"));
    }
    if grid_q == Some(0) {
        return Err(Error::invalid("grid denominator must be positive"));
    }
    let q = grid_q.unwrap_or(1) as f64;
    let mut violations = Vec::new();
    let mut count = 0u64;
    let mut min_scaled = f64::INFINITY;
    for (i, v) in t.frac_iter().take(max_m as usize).enumerate() {
        let m = (i + 1) as u64;
        let y = v * q;
        let dist = (y - y.round()).abs() / q;
        let scaled = dist * (m as f64).powf(gamma);
        min_scaled = min_scaled.min(scaled);
        if scaled <= k {
            count += 1;
            if violations.len() < MAX_LISTED_VIOLATIONS {
                violations.push(m);
            }
        }
    }
    Ok(FiniteTypeReport {
        gamma,
        k,
        max_m,
        grid_q,
        violations,
        violation_count: count,
        min_scaled_distance: min_scaled,
        eta_estimate: irr.type_estimate(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KoksmaReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `|n^{-1} sum h(t_m) - int h| <= V(h) D*_n`.
pub fn koksma_check(h: impl Fn(f64) -> f64, variation: f64, seq: &FracSequence, integral: f64) -> Result<KoksmaReport> {
    let d = star_discrepancy(seq)?;
    let mean = seq.values.iter().map(|&v| h(v)).sum::<f64>() / seq.len() as f64;
    let lhs = (mean - integral).abs();
    let rhs = variation * d.d_star;
    Ok(KoksmaReport { lhs, rhs, holds: lhs <= rhs + 1e-12 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedKoksmaReport {
    pub delta: f64,
    pub lhs: f64,
    pub d_star: f64,
    /// Total variation of `h` on the retained set `I`.
    pub variation: f64,
    pub boundary_term: f64,
    pub integral: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Koksma's inequality on `I = union [s_k + delta, s_{k+1} - delta]`, where
/// `0 = s_0 < s_1 < ... < s_{d+1} = 1` and `singular` lists the interior
/// `s_k`. The integral and the variation on `I` are computed numerically.
pub fn koksma_excluded_check(
    h: impl Fn(f64) -> f64,
    seq: &FracSequence,
    singular: &[f64],
    delta: f64,
) -> Result<ExcludedKoksmaReport> {
    if !(delta > 0.0) {
        return Err(Error::invalid("delta must be positive"));
    }
    let mut s = vec![0.0];
    s.extend(singular.iter().copied().filter(|&v| v > 0.0 && v < 1.0));
    s.push(1.0);
    s.sort_by(f64::total_cmp);
    if s.windows(2).any(|w| w[1] - w[0] <= 2.0 * delta) {
        return Err(Error::invalid("singular points must be more than 2 delta apart"));
    }
    for (i, &v) in seq.values.iter().enumerate() {
        if s.iter().any(|&sk| (v - sk).abs() <= delta) {
            return Err(Error::Precondition {
                m: i + 1,
                reason: format!("value {v} lies within delta = {delta:e} of a singular point"),
            });
        }
    }
    let pieces: Vec<(f64, f64)> = s.windows(2).map(|w| (w[0] + delta, w[1] - delta)).collect();
    let mut integral = 0.0;
    let mut variation = 0.0;
    let mut boundary = 0.0;
    for &(lo, hi) in &pieces {
        let [e] = integrate_panels(&[lo, hi], 1e-12, &mut |p| [h(p.s)])?;
        integral += e.value;
        // grid fine enough that the log-type growth next to the exclusions
        // is resolved; h is monotone there
        variation += total_variation(&h, lo, hi, &[], 1 << 16);
        boundary += h(lo).abs() + h(hi).abs();
    }
    let boundary_term = delta * boundary;
    let d = star_discrepancy(seq)?;
    let mean = seq.values.iter().map(|&v| h(v)).sum::<f64>() / seq.len() as f64;
    let lhs = (mean - integral).abs();
    let rhs = d.d_star * variation + boundary_term;
    Ok(ExcludedKoksmaReport {
        delta,
        lhs,
        d_star: d.d_star,
        variation,
        boundary_term,
        integral,
        rhs,
        holds: lhs <= rhs + 1e-12,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub n: Vec<usize>,
    pub d_star: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

/// Least-squares slope of `log D*_n` against `log n`.
pub fn discrepancy_decay_fit(t: &EvaluationPoint, n_grid: &[usize]) -> Result<DecayFit> {
    if t.is_rational() {
        return Err(Error::Refused(format!("discrepancy of {t} does not decay; a decay fit needs irrational t")));
    }
    if n_grid.len() < 2 {
        return Err(Error::invalid("need at least two grid points"));
    }
    let max_n = *n_grid.iter().max().unwrap();
    let all: Vec<f64> = t.frac_iter().take(max_n).collect();
    let mut d_star = Vec::new();
    for &n in n_grid {
        let seq = FracSequence { t: Some(t.clone()), values: all[..n].to_vec(), precision_bound: t.precision_bound(n as u64) };
        d_star.push(star_discrepancy(&seq)?.d_star);
    }
    let xs: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = d_star.iter().map(|d| d.ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    let residuals = xs.iter().zip(&ys).map(|(x, y)| y - (slope * x + intercept)).collect();
    Ok(DecayFit { n: n_grid.to_vec(), d_star, slope, intercept, residuals })
}

/// Slope and intercept of the least-squares line.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogWeightedSum {
    pub n: u64,
    /// `sum_{m <= n} a_m / m`.
    pub sum: f64,
    /// `sum_{n/2 < m <= n} a_m / m`.
    pub half_range: f64,
    #[serde(rename = "E_fit")]
    pub e_fit: f64,
    #[serde(rename = "K_fit")]
    pub k_fit: f64,
    /// Grid `n / 2^j`, `j = 0..=6`, with the fit residuals.
    pub grid: Vec<u64>,
    pub residuals: Vec<f64>,
}

/// `sum_{m<=n} a_m / m` with a fit of `E log n + K` over the dyadic grid
/// `n / 2^j`, `j = 0..=6`.
pub fn log_weighted_sum(a: impl Fn(u64) -> f64, n: u64) -> Result<LogWeightedSum> {
    if n < 64 {
        return Err(Error::invalid("n must be at least 64 for the dyadic fit"));
    }
    let grid: Vec<u64> = (0..=6).rev().map(|j| n >> j).collect();
    let mut partial = Vec::with_capacity(grid.len());
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut next = 0;
    let mut at_half = 0.0;
    for m in 1..=n {
        // Kahan summation keeps the fit residuals meaningful at n ~ 10^7
        let y = a(m) / m as f64 - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if m == n / 2 {
            at_half = sum;
        }
        while next < grid.len() && grid[next] == m {
            partial.push(sum);
            next += 1;
        }
    }
    let xs: Vec<f64> = grid.iter().map(|&g| (g as f64).ln()).collect();
    let (e_fit, k_fit) = least_squares(&xs, &partial);
    let residuals = xs.iter().zip(&partial).map(|(x, y)| y - (e_fit * x + k_fit)).collect();
    Ok(LogWeightedSum { n, sum, half_range: sum - at_half, e_fit, k_fit, grid, residuals })
}

/// `sum a_m b_m` by partial summation:
/// `A_n b_n - sum_{m=1}^{n-1} A_m (b_{m+1} - b_m)` with `A_m = a_1 + ... + a_m`.
pub fn abel_sum(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid("sequences must have equal length"));
    }
    let n = a.len();
    if n == 0 {
        return Ok(0.0);
    }
    let mut big_a = 0.0;
    let mut correction = 0.0;
    for m in 0..n - 1 {
        big_a += a[m];
        correction += big_a * (b[m + 1] - b[m]);
    }
    big_a += a[n - 1];
    Ok(big_a * b[n - 1] - correction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn frac_parts_examples() {
        let half = EvaluationPoint::rational(1, 2).unwrap();
        assert_eq!(frac_parts(&half, 4).unwrap().values, vec![0.5, 0.0, 0.5, 0.0]);
        let third = frac_parts(&EvaluationPoint::rational(1, 3).unwrap(), 3).unwrap();
        assert_eq!(third.values, vec![1.0 / 3.0, 2.0 / 3.0, 0.0]);
        assert_eq!(third.precision_bound, 0.0);
        let g = frac_parts(&EvaluationPoint::golden(), 2).unwrap();
        assert!((g.values[0] - 0.618_034_0).abs() < 1e-7);
        assert!((g.values[1] - 0.236_068_0).abs() < 1e-7);
        assert!(frac_parts(&half, 0).is_err());
    }

    #[test]
    fn discrepancy_examples() {
        let one = FracSequence::from_values(vec![0.5]).unwrap();
        assert_eq!(star_discrepancy(&one).unwrap().d_star, 0.5);
        let n = 8;
        let mid = FracSequence::from_values((1..=n).map(|m| (2 * m - 1) as f64 / (2 * n) as f64).collect()).unwrap();
        let r = star_discrepancy(&mid).unwrap();
        assert!((r.d_star - 1.0 / 16.0).abs() < 1e-15);
        assert!(r.sorted);
        let half = frac_parts(&EvaluationPoint::rational(1, 2).unwrap(), 2).unwrap();
        let r = star_discrepancy(&half).unwrap();
        assert_eq!(r.d_star, 0.5);
        assert!(!r.sorted);
    }

    #[test]
    fn rational_discrepancy_stays_large() {
        let t = EvaluationPoint::rational(2, 7).unwrap();
        for n in [7, 70, 700, 7000] {
            let r = star_discrepancy(&frac_parts(&t, n).unwrap()).unwrap();
            assert!(r.d_n >= 1.0 / 14.0 - 1e-15);
            // periodic set {0, 1/7, ..., 6/7}: D* = 1/7
            assert!((r.d_star - 1.0 / 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn golden_discrepancy_decays() {
        let fit = discrepancy_decay_fit(&EvaluationPoint::golden(), &[100, 1000, 10_000, 100_000]).unwrap();
        assert!((-1.05..=-0.85).contains(&fit.slope), "{}", fit.slope);
        assert!(matches!(
            discrepancy_decay_fit(&EvaluationPoint::rational(1, 3).unwrap(), &[10, 100]),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn finite_type_examples() {
        let g = EvaluationPoint::golden();
        let r = finite_type_scan(&g, 1.01, 0.2, 1_000_000, None).unwrap();
        assert!(r.holds(), "{:?}", &r.violations[..r.violations.len().min(5)]);
        assert!((r.eta_estimate - 1.0).abs() < 0.05);
        let lv = EvaluationPoint::from_continued_fraction(vec![1, 10, 1_000, 1_000_000_000, 1_000_000_000_000_000_000]).unwrap();
        let r = finite_type_scan(&lv, 1.01, 0.2, 100_000, None).unwrap();
        assert!(!r.holds());
        assert!(r.violations.contains(&11_001));
        assert!(finite_type_scan(&EvaluationPoint::rational(1, 3).unwrap(), 1.0, 0.1, 10, None).is_err());
        // grid variant with q = 2
        let r = finite_type_scan(&g, 1.01, 0.1, 100_000, Some(2)).unwrap();
        assert!(r.holds());
    }

    #[test]
    fn koksma_examples() {
        let n = 10;
        let mid = FracSequence::from_values((1..=n).map(|m| (2 * m - 1) as f64 / (2 * n) as f64).collect()).unwrap();
        let r = koksma_check(|s| s, 1.0, &mid, 0.5).unwrap();
        assert!(r.lhs < 1e-15 && r.holds);
        let g = frac_parts(&EvaluationPoint::golden(), 10_000).unwrap();
        assert!(koksma_check(|s| s, 1.0, &g, 0.5).unwrap().holds);
        let third = frac_parts(&EvaluationPoint::rational(1, 3).unwrap(), 300).unwrap();
        let step = |s: f64| 1.0 / (1.0 + (-(s - 0.5) / 0.05).exp());
        // int_0^1 of the logistic step is 1/2 by symmetry; variation is step(1) - step(0)
        let r = koksma_check(step, step(1.0) - step(0.0), &third, 0.5).unwrap();
        assert!(r.holds, "{r:?}");
    }

    #[test]
    fn koksma_excluded_examples() {
        let n = 10_000;
        let g = frac_parts(&EvaluationPoint::golden(), n).unwrap();
        let h = |s: f64| (2.0 * (PI * s).sin()).abs().ln();
        let delta = 0.2 / (n as f64).powf(1.01);
        let r = koksma_excluded_check(h, &g, &[], delta).unwrap();
        assert!(r.holds, "{r:?}");
        let smooth = koksma_excluded_check(|s| s, &g, &[], 1e-9).unwrap();
        let plain = koksma_check(|s| s, 1.0, &g, 0.5).unwrap();
        assert!((smooth.rhs - plain.rhs).abs() < 1e-8);
        let half = frac_parts(&EvaluationPoint::rational(1, 2).unwrap(), 4).unwrap();
        assert!(matches!(koksma_excluded_check(h, &half, &[], 1e-3), Err(Error::Precondition { m: 2, .. })));
    }

    #[test]
    fn log_weighted_sum_examples() {
        let r = log_weighted_sum(|_| 1.0, 1_000_000).unwrap();
        assert!((r.e_fit - 1.0).abs() < 1e-4);
        assert!((r.k_fit - 0.577_215_664_901_532_9).abs() < 1e-4);
        assert!((r.half_range - 2f64.ln()).abs() < 1e-5);
        let alt = log_weighted_sum(|m| if m % 2 == 0 { 1.0 } else { -1.0 }, 1_000_000).unwrap();
        assert!(alt.e_fit.abs() < 1e-3);
        assert!((alt.k_fit + 2f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn abel_examples() {
        assert_eq!(abel_sum(&[1.0; 3], &[1.0; 3]).unwrap(), 3.0);
        let a = [1.0, 2.0, -3.0, 4.0];
        assert!((abel_sum(&a, &[2.5; 4]).unwrap() - 4.0 * 2.5).abs() < 1e-15);
        assert!(abel_sum(&[1.0], &[1.0, 2.0]).is_err());
    }
}
