//! Exact characteristic function of the centered Poisson surrogate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circle::{CircleFunction, LogTable};
use crate::error::{Error, Result};
use crate::mahler::{covariance_parameters, LimitParameters, QuadratureConfig};
use crate::point::EvaluationPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharFnGrid {
    pub n: usize,
    pub theta: f64,
    pub points: Vec<[f64; 2]>,
    pub values_exact: Vec<[f64; 2]>,
    pub values_limit: Vec<[f64; 2]>,
    /// `|values_exact - values_limit|` per point.
    pub gaps: Vec<f64>,
}

/// `chi_n(t_a, t_b) = exp(theta sum_{m<=n} (e^{i u_m} - 1 - i u_m) / m)` with
/// `u_m = (t_a a_m + t_b b_m) / sqrt(log n)`, the characteristic function
/// of `sum_m (a_m, b_m) (Y_m - theta/m) / sqrt(log n)`, next to the limit
/// `exp(-theta (V_a t_a^2 / 2 + V_b t_b^2 / 2 + E_ab t_a t_b))`.
pub fn exact_char_fn(
    f: &CircleFunction,
    x: &EvaluationPoint,
    theta: f64,
    n: usize,
    grid: &[[f64; 2]],
) -> Result<CharFnGrid> {
    let limit = covariance_parameters(f, theta, x, &QuadratureConfig::default())?;
    let table = LogTable::new(f, x, n);
    char_fn_from_table(&table, &limit, grid)
}

/// As [`exact_char_fn`] with a precomputed table and limit parameters.
pub fn char_fn_from_table(table: &LogTable, limit: &LimitParameters, grid: &[[f64; 2]]) -> Result<CharFnGrid> {
    let n = table.n();
    if n < 2 {
        return Err(Error::invalid("n must be at least 2"));
    }
    if let Some(m) = table.first_infinite() {
        return Err(Error::InfiniteValue { m });
    }
    let theta = limit.theta;
    let scale = (n as f64).ln().sqrt();
    let mut values_exact = Vec::with_capacity(grid.len());
    let mut values_limit = Vec::with_capacity(grid.len());
    let mut gaps = Vec::with_capacity(grid.len());
    for &[ta, tb] in grid {
        let mut exponent = Complex64::new(0.0, 0.0);
        if ta != 0.0 || tb != 0.0 {
            for (i, v) in table.iter().enumerate() {
                let u = (ta * v.re + tb * v.im) / scale;
                let half = 0.5 * u;
                // e^{iu} - 1 - iu without cancellation in the real part
                let term = Complex64::new(-2.0 * half.sin() * half.sin(), u.sin() - u);
                exponent += term / (i + 1) as f64;
            }
        }
        let exact = (exponent * theta).exp();
        let lim = (-theta * (limit.v_a * ta * ta / 2.0 + limit.v_b * tb * tb / 2.0 + limit.e_ab * ta * tb)).exp();
        gaps.push((exact - lim).norm());
        values_exact.push([exact.re, exact.im]);
        values_limit.push([lim, 0.0]);
    }
    Ok(CharFnGrid { n, theta, points: grid.to_vec(), values_exact, values_limit, gaps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_one_and_conjugate_symmetry() {
        let f = CircleFunction::one_minus_z();
        let g = exact_char_fn(&f, &EvaluationPoint::golden(), 1.0, 1000, &[[0.0, 0.0], [1.0, 0.5], [-1.0, -0.5]]).unwrap();
        assert_eq!(g.values_exact[0], [1.0, 0.0]);
        assert_eq!(g.values_limit[0], [1.0, 0.0]);
        let (a, b) = (g.values_exact[1], g.values_exact[2]);
        assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] + b[1]).abs() < 1e-14);
        assert!(Complex64::new(a[0], a[1]).norm() <= 1.0);
    }

    #[test]
    fn gap_shrinks_with_n() {
        let f = CircleFunction::one_minus_z();
        let x = EvaluationPoint::golden();
        let mut last = f64::INFINITY;
        for n in [100, 1000, 10_000, 100_000] {
            let g = exact_char_fn(&f, &x, 1.0, n, &[[1.0, 0.0]]).unwrap();
            assert!(g.gaps[0] < last, "n = {n}");
            last = g.gaps[0];
        }
    }

    #[test]
    fn zero_hit_is_an_error() {
        let f = CircleFunction::one_minus_z();
        let x = EvaluationPoint::rational(1, 2).unwrap();
        let table = LogTable::new(&f, &x, 10);
        let limit = covariance_parameters(&CircleFunction::from_real("2-z", &[2.0, -1.0], &[]).unwrap(), 1.0, &x, &QuadratureConfig::default()).unwrap();
        assert_eq!(char_fn_from_table(&table, &limit, &[[1.0, 0.0]]), Err(Error::InfiniteValue { m: 2 }));
    }
}
