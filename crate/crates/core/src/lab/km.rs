//! Poisson moment series and the covariance singularity test.

use serde::{Deserialize, Serialize};

use crate::circle::CircleFunction;
use crate::error::{Error, Result};
use crate::mahler::{covariance_parameters, QuadratureConfig};
use crate::point::EvaluationPoint;

const TAIL_CUTOFF: f64 = 1e-30;

/// Calls `term(k, P(Y = k))` for `Y ~ Poisson(lambda)`, stopping past the
/// mode once `P(Y = k)` drops below the cutoff.
fn poisson_series(lambda: f64, mut term: impl FnMut(f64, f64)) {
    let mut p = (-lambda).exp();
    let mut k = 0.0;
    loop {
        term(k, p);
        k += 1.0;
        p *= lambda / k;
        // past the mode the terms fall off factorially
        if k > lambda && p < TAIL_CUTOFF {
            break;
        }
    }
}

/// `E|Y - lambda|^r` for `Y ~ Poisson(lambda)`, by series.
pub fn poisson_central_abs_moment(lambda: f64, r: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    poisson_series(lambda, |k, p| s += p * (k - lambda).abs().powf(r));
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmMoments {
    pub m: u64,
    pub theta: f64,
    pub lambda: f64,
    /// `int_0^inf K_m(t) dt = E[(Y - lambda) Y]`.
    pub int_k: f64,
    /// `int_0^inf t K_m(t) dt = E[(Y - lambda) Y^2] / 2`.
    pub int_tk: f64,
}

/// Moments of `K_m(t) = E[(Y_m - theta/m) 1{0 <= t <= Y_m}]`,
/// `Y_m ~ Poisson(theta / m)`.
pub fn km_moments(m: u64, theta: f64) -> Result<KmMoments> {
    if m == 0 || !(theta > 0.0) {
        return Err(Error::invalid("need m >= 1 and theta > 0"));
    }
    let lambda = theta / m as f64;
    let (mut int_k, mut int_tk) = (0.0, 0.0);
    poisson_series(lambda, |k, p| {
        int_k += p * (k - lambda) * k;
        int_tk += p * (k - lambda) * k * k / 2.0;
    });
    Ok(KmMoments { m, theta, lambda, int_k, int_tk })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    pub singular: bool,
    pub gram_determinant: f64,
    #[serde(rename = "V_a")]
    pub v_a: f64,
    #[serde(rename = "V_b")]
    pub v_b: f64,
    #[serde(rename = "E_ab")]
    pub e_ab: f64,
}

/// Relative tolerance of the singularity verdict.
pub const SINGULARITY_TOLERANCE: f64 = 1e-9;

/// `Sigma` is singular iff `V_a V_b = E_ab^2`; the verdict compares the gram
/// determinant with `(V_a + V_b)^2`, so that `V_b = 0` also counts.
pub fn sigma_singularity_test(f: &CircleFunction, x: &EvaluationPoint, config: &QuadratureConfig) -> Result<SingularityReport> {
    let lp = covariance_parameters(f, 1.0, x, config)?;
    let det = lp.gram_determinant();
    let scale = (lp.v_a + lp.v_b).powi(2);
    Ok(SingularityReport {
        singular: det <= SINGULARITY_TOLERANCE * scale,
        gram_determinant: det,
        v_a: lp.v_a,
        v_b: lp.v_b,
        e_ab: lp.e_ab,
    })
}
