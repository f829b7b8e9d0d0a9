//! Quadrature rules: double-exponential (tanh-sinh) panels for integrands
//! with endpoint singularities, plus Gauss-Legendre and Gauss-Hermite nodes.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A quadrature node `s = anchor + offset`, where `anchor` is the nearer
/// panel endpoint. The offset is exact even when it is far below the
/// spacing of doubles around `anchor`, so integrands with singularities at
/// panel endpoints can evaluate `s - anchor` without cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelPoint {
    pub s: f64,
    pub anchor: f64,
    pub offset: f64,
}

impl PanelPoint {
    pub fn at(s: f64) -> Self {
        Self { s, anchor: s, offset: 0.0 }
    }

    /// `s - c`, computed as `(anchor - c) + offset`.
    pub fn minus(&self, c: f64) -> f64 {
        (self.anchor - c) + self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

const TMAX: f64 = 4.0;
const MIN_LEVEL: usize = 3;
const MAX_LEVEL: usize = 10;
const MAX_SPLIT_DEPTH: usize = 8;

/// Tanh-sinh rule on `[lo, hi]` for `N` integrands sharing evaluations.
///
/// Levels halve the step in `t`; the error estimate is the difference
/// between the last two levels, which overstates the true error because the
/// rule converges quadratically. Returns `None` if `tol` is not reached by
/// the last level.
pub fn tanh_sinh<const N: usize>(
    lo: f64,
    hi: f64,
    tol: f64,
    f: &mut impl FnMut(PanelPoint) -> [f64; N],
) -> ([Estimate; N], bool) {
    let half = 0.5 * (hi - lo);
    let mut raw = [0.0; N];
    let mut prev = [f64::NAN; N];
    let mut out = [Estimate::default(); N];

    let mut add = |t: f64, raw: &mut [f64; N]| {
        let u = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * u.abs()).exp();
        let one_minus = 2.0 * e / (1.0 + e);
        let w = FRAC_PI_2 * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        let dist = half * one_minus;
        if dist == 0.0 || w == 0.0 {
            return;
        }
        let p = if t == 0.0 {
            PanelPoint { s: lo + half, anchor: lo, offset: half }
        } else if t > 0.0 {
            PanelPoint { s: hi - dist, anchor: hi, offset: -dist }
        } else {
            PanelPoint { s: lo + dist, anchor: lo, offset: dist }
        };
        let v = f(p);
        for k in 0..N {
            raw[k] += w * v[k];
        }
    };

    let steps = TMAX as i64;
    for j in -steps..=steps {
        add(j as f64, &mut raw);
    }
    for level in 0..=MAX_LEVEL {
        let h = 0.5f64.powi(level as i32);
        if level > 0 {
            let count = (TMAX / h) as i64;
            let mut j = 1;
            while j <= count {
                let t = j as f64 * h;
                add(t, &mut raw);
                add(-t, &mut raw);
                j += 2;
            }
        }
        let mut done = level >= MIN_LEVEL;
        for k in 0..N {
            let value = half * h * raw[k];
            let error = (value - prev[k]).abs();
            out[k] = Estimate { value, error: if error.is_nan() { f64::INFINITY } else { error } };
            prev[k] = value;
            if !(out[k].error <= tol) {
                done = false;
            }
        }
        if done {
            return (out, true);
        }
    }
    (out, false)
}

/// Integrates over consecutive panels `[breaks[i], breaks[i+1]]`. Panels that
/// do not converge are bisected; the total error budget `tol` is split
/// evenly between the initial panels.
pub fn integrate_panels<const N: usize>(
    breaks: &[f64],
    tol: f64,
    f: &mut impl FnMut(PanelPoint) -> [f64; N],
) -> Result<[Estimate; N]> {
    let panels = breaks.len().saturating_sub(1).max(1);
    let per_panel = tol / panels as f64;
    let mut total = [Estimate::default(); N];
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let est = adaptive(w[0], w[1], per_panel, 0, f)?;
        for k in 0..N {
            total[k].value += est[k].value;
            total[k].error += est[k].error;
        }
    }
    Ok(total)
}

fn adaptive<const N: usize>(
    lo: f64,
    hi: f64,
    tol: f64,
    depth: usize,
    f: &mut impl FnMut(PanelPoint) -> [f64; N],
) -> Result<[Estimate; N]> {
    let (est, ok) = tanh_sinh(lo, hi, tol, f);
    if ok {
        return Ok(est);
    }
    if depth >= MAX_SPLIT_DEPTH {
        let error = est.iter().map(|e| e.error).fold(0.0, f64::max);
        return Err(Error::Quadrature { lo, hi, error });
    }
    let mid = 0.5 * (lo + hi);
    let a = adaptive(lo, mid, 0.5 * tol, depth + 1, f)?;
    let b = adaptive(mid, hi, 0.5 * tol, depth + 1, f)?;
    let mut out = [Estimate::default(); N];
    for k in 0..N {
        out[k] = Estimate { value: a[k].value + b[k].value, error: a[k].error + b[k].error };
    }
    Ok(out)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        (p0, p1) = (p1, ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Nodes and weights for `E g(Z)`, `Z ~ N(0, 1)`: `E g(Z) ~ sum_i w_i g(x_i)`,
/// with the weights summing to one.
pub fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    // physicists' rule (weight e^{-x^2}) by Newton iteration on the
    // orthonormal recurrence, then rescaled
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let pim4 = PI.powf(-0.25);
    let mut z = 0.0;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let norm = PI.sqrt();
    let xs = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
    let ws = w.iter().map(|v| v / norm).collect();
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_sinh_polynomial() {
        let ([e], ok) = tanh_sinh(0.0, 2.0, 1e-13, &mut |p: PanelPoint| [p.s * p.s]);
        assert!(ok);
        assert!((e.value - 8.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn tanh_sinh_log_endpoint() {
        // int_0^1 ln s ds = -1 and int_0^1 ln^2 s ds = 2, with the singular
        // endpoint seen through the exact offset
        let ([a, b], ok) = tanh_sinh(0.0, 1.0, 1e-12, &mut |p: PanelPoint| {
            let d = p.minus(0.0);
            [d.ln(), d.ln().powi(2)]
        });
        assert!(ok);
        assert!((a.value + 1.0).abs() < 1e-12, "{}", a.value);
        assert!((b.value - 2.0).abs() < 1e-12, "{}", b.value);
    }

    #[test]
    fn offsets_are_exact_near_endpoints() {
        let mut tiny = f64::INFINITY;
        let _ = tanh_sinh(0.25, 0.5, 1e-14, &mut |p: PanelPoint| {
            tiny = tiny.min(p.minus(0.5).abs());
            [1.0]
        });
        assert!(tiny < 1e-30);
    }

    #[test]
    fn panels_split_at_interior_singularity() {
        // int_0^1 ln|s - 1/2| ds = -1 - ln 2
        let [e] = integrate_panels(&[0.0, 0.5, 1.0], 1e-11, &mut |p: PanelPoint| [p.minus(0.5).abs().ln()]).unwrap();
        assert!((e.value - (-1.0 - 2f64.ln())).abs() < 1e-11);
    }

    #[test]
    fn legendre_rule_exact_for_polynomials() {
        let (x, w) = gauss_legendre(12);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m22: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((m22 - 2.0 / 23.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_rule_moments() {
        let (x, w) = gauss_hermite_normal(40);
        let m = |k: i32| -> f64 { x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum() };
        assert!((m(0) - 1.0).abs() < 1e-13);
        assert!((m(2) - 1.0).abs() < 1e-12);
        assert!((m(4) - 3.0).abs() < 1e-11);
        assert!((m(8) - 105.0).abs() < 1e-9);
        assert!(m(3).abs() < 1e-12);
        // E cos(Z) = e^{-1/2}
        let c: f64 = x.iter().zip(&w).map(|(x, w)| w * x.cos()).sum();
        assert!((c - (-0.5f64).exp()).abs() < 1e-14);
    }
}
