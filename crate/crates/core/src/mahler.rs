//! The centering constant `m(f)` and the limit covariance.
//!
//! For a root of unity `x` of order `q` every quantity is an average over
//! `x^m`, `m = 1..q`. Otherwise it is an integral over the circle of
//! `a(s) = log|f(e^{2 pi i s})|` and `b(s) = arg f(e^{2 pi i s})`. The
//! integrals are split into panels at the declared zeros of `f` (where `a`
//! has logarithmic singularities and `b` jumps) and at the points where `b`
//! wraps from `pi` to `-pi`; each panel is integrated with a tanh-sinh rule,
//! which absorbs the endpoint logarithms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circle::{CircleFunction, LogValue};
use crate::error::{Error, Result};
use crate::point::EvaluationPoint;
use crate::quad::{integrate_panels, Estimate, PanelPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Equal sub-panels per gap between consecutive breakpoints.
    pub panels_per_gap: usize,
    /// Total absolute error budget for each integral.
    pub abs_tolerance: f64,
    /// Grid size for locating the jumps of `b`.
    pub jump_scan_points: usize,
    /// Bisection tolerance for the jump locations.
    pub jump_tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { panels_per_gap: 2, abs_tolerance: 1e-10, jump_scan_points: 1 << 14, jump_tolerance: 1e-13 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tolerance > 0.0) || self.panels_per_gap == 0 || self.jump_scan_points < 2 {
            return Err(Error::invalid("quadrature config needs abs_tolerance > 0, panels_per_gap >= 1, jump_scan_points >= 2"));
        }
        Ok(())
    }
}

/// `m(f)` at a root of unity: finite, or infinite because some `f(x^m) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MahlerValue {
    Finite(Complex64),
    Infinite { m: u64 },
}

/// `(1/q) sum_{m=1..q} log f(x^m)` with `x = e^{2 pi i p/q}`.
pub fn m_rational(f: &CircleFunction, p: i64, q: u64) -> Result<MahlerValue> {
    let x = EvaluationPoint::rational(p, q)?;
    let q = x.order().expect("rational");
    let mut sum = Complex64::new(0.0, 0.0);
    for m in 1..=q {
        let l = f.log_at_point(&x, m);
        if l.infinite {
            return Ok(MahlerValue::Infinite { m });
        }
        sum += l.to_complex();
    }
    Ok(MahlerValue::Finite(sum / q as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexEstimate {
    pub value: Complex64,
    pub error: f64,
}

/// `int_0^1 log f(e^{2 pi i s}) ds`.
pub fn m_irrational(f: &CircleFunction, config: &QuadratureConfig) -> Result<ComplexEstimate> {
    let panels = CirclePanels::new(f, config)?;
    let [a, b] = panels.integrate(config.abs_tolerance, |l| [l.re, l.im])?;
    Ok(ComplexEstimate { value: Complex64::new(a.value, b.value), error: a.error + b.error })
}

/// Panel decomposition of `[0, 1]` for integrals of functions of `log f`.
#[derive(Debug, Clone)]
pub struct CirclePanels<'a> {
    f: &'a CircleFunction,
    breaks: Vec<f64>,
    jumps: Vec<Jump>,
}

#[derive(Debug, Clone, Copy)]
struct Jump {
    at: f64,
    /// Sign of `b` just left and right of the jump.
    left: f64,
    right: f64,
}

/// Points closer than this to a located jump are checked against the side's
/// branch.
const BRANCH_GUARD: f64 = 1e-10;

impl<'a> CirclePanels<'a> {
    pub fn new(f: &'a CircleFunction, config: &QuadratureConfig) -> Result<Self> {
        config.validate()?;
        let zeros = f.zero_angles();
        let jumps = find_jumps(f, config);
        let mut cuts: Vec<f64> = vec![0.0, 1.0];
        cuts.extend(zeros.iter().copied());
        cuts.extend(jumps.iter().map(|j| j.at));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        let mut breaks = Vec::new();
        for w in cuts.windows(2) {
            let k = config.panels_per_gap;
            for i in 0..k {
                breaks.push(w[0] + (w[1] - w[0]) * i as f64 / k as f64);
            }
        }
        breaks.push(1.0);
        Ok(Self { f, breaks, jumps })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Locations of the jumps of `b` away from the zeros of `f`.
    pub fn jump_points(&self) -> Vec<f64> {
        self.jumps.iter().map(|j| j.at).collect()
    }

    /// `log f` at a panel node, with the branch of `b` fixed next to jumps.
    pub fn log_at(&self, p: PanelPoint) -> LogValue {
        let mut l = self.f.log_at(p.anchor, p.offset);
        if l.infinite || l.im.abs() < std::f64::consts::FRAC_PI_2 {
            return l;
        }
        for j in &self.jumps {
            let d = p.minus(j.at);
            if d.abs() < BRANCH_GUARD {
                let want = if d < 0.0 { j.left } else { j.right };
                if l.im.signum() != want {
                    l.im -= std::f64::consts::TAU * l.im.signum();
                }
            }
        }
        l
    }

    pub fn integrate<const N: usize>(&self, tol: f64, g: impl Fn(LogValue) -> [f64; N]) -> Result<[Estimate; N]> {
        integrate_panels(&self.breaks, tol, &mut |p| g(self.log_at(p)))
    }
}

fn find_jumps(f: &CircleFunction, config: &QuadratureConfig) -> Vec<Jump> {
    let n = config.jump_scan_points;
    let zeros = f.zero_angles();
    let b = |s: f64| f.log_f(s);
    let near_zero = |lo: f64, hi: f64| zeros.iter().any(|&z| (lo <= z && z <= hi) || (z == 0.0 && hi >= 1.0));
    let mut jumps = Vec::new();
    let mut prev = b(0.0);
    for k in 1..=n {
        let (lo, hi) = ((k - 1) as f64 / n as f64, k as f64 / n as f64);
        let cur = b(hi);
        if !prev.infinite && !cur.infinite && !near_zero(lo, hi) && (cur.im - prev.im).abs() > std::f64::consts::PI {
            let (mut l, mut r) = (lo, hi);
            let bl = prev.im;
            while r - l > config.jump_tolerance {
                let mid = 0.5 * (l + r);
                let bm = b(mid);
                if bm.infinite {
                    break;
                }
                if (bm.im - bl).abs() > std::f64::consts::PI {
                    r = mid;
                } else {
                    l = mid;
                }
            }
            let at = 0.5 * (l + r);
            // signs are read safely away from the jump
            let left = b(at - 1e-9).im.signum();
            let right = b(at + 1e-9).im.signum();
            jumps.push(Jump { at, left, right });
        }
        prev = cur;
    }
    jumps
}

/// `m(f)`, `V_a`, `V_b`, `E_ab` and `Sigma = theta [[V_a, E_ab], [E_ab, V_b]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitParameters {
    #[serde(with = "complex_pair")]
    pub m_f: Complex64,
    #[serde(rename = "V_a")]
    pub v_a: f64,
    #[serde(rename = "V_b")]
    pub v_b: f64,
    #[serde(rename = "E_ab")]
    pub e_ab: f64,
    pub theta: f64,
    pub sigma: [[f64; 2]; 2],
    /// `(theta / 2) Im int log^2 f`.
    pub covariance_scalar: f64,
    pub quadrature_error: f64,
}

impl LimitParameters {
    pub fn gram_determinant(&self) -> f64 {
        self.v_a * self.v_b - self.e_ab * self.e_ab
    }

    /// Same `f` and `x` with another `theta`.
    pub fn with_theta(&self, theta: f64) -> Self {
        let r = theta / self.theta;
        Self {
            theta,
            sigma: [[self.sigma[0][0] * r, self.sigma[0][1] * r], [self.sigma[1][0] * r, self.sigma[1][1] * r]],
            covariance_scalar: self.covariance_scalar * r,
            ..*self
        }
    }
}

pub(crate) mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

pub fn covariance_parameters(
    f: &CircleFunction,
    theta: f64,
    x: &EvaluationPoint,
    config: &QuadratureConfig,
) -> Result<LimitParameters> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::invalid(format!("theta must be positive, got {theta}")));
    }
    f.require_valid()?;
    let (m_f, v_a, v_b, e_ab, half_im_sq, quadrature_error) = match x.order() {
        Some(q) => {
            let mut acc = [0.0; 6];
            for m in 1..=q {
                let l = f.log_at_point(x, m);
                if l.infinite {
                    return Err(Error::InfiniteValue { m: m as usize });
                }
                let sq = l.to_complex() * l.to_complex();
                for (a, v) in acc.iter_mut().zip([l.re, l.im, l.re * l.re, l.im * l.im, l.re * l.im, 0.5 * sq.im]) {
                    *a += v;
                }
            }
            let qf = q as f64;
            (Complex64::new(acc[0] / qf, acc[1] / qf), acc[2] / qf, acc[3] / qf, acc[4] / qf, acc[5] / qf, 0.0)
        }
        None => {
            let panels = CirclePanels::new(f, config)?;
            let est = panels.integrate(config.abs_tolerance, |l| {
                let sq = l.to_complex() * l.to_complex();
                [l.re, l.im, l.re * l.re, l.im * l.im, l.re * l.im, 0.5 * sq.im]
            })?;
            let error = est.iter().map(|e| e.error).sum();
            (Complex64::new(est[0].value, est[1].value), est[2].value, est[3].value, est[4].value, est[5].value, error)
        }
    };
    Ok(LimitParameters {
        m_f,
        v_a,
        v_b,
        e_ab,
        theta,
        sigma: [[theta * v_a, theta * e_ab], [theta * e_ab, theta * v_b]],
        covariance_scalar: theta * half_im_sq,
        quadrature_error,
    })
}

/// `int_0^1 h(s) ds` with logarithmic singularities allowed at `zeros`.
pub fn log_singular_integral(
    h: impl Fn(PanelPoint) -> f64,
    zeros: &[f64],
    config: &QuadratureConfig,
) -> Result<Estimate> {
    config.validate()?;
    if zeros.windows(2).any(|w| w[1] < w[0]) || zeros.iter().any(|&z| !(0.0..1.0).contains(&z)) {
        return Err(Error::invalid("zeros must be sorted and lie in [0, 1)"));
    }
    let mut cuts = vec![0.0];
    cuts.extend(zeros.iter().copied().filter(|&z| z > 0.0));
    cuts.push(1.0);
    let mut breaks = Vec::new();
    for w in cuts.windows(2) {
        for i in 0..config.panels_per_gap {
            breaks.push(w[0] + (w[1] - w[0]) * i as f64 / config.panels_per_gap as f64);
        }
    }
    breaks.push(1.0);
    let [e] = integrate_panels(&breaks, config.abs_tolerance, &mut |p| [h(p)])?;
    Ok(e)
}

/// Total variation of `g` on `[lo, hi]` minus the excluded open intervals,
/// measured on a uniform grid of `grid` cells per included piece. Jumps
/// inside an included piece are counted with their full size.
pub fn total_variation(g: impl Fn(f64) -> f64, lo: f64, hi: f64, exclusions: &[(f64, f64)], grid: usize) -> f64 {
    let mut pieces = vec![(lo, hi)];
    for &(a, b) in exclusions {
        pieces = pieces
            .into_iter()
            .flat_map(|(l, r)| {
                let mut out = Vec::new();
                if a > l {
                    out.push((l, a.min(r)));
                }
                if b < r {
                    out.push((b.max(l), r));
                }
                out.into_iter().filter(|(l, r)| r > l)
            })
            .collect();
    }
    let grid = grid.max(1);
    pieces
        .iter()
        .map(|&(l, r)| {
            let mut prev = g(l);
            let mut tv = 0.0;
            for k in 1..=grid {
                let v = g(l + (r - l) * k as f64 / grid as f64);
                tv += (v - prev).abs();
                prev = v;
            }
            tv
        })
        .sum()
}
