//! Smooth test functions, Gaussian expectations and the solution of the
//! two-dimensional Stein equation
//! `<x, grad U(x)> - <Hess U(x), Sigma> = g(x) - E g(N)`, `N ~ N(0, Sigma)`.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{gauss_hermite_normal, gauss_legendre};

type Vec2 = [f64; 2];
type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Probe {
    /// `exp(-|u - c|^2 / 2)`.
    Bump { center: Vec2 },
    /// `tanh(u_a)`.
    TanhA,
    /// `tanh(u_b)`.
    TanhB,
    /// `log cosh(u_a)`.
    LogCoshA,
    /// `sin(u_a) cos(u_b)`.
    SinCos,
    /// `tanh((u_a - u_b) / 2)`.
    TanhDiff,
    Constant { value: f64 },
    /// `c_a u_a + c_b u_b`.
    Linear { coeffs: Vec2 },
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl Probe {
    pub fn name(&self) -> String {
        match self {
            Probe::Bump { center } => format!("bump({}, {})", center[0], center[1]),
            Probe::TanhA => "tanh(a)".into(),
            Probe::TanhB => "tanh(b)".into(),
            Probe::LogCoshA => "logcosh(a)".into(),
            Probe::SinCos => "sin(a)cos(b)".into(),
            Probe::TanhDiff => "tanh((a-b)/2)".into(),
            Probe::Constant { value } => format!("constant({value})"),
            Probe::Linear { coeffs } => format!("linear({}, {})", coeffs[0], coeffs[1]),
        }
    }

    pub fn value(&self, u: Vec2) -> f64 {
        match *self {
            Probe::Bump { center } => {
                let (d0, d1) = (u[0] - center[0], u[1] - center[1]);
                (-(d0 * d0 + d1 * d1) / 2.0).exp()
            }
            Probe::TanhA => u[0].tanh(),
            Probe::TanhB => u[1].tanh(),
            Probe::LogCoshA => log_cosh(u[0]),
            Probe::SinCos => u[0].sin() * u[1].cos(),
            Probe::TanhDiff => ((u[0] - u[1]) / 2.0).tanh(),
            Probe::Constant { value } => value,
            Probe::Linear { coeffs } => coeffs[0] * u[0] + coeffs[1] * u[1],
        }
    }

    /// Gradient and Hessian at `u`.
    pub fn derivatives(&self, u: Vec2) -> (Vec2, Mat2) {
        match *self {
            Probe::Bump { center } => {
                let d = [u[0] - center[0], u[1] - center[1]];
                let g = (-(d[0] * d[0] + d[1] * d[1]) / 2.0).exp();
                (
                    [-d[0] * g, -d[1] * g],
                    [[(d[0] * d[0] - 1.0) * g, d[0] * d[1] * g], [d[0] * d[1] * g, (d[1] * d[1] - 1.0) * g]],
                )
            }
            Probe::TanhA | Probe::TanhB => {
                let i = if matches!(self, Probe::TanhA) { 0 } else { 1 };
                let t = u[i].tanh();
                let mut grad = [0.0; 2];
                let mut hess = [[0.0; 2]; 2];
                grad[i] = 1.0 - t * t;
                hess[i][i] = -2.0 * t * (1.0 - t * t);
                (grad, hess)
            }
            Probe::LogCoshA => {
                let t = u[0].tanh();
                ([t, 0.0], [[1.0 - t * t, 0.0], [0.0, 0.0]])
            }
            Probe::SinCos => {
                let (sa, ca) = u[0].sin_cos();
                let (sb, cb) = u[1].sin_cos();
                ([ca * cb, -sa * sb], [[-sa * cb, -ca * sb], [-ca * sb, -sa * cb]])
            }
            Probe::TanhDiff => {
                let t = ((u[0] - u[1]) / 2.0).tanh();
                let d1 = (1.0 - t * t) / 2.0;
                let d2 = -t * (1.0 - t * t) / 2.0;
                ([d1, -d1], [[d2, -d2], [-d2, d2]])
            }
            Probe::Constant { .. } => ([0.0; 2], [[0.0; 2]; 2]),
            Probe::Linear { coeffs } => (coeffs, [[0.0; 2]; 2]),
        }
    }

    /// Certified bounds `(sup |grad g|, sup ||Hess g||_op)`.
    pub fn derivative_bounds(&self) -> (f64, f64) {
        let cubic = 4.0 / (3.0 * 3f64.sqrt());
        match *self {
            Probe::Bump { .. } => ((-0.5f64).exp(), 1.0),
            Probe::TanhA | Probe::TanhB => (1.0, cubic),
            Probe::LogCoshA => (1.0, 1.0),
            Probe::SinCos => (1.0, 1.0),
            Probe::TanhDiff => (std::f64::consts::FRAC_1_SQRT_2, cubic / 2.0),
            Probe::Constant { .. } => (0.0, 0.0),
            Probe::Linear { coeffs } => (coeffs[0].hypot(coeffs[1]), 0.0),
        }
    }
}

/// The fixed family used for weak-distance estimates.
pub fn certified_probes() -> Vec<Probe> {
    vec![
        Probe::Bump { center: [0.0, 0.0] },
        Probe::Bump { center: [1.0, 0.0] },
        Probe::Bump { center: [-0.5, 1.0] },
        Probe::TanhA,
        Probe::TanhB,
        Probe::LogCoshA,
        Probe::SinCos,
        Probe::TanhDiff,
    ]
}

/// Lower-triangular `L` with `L L^T = sigma`; `sigma` must be symmetric
/// positive semidefinite.
fn sqrt_factor(sigma: &Mat2) -> Result<Mat2> {
    let scale = sigma[0][0].abs() + sigma[1][1].abs() + sigma[0][1].abs();
    if sigma.iter().flatten().any(|v| !v.is_finite()) || (sigma[0][1] - sigma[1][0]).abs() > 1e-12 * scale.max(1e-300) {
        return Err(Error::invalid("covariance must be finite and symmetric"));
    }
    let det = sigma[0][0] * sigma[1][1] - sigma[0][1] * sigma[1][0];
    if sigma[0][0] < 0.0 || sigma[1][1] < 0.0 || det < -1e-12 * scale * scale {
        return Err(Error::invalid("covariance is not positive semidefinite"));
    }
    let l00 = sigma[0][0].sqrt();
    let (l10, l11) = if l00 > 0.0 {
        let l10 = sigma[1][0] / l00;
        (l10, (sigma[1][1] - l10 * l10).max(0.0).sqrt())
    } else {
        (0.0, sigma[1][1].sqrt())
    };
    Ok([[l00, 0.0], [l10, l11]])
}

/// Tensor Gauss-Hermite rule for the standard normal in the plane, with
/// negligible weights dropped.
#[derive(Debug, Clone)]
struct GaussRule {
    nodes: Vec<Vec2>,
    weights: Vec<f64>,
}

impl GaussRule {
    fn new(order: usize) -> Self {
        let (x, w) = gauss_hermite_normal(order);
        let wmax = w.iter().copied().fold(0.0, f64::max);
        let cutoff = 1e-18 * wmax * wmax;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for i in 0..order {
            for j in 0..order {
                let wij = w[i] * w[j];
                if wij >= cutoff {
                    nodes.push([x[i], x[j]]);
                    weights.push(wij);
                }
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self { nodes, weights }
    }

    /// Nodes `L z` of `N(0, L L^T)`.
    fn scaled(&self, factor: &Mat2) -> Vec<Vec2> {
        self.nodes
            .iter()
            .map(|z| [factor[0][0] * z[0], factor[1][0] * z[0] + factor[1][1] * z[1]])
            .collect()
    }
}

const HERMITE_ORDER: usize = 40;
const HERMITE_ORDER_REDUCED: usize = 30;
const ANGLE_ORDER: usize = 24;
const ANGLE_ORDER_REDUCED: usize = 16;

/// `E g(N)`, `N ~ N(0, sigma)`, by a 40-point tensor Gauss-Hermite rule.
pub fn gaussian_expectation(g: impl Fn(Vec2) -> f64, sigma: &Mat2) -> Result<f64> {
    let factor = sqrt_factor(sigma)?;
    let rule = GaussRule::new(HERMITE_ORDER);
    Ok(rule.scaled(&factor).iter().zip(&rule.weights).map(|(u, w)| w * g(*u)).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEntry {
    pub probe: String,
    pub sample_mean: f64,
    pub gaussian_mean: f64,
    pub difference: f64,
    pub mc_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub samples: usize,
    pub entries: Vec<ProbeEntry>,
    /// `max_g |E g(X) - E g(N)|` over the probes.
    pub max_difference: f64,
    pub worst_probe: String,
}

/// `max_g |mean g(X_i) - E g(N)|` over `probes`, a lower estimate of a
/// smooth-function distance between the sample law and `N(0, sigma)`.
pub fn weak_wasserstein_probe(samples: &[Vec2], sigma: &Mat2, probes: &[Probe]) -> Result<ProbeReport> {
    if samples.len() < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    if probes.is_empty() {
        return Err(Error::invalid("no probes"));
    }
    let factor = sqrt_factor(sigma)?;
    let rule = GaussRule::new(HERMITE_ORDER);
    let nodes = rule.scaled(&factor);
    let n = samples.len() as f64;
    let mut entries = Vec::with_capacity(probes.len());
    for p in probes {
        let gaussian_mean: f64 = nodes.iter().zip(&rule.weights).map(|(u, w)| w * p.value(*u)).sum();
        let values: Vec<f64> = samples.par_iter().map(|x| p.value(*x)).collect();
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        entries.push(ProbeEntry {
            probe: p.name(),
            sample_mean: mean,
            gaussian_mean,
            difference: mean - gaussian_mean,
            mc_error: (var / n).sqrt(),
        });
    }
    let worst = entries
        .iter()
        .max_by(|a, b| a.difference.abs().total_cmp(&b.difference.abs()))
        .expect("non-empty");
    Ok(ProbeReport {
        samples: samples.len(),
        max_difference: worst.difference.abs(),
        worst_probe: worst.probe.clone(),
        entries,
    })
}

/// Solution `U g` of the Stein equation for `N(0, sigma)`, through the
/// Ornstein-Uhlenbeck representation with `t = sin^2 phi`:
///
/// `grad U(x) = int_0^{pi/2} cos(phi) E grad g(sin(phi) x + cos(phi) N) dphi`,
/// `Hess U(x) = int_0^{pi/2} sin(phi) cos(phi) E Hess g(...) dphi`.
#[derive(Debug, Clone)]
pub struct SteinSolver {
    sigma: Mat2,
    nodes: Vec<Vec2>,
    weights: Vec<f64>,
    /// `(sin phi, cos phi, weight)`.
    angles: Vec<(f64, f64, f64)>,
}

impl SteinSolver {
    /// Requires `sigma` positive definite.
    pub fn new(sigma: Mat2) -> Result<Self> {
        Self::with_orders(sigma, HERMITE_ORDER, ANGLE_ORDER)
    }

    fn with_orders(sigma: Mat2, hermite: usize, angle: usize) -> Result<Self> {
        let factor = sqrt_factor(&sigma)?;
        let det = sigma[0][0] * sigma[1][1] - sigma[0][1] * sigma[1][0];
        let trace = sigma[0][0] + sigma[1][1];
        if !(det > 1e-12 * trace * trace) {
            return Err(Error::SingularCovariance { determinant: det });
        }
        let rule = GaussRule::new(hermite);
        let (x, w) = gauss_legendre(angle);
        let angles = x
            .iter()
            .zip(&w)
            .map(|(x, w)| {
                let phi = FRAC_PI_2 * (x + 1.0) / 2.0;
                let (s, c) = phi.sin_cos();
                (s, c, w * FRAC_PI_2 / 2.0)
            })
            .collect();
        Ok(Self { sigma, nodes: rule.scaled(&factor), weights: rule.weights, angles })
    }

    pub fn sigma(&self) -> Mat2 {
        self.sigma
    }

    pub fn gaussian_mean(&self, g: &Probe) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(u, w)| w * g.value(*u)).sum()
    }

    /// `U g(x)`; only needed for cross-checks, the identity uses the
    /// derivatives directly.
    pub fn value(&self, g: &Probe, x: Vec2) -> f64 {
        let eg = self.gaussian_mean(g);
        self.angles
            .iter()
            .map(|&(s, c, w)| {
                let pg: f64 = self
                    .nodes
                    .iter()
                    .zip(&self.weights)
                    .map(|(u, wu)| wu * g.value([s * x[0] + c * u[0], s * x[1] + c * u[1]]))
                    .sum();
                w * c / s * (pg - eg)
            })
            .sum()
    }

    /// `(grad U g(x), Hess U g(x))`.
    pub fn derivatives(&self, g: &Probe, x: Vec2) -> (Vec2, Mat2) {
        let mut grad = [0.0; 2];
        let mut hess = [[0.0; 2]; 2];
        for &(s, c, w) in &self.angles {
            let mut eg = [0.0; 2];
            let mut eh = [[0.0; 2]; 2];
            for (u, wu) in self.nodes.iter().zip(&self.weights) {
                let (dg, hg) = g.derivatives([s * x[0] + c * u[0], s * x[1] + c * u[1]]);
                for i in 0..2 {
                    eg[i] += wu * dg[i];
                    for j in 0..2 {
                        eh[i][j] += wu * hg[i][j];
                    }
                }
            }
            for i in 0..2 {
                grad[i] += w * c * eg[i];
                for j in 0..2 {
                    hess[i][j] += w * s * c * eh[i][j];
                }
            }
        }
        (grad, hess)
    }

    /// `<x, grad U(x)> - <Hess U(x), sigma>`.
    pub fn stein_operator(&self, g: &Probe, x: Vec2) -> f64 {
        let (grad, hess) = self.derivatives(g, x);
        let mut trace = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                trace += hess[i][j] * self.sigma[i][j];
            }
        }
        x[0] * grad[0] + x[1] * grad[1] - trace
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinResidual {
    pub probe: String,
    pub samples: usize,
    /// `mean g(X_i) - E g(N)`.
    pub lhs: f64,
    /// `mean <X_i, grad U(X_i)> - <Hess U(X_i), sigma>`.
    pub rhs: f64,
    pub difference: f64,
    /// Standard error of the mean of the per-sample residuals.
    pub mc_error: f64,
    /// Change of the residual under a coarser rule.
    pub quadrature_error: f64,
    pub combined_error: f64,
    /// `|lhs - rhs| <= 3 combined_error`.
    pub agrees: bool,
}

/// Number of samples on which the coarse rule is rerun.
const QUADRATURE_CHECK_SAMPLES: usize = 200;

/// Both sides of the Stein identity, averaged over `samples`.
pub fn stein_identity_residual(probe: &Probe, sigma: &Mat2, samples: &[Vec2]) -> Result<SteinResidual> {
    if samples.len() < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let fine = SteinSolver::new(*sigma)?;
    let coarse = SteinSolver::with_orders(*sigma, HERMITE_ORDER_REDUCED, ANGLE_ORDER_REDUCED)?;
    let eg = fine.gaussian_mean(probe);
    let eg_coarse = coarse.gaussian_mean(probe);

    let terms: Vec<(f64, f64)> = samples.par_iter().map(|x| (probe.value(*x) - eg, fine.stein_operator(probe, *x))).collect();
    let n = samples.len() as f64;
    let lhs = terms.iter().map(|t| t.0).sum::<f64>() / n;
    let rhs = terms.iter().map(|t| t.1).sum::<f64>() / n;
    let difference = lhs - rhs;
    let residuals: Vec<f64> = terms.iter().map(|t| t.0 - t.1).collect();
    let var = residuals.iter().map(|r| (r - difference).powi(2)).sum::<f64>() / (n - 1.0);
    let mc_error = (var / n).sqrt();

    let check = &samples[..samples.len().min(QUADRATURE_CHECK_SAMPLES)];
    let drift = check
        .par_iter()
        .map(|x| (fine.stein_operator(probe, *x) - coarse.stein_operator(probe, *x)).abs())
        .sum::<f64>()
        / check.len() as f64;
    let quadrature_error = drift + (eg - eg_coarse).abs();
    let magnitude = terms.iter().map(|t| t.0.abs() + t.1.abs()).sum::<f64>() / n + eg.abs();
    let roundoff = 64.0 * f64::EPSILON * magnitude;
    let combined_error = mc_error + quadrature_error + roundoff;
    Ok(SteinResidual {
        probe: probe.name(),
        samples: samples.len(),
        lhs,
        rhs,
        difference,
        mc_error,
        quadrature_error,
        combined_error,
        agrees: difference.abs() <= 3.0 * combined_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand_distr::{Distribution, StandardNormal};

    const SIGMA: Mat2 = [[0.8, 0.3], [0.3, 0.5]];

    fn gaussian_samples(n: usize, shift: Vec2, sigma: &Mat2, seed: u64) -> Vec<Vec2> {
        let l = sqrt_factor(sigma).unwrap();
        let mut rng = RngStream::new(seed, 0).rng();
        (0..n)
            .map(|_| {
                let z0: f64 = StandardNormal.sample(&mut rng);
                let z1: f64 = StandardNormal.sample(&mut rng);
                [shift[0] + l[0][0] * z0, shift[1] + l[1][0] * z0 + l[1][1] * z1]
            })
            .collect()
    }

    #[test]
    fn derivatives_match_differences() {
        let h = 1e-5;
        for p in certified_probes().into_iter().chain([Probe::Linear { coeffs: [0.3, -2.0] }]) {
            for u in [[0.3, -0.7], [1.2, 0.4], [-2.0, 1.5]] {
                let (g, hess) = p.derivatives(u);
                for i in 0..2 {
                    let mut up = u;
                    let mut dn = u;
                    up[i] += h;
                    dn[i] -= h;
                    assert!(((p.value(up) - p.value(dn)) / (2.0 * h) - g[i]).abs() < 1e-8, "{}", p.name());
                    let (gu, _) = p.derivatives(up);
                    let (gd, _) = p.derivatives(dn);
                    for j in 0..2 {
                        assert!(((gu[j] - gd[j]) / (2.0 * h) - hess[j][i]).abs() < 1e-8, "{}", p.name());
                    }
                }
            }
        }
    }

    #[test]
    fn bounds_hold_on_a_grid() {
        for p in certified_probes() {
            let (m1, m2) = p.derivative_bounds();
            for i in -40..=40 {
                for j in -40..=40 {
                    let u = [i as f64 * 0.1, j as f64 * 0.1];
                    let (g, h) = p.derivatives(u);
                    assert!(g[0].hypot(g[1]) <= m1 + 1e-12);
                    // op norm of a symmetric 2x2
                    let mean = (h[0][0] + h[1][1]) / 2.0;
                    let rad = ((h[0][0] - h[1][1]) / 2.0).hypot(h[0][1]);
                    assert!(mean.abs() + rad <= m2 + 1e-12, "{}", p.name());
                }
            }
        }
    }

    #[test]
    fn gaussian_expectations() {
        let s = [[2.0, 0.5], [0.5, 1.0]];
        assert!((gaussian_expectation(|u| u[0] * u[0], &s).unwrap() - 2.0).abs() < 1e-12);
        assert!((gaussian_expectation(|u| u[0] * u[1], &s).unwrap() - 0.5).abs() < 1e-12);
        // E exp(-|N|^2/2) for N ~ N(0, I) is 1/2
        let e = gaussian_expectation(|u| Probe::Bump { center: [0.0, 0.0] }.value(u), &[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!((e - 0.5).abs() < 1e-13);
        // E log cosh(Z) for a point mass
        let d = gaussian_expectation(|u| log_cosh(u[0] + 0.7), &[[0.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!((d - 0.7f64.cosh().ln()).abs() < 1e-15);
        assert!(gaussian_expectation(|_| 0.0, &[[1.0, 2.0], [2.0, 1.0]]).is_err());
    }

    #[test]
    fn pruned_rule_size() {
        let r = GaussRule::new(HERMITE_ORDER);
        assert!(r.nodes.len() < 1600 && r.nodes.len() > 400, "{}", r.nodes.len());
    }

    #[test]
    fn linear_probe_is_exact() {
        let p = Probe::Linear { coeffs: [1.5, -0.5] };
        let xs = gaussian_samples(2000, [0.4, -0.2], &SIGMA, 1);
        let r = stein_identity_residual(&p, &SIGMA, &xs).unwrap();
        assert!(r.difference.abs() < 1e-12 && r.agrees, "{r:?}");
        assert!((r.lhs - (1.5 * 0.4 + 0.5 * 0.2)).abs() < 0.1);
        let solver = SteinSolver::new(SIGMA).unwrap();
        let (_, h) = solver.derivatives(&p, [0.2, 0.3]);
        assert!(h.iter().flatten().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn analytic_derivatives_match_differences_of_u() {
        let solver = SteinSolver::new(SIGMA).unwrap();
        let h = 1e-4;
        for p in certified_probes() {
            let x = [0.6, -0.4];
            let (grad, hess) = solver.derivatives(&p, x);
            for i in 0..2 {
                let mut up = x;
                let mut dn = x;
                up[i] += h;
                dn[i] -= h;
                let fd = (solver.value(&p, up) - solver.value(&p, dn)) / (2.0 * h);
                assert!((fd - grad[i]).abs() < 1e-6, "{} grad {fd} {}", p.name(), grad[i]);
                let (gu, _) = solver.derivatives(&p, up);
                let (gd, _) = solver.derivatives(&p, dn);
                for j in 0..2 {
                    assert!(((gu[j] - gd[j]) / (2.0 * h) - hess[j][i]).abs() < 1e-6, "{} hess", p.name());
                }
            }
        }
    }

    #[test]
    fn identity_holds_for_non_gaussian_samples() {
        let mut xs = gaussian_samples(500, [0.0, 0.0], &SIGMA, 2);
        for x in xs.iter_mut() {
            x[0] = x[0].abs() - 0.3;
        }
        for p in certified_probes() {
            let r = stein_identity_residual(&p, &SIGMA, &xs).unwrap();
            assert!(r.agrees, "{r:?}");
            assert!(r.difference.abs() < 1e-8);
        }
    }

    #[test]
    fn singular_covariance_is_refused() {
        let s = [[1.0, 1.0], [1.0, 1.0]];
        let xs = vec![[0.0, 0.0], [1.0, 1.0]];
        assert!(matches!(stein_identity_residual(&Probe::TanhA, &s, &xs), Err(Error::SingularCovariance { .. })));
    }

    #[test]
    fn probe_distance() {
        let s = [[0.25, 0.0], [0.0, 0.25]];
        let same = gaussian_samples(20_000, [0.0, 0.0], &s, 3);
        let r = weak_wasserstein_probe(&same, &s, &certified_probes()).unwrap();
        assert!(r.max_difference < 0.02, "{r:?}");
        let shifted = gaussian_samples(20_000, [1.0, 0.0], &s, 4);
        let r = weak_wasserstein_probe(&shifted, &s, &certified_probes()).unwrap();
        assert!(r.max_difference >= 0.3, "{r:?}");
        let c = weak_wasserstein_probe(&same, &s, &[Probe::Constant { value: 2.0 }]).unwrap();
        assert!(c.max_difference < 1e-12);
    }
}
