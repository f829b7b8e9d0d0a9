//! Monte Carlo experiments for the normalized statistic
//! `w^n(f) / sqrt(log n) - theta sqrt(log n) m(f)` and the checks built on
//! them.

mod charfn;
mod km;
mod stein;
mod wasserstein;

pub use charfn::{char_fn_from_table, exact_char_fn, CharFnGrid};
pub use km::{km_moments, poisson_central_abs_moment, sigma_singularity_test, KmMoments, SingularityReport};
pub use stein::{
    certified_probes, gaussian_expectation, weak_wasserstein_probe, Probe, ProbeReport, SteinResidual, SteinSolver,
    stein_identity_residual,
};
pub use wasserstein::{
    rate_trend, stein_bound_check, wasserstein_1d, wasserstein_empirical, wasserstein_experiment, TrendFit,
    WassersteinReport,
};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::{CircleFunction, LogTable};
use crate::error::{Error, Result};
use crate::ewens::{for_each_cycle_length, EwensParams};
use crate::mahler::{covariance_parameters, LimitParameters, QuadratureConfig};
use crate::point::EvaluationPoint;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Cycle counts of an Ewens permutation via the Feller coupling.
    #[default]
    Feller,
    /// Independent `Y_m ~ Poisson(theta / m)`, `m <= n`.
    PoissonSurrogate,
}

pub const MIN_SAMPLES_PER_N: usize = 100;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub f: CircleFunction,
    pub x: EvaluationPoint,
    pub theta: f64,
    pub n_grid: Vec<usize>,
    pub samples_per_n: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    /// Subtract `theta sqrt(log n) m(f)`; switched off only for negative
    /// controls.
    #[serde(default = "yes")]
    pub centered: bool,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn new(f: CircleFunction, x: EvaluationPoint, theta: f64, n_grid: Vec<usize>, samples_per_n: usize, seed: u64) -> Self {
        Self {
            f,
            x,
            theta,
            n_grid,
            samples_per_n,
            seed,
            mode: Mode::Feller,
            centered: true,
            quadrature: QuadratureConfig::default(),
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn uncentered(mut self) -> Self {
        self.centered = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        EwensParams::new(self.theta)?;
        if self.samples_per_n < MIN_SAMPLES_PER_N {
            return Err(Error::invalid(format!("samples_per_n must be at least {MIN_SAMPLES_PER_N}")));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("n_grid must be non-empty and strictly increasing"));
        }
        if self.n_grid[0] < 2 {
            return Err(Error::invalid("n must be at least 2 so that log n > 0"));
        }
        if matches!(self.x, EvaluationPoint::Decimal { .. }) {
            return Err(Error::invalid(
                "a decimal t has unknown Diophantine type; use a rational, a named irrational or a continued fraction",
            ));
        }
        self.quadrature.validate()?;
        self.f.require_valid()?;
        Ok(())
    }

    pub fn limit_parameters(&self) -> Result<LimitParameters> {
        covariance_parameters(&self.f, self.theta, &self.x, &self.quadrature)
    }
}

/// One draw of the normalized statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticSample {
    pub re: f64,
    pub im: f64,
}

impl StatisticSample {
    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// A draw, or the first `m` at which it hit `log 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Draw {
    Sample(StatisticSample),
    Rejected { m: usize },
}

/// Everything needed to draw the statistic at one `n`.
#[derive(Debug, Clone)]
pub struct StatisticSampler {
    n: usize,
    params: EwensParams,
    mode: Mode,
    table: LogTable,
    scale: f64,
    centering: Complex64,
    harmonic: Option<Vec<f64>>,
}

impl StatisticSampler {
    pub fn new(config: &ExperimentConfig, limit: &LimitParameters, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n must be at least 2"));
        }
        let params = EwensParams::new(config.theta)?;
        let table = LogTable::new(&config.f, &config.x, n);
        let scale = (n as f64).ln().sqrt();
        let centering = if config.centered { limit.m_f * (config.theta * scale) } else { Complex64::new(0.0, 0.0) };
        let harmonic = (config.mode == Mode::PoissonSurrogate).then(|| harmonic_table(n));
        Ok(Self { n, params, mode: config.mode, table, scale, centering, harmonic })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn table(&self) -> &LogTable {
        &self.table
    }

    /// `w^n(f)` (or its surrogate) before normalisation.
    pub fn raw(&self, stream: &RngStream) -> std::result::Result<Complex64, usize> {
        let mut rng = stream.rng();
        let mut sum = Complex64::new(0.0, 0.0);
        let mut hit = None;
        let mut add = |m: usize| {
            let v = self.table.get(m);
            if v.infinite {
                hit.get_or_insert(m);
            } else {
                sum += v.to_complex();
            }
        };
        match &self.harmonic {
            None => for_each_cycle_length(self.n, &self.params, &mut rng, &mut add),
            Some(h) => for_each_poisson_index(h, self.params.theta(), &mut rng, &mut add),
        }
        match hit {
            Some(m) => Err(m),
            None => Ok(sum),
        }
    }

    pub fn draw(&self, stream: &RngStream) -> Draw {
        match self.raw(stream) {
            Ok(w) => {
                let z = w / self.scale - self.centering;
                Draw::Sample(StatisticSample { re: z.re, im: z.im })
            }
            Err(m) => Draw::Rejected { m },
        }
    }

    /// Exact mean of the statistic in surrogate mode:
    /// `theta sum_m c_m / m / sqrt(log n) - centering`.
    pub fn surrogate_mean(&self) -> Result<Complex64> {
        let mut s = Complex64::new(0.0, 0.0);
        for m in 1..=self.n {
            let v = self.table.get(m);
            if v.infinite {
                return Err(Error::InfiniteValue { m });
            }
            s += v.to_complex() / m as f64;
        }
        Ok(s * self.params.theta() / self.scale - self.centering)
    }
}

/// `H_1, ..., H_n`.
pub fn harmonic_table(n: usize) -> Vec<f64> {
    let mut h = Vec::with_capacity(n);
    let mut acc = 0.0;
    for m in 1..=n {
        acc += 1.0 / m as f64;
        h.push(acc);
    }
    h
}

/// Emits the indices of a draw of independent `Y_m ~ Poisson(theta / m)`,
/// `m <= n`, each `m` repeated `Y_m` times. A Poisson process with total
/// mass `theta H_n` is split by marks with `P(m) = 1 / (m H_n)`, which
/// gives exactly independent Poisson counts.
pub fn for_each_poisson_index<R: Rng + ?Sized>(harmonic: &[f64], theta: f64, rng: &mut R, mut emit: impl FnMut(usize)) {
    let total = *harmonic.last().expect("n >= 1");
    let count = Poisson::new(theta * total).expect("positive mean").sample(rng) as u64;
    for _ in 0..count {
        let u = rng.random::<f64>() * total;
        let m = harmonic.partition_point(|&h| h <= u) + 1;
        emit(m.min(harmonic.len()));
    }
}

/// Counts `(Y_1, ..., Y_n)` of the Poisson surrogate.
pub fn sample_poisson_surrogate(n: usize, params: &EwensParams, stream: &RngStream) -> Vec<u32> {
    let h = harmonic_table(n);
    let mut y = vec![0u32; n];
    for_each_poisson_index(&h, params.theta(), &mut stream.rng(), |m| y[m - 1] += 1);
    y
}

/// One draw of the normalized statistic (builds the log table; use
/// [`StatisticSampler`] for repeated draws).
pub fn normalized_statistic(config: &ExperimentConfig, n: usize, stream: &RngStream) -> Result<Draw> {
    config.validate()?;
    let limit = config.limit_parameters()?;
    Ok(StatisticSampler::new(config, &limit, n)?.draw(stream))
}

/// The stream of draw `index` at size `n`.
pub fn draw_stream(seed: u64, n: usize, index: u64) -> RngStream {
    RngStream::new(seed, n as u64).substream(index)
}

/// All draws at size `n`, in index order.
pub fn sample_draws(config: &ExperimentConfig, limit: &LimitParameters, n: usize) -> Result<Vec<Draw>> {
    let sampler = StatisticSampler::new(config, limit, n)?;
    Ok((0..config.samples_per_n as u64)
        .into_par_iter()
        .map(|i| sampler.draw(&draw_stream(config.seed, n, i)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub n: usize,
    #[serde(with = "crate::mahler::complex_pair")]
    pub mean: Complex64,
    /// Standard errors of the mean, real and imaginary part.
    pub mean_std_error: [f64; 2],
    pub cov: [[f64; 2]; 2],
    /// Standard errors of `cov_aa`, `cov_ab`, `cov_bb`.
    pub cov_std_error: [f64; 3],
    pub target_sigma: [[f64; 2]; 2],
    pub samples: usize,
    pub rejected: usize,
    /// Smallest `m` that caused a rejection, per rejected draw (first 16).
    pub rejected_at: Vec<usize>,
}

pub fn moment_report(n: usize, draws: &[Draw], target_sigma: [[f64; 2]; 2]) -> MomentReport {
    let samples: Vec<StatisticSample> = draws
        .iter()
        .filter_map(|d| match d {
            Draw::Sample(s) => Some(*s),
            Draw::Rejected { .. } => None,
        })
        .collect();
    let rejected_at: Vec<usize> = draws
        .iter()
        .filter_map(|d| match d {
            Draw::Rejected { m } => Some(*m),
            Draw::Sample(_) => None,
        })
        .collect();
    let m = moments(&samples);
    MomentReport {
        n,
        mean: Complex64::new(m.mean[0], m.mean[1]),
        mean_std_error: m.mean_se,
        cov: m.cov,
        cov_std_error: m.cov_se,
        target_sigma,
        samples: samples.len(),
        rejected: rejected_at.len(),
        rejected_at: rejected_at.into_iter().take(16).collect(),
    }
}

pub(crate) struct Moments {
    pub mean: [f64; 2],
    pub mean_se: [f64; 2],
    pub cov: [[f64; 2]; 2],
    pub cov_se: [f64; 3],
}

/// Two-pass sample moments in input order.
pub(crate) fn moments(samples: &[StatisticSample]) -> Moments {
    let n = samples.len() as f64;
    if samples.len() < 2 {
        let nan = f64::NAN;
        return Moments { mean: [nan; 2], mean_se: [nan; 2], cov: [[nan; 2]; 2], cov_se: [nan; 3] };
    }
    let mr = samples.iter().map(|s| s.re).sum::<f64>() / n;
    let mi = samples.iter().map(|s| s.im).sum::<f64>() / n;
    let prods: Vec<[f64; 3]> = samples
        .iter()
        .map(|s| {
            let (a, b) = (s.re - mr, s.im - mi);
            [a * a, a * b, b * b]
        })
        .collect();
    let mut cov3 = [0.0; 3];
    for p in &prods {
        for k in 0..3 {
            cov3[k] += p[k];
        }
    }
    for c in &mut cov3 {
        *c /= n - 1.0;
    }
    let mut se = [0.0; 3];
    for p in &prods {
        for k in 0..3 {
            let mean_k = cov3[k] * (n - 1.0) / n;
            se[k] += (p[k] - mean_k).powi(2);
        }
    }
    for s in &mut se {
        *s = (*s / (n - 1.0) / n).sqrt();
    }
    Moments {
        mean: [mr, mi],
        mean_se: [(cov3[0] / n).sqrt(), (cov3[2] / n).sqrt()],
        cov: [[cov3[0], cov3[1]], [cov3[1], cov3[2]]],
        cov_se: se,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub limit: LimitParameters,
    pub moments: Vec<MomentReport>,
}

/// Moments of the statistic at every `n` of the grid.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let limit = config.limit_parameters()?;
    let mut moments = Vec::with_capacity(config.n_grid.len());
    for &n in &config.n_grid {
        let draws = sample_draws(config, &limit, n)?;
        moments.push(moment_report(n, &draws, limit.sigma));
    }
    Ok(ExperimentReport { limit, moments })
}

/// Samples that were not rejected.
pub fn accepted(draws: &[Draw]) -> Vec<StatisticSample> {
    draws
        .iter()
        .filter_map(|d| match d {
            Draw::Sample(s) => Some(*s),
            Draw::Rejected { .. } => None,
        })
        .collect()
}
