use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ewens_clt::equidist::{
    discrepancy_decay_fit, finite_type_scan, frac_parts, star_discrepancy, DecayFit, DiscrepancyReport, FiniteTypeReport,
};
use ewens_clt::ewens::{chi_square_gof, enumerate_cycle_types, expected_cycle_count, sample_cycle_counts, ChiSquareTest};
use ewens_clt::lab::{
    accepted, char_fn_from_table, moment_report, rate_trend, sample_draws, sigma_singularity_test, wasserstein_1d,
    wasserstein_experiment, CharFnGrid, ExperimentConfig, MomentReport, SingularityReport, TrendFit, WassersteinReport,
};
use ewens_clt::mahler::covariance_parameters;
use ewens_clt::{CircleFunction, EvaluationPoint, EwensParams, LimitParameters, LogTable, QuadratureConfig, RngStream};

use crate::manifest::{cell, now, OutputDir, RunManifest};
use crate::{CliError, ConfigArgs, DiscrepancyArgs, LimitArgs, SampleArgs};

/// Largest `n` for which `sample` also tabulates cycle types.
const PMF_TABLE_MAX_N: usize = 12;

/// `(t_a, t_b)` grid of the characteristic-function comparison.
const CHAR_FN_GRID: [[f64; 2]; 9] =
    [[-1.0, -1.0], [-1.0, 0.0], [-1.0, 1.0], [0.0, -1.0], [0.0, 0.0], [0.0, 1.0], [1.0, -1.0], [1.0, 0.0], [1.0, 1.0]];

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn parse_point(spec: &str) -> Result<EvaluationPoint, CliError> {
    spec.parse::<EvaluationPoint>().map_err(CliError::from)
}

fn require_exact_point(x: &EvaluationPoint) -> Result<(), CliError> {
    if matches!(x, EvaluationPoint::Decimal { .. }) {
        return Err(CliError::Usage(
            "a decimal point has unknown Diophantine type; use a rational, a named irrational or cf:...".into(),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct SampleConfig {
    command: &'static str,
    n: u64,
    theta: f64,
    samples: u64,
    seed: u64,
}

#[derive(Serialize)]
struct PmfRow {
    counts: Vec<u32>,
    observed: u64,
    frequency: f64,
    pmf: f64,
}

#[derive(Serialize)]
struct SamplePayload {
    n: usize,
    theta: f64,
    samples: u64,
    seed: u64,
    mean_total_cycles: f64,
    expected_total_cycles: f64,
    pmf_table: Option<Vec<PmfRow>>,
    chi_square: Option<ChiSquareTest>,
}

struct Tally {
    sum: Vec<u64>,
    sum_sq: Vec<u64>,
    cycles: u64,
    types: HashMap<Vec<u32>, u64>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self { sum: vec![0; n], sum_sq: vec![0; n], cycles: 0, types: HashMap::new() }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self.cycles += other.cycles;
        for (k, v) in other.types {
            *self.types.entry(k).or_insert(0) += v;
        }
        self
    }
}

pub fn sample(args: &SampleArgs, out: &Path) -> Result<(), CliError> {
    let started = now();
    let n = args.n as usize;
    let params = EwensParams::new(args.theta)?;
    let stream = RngStream::new(args.seed, args.n);
    let tabulate = n <= PMF_TABLE_MAX_N;
    // integer sums, so the result does not depend on how rayon splits the work
    let tally = (0..args.samples)
        .into_par_iter()
        .try_fold(
            || Tally::new(n),
            |mut t, i| {
                let c = sample_cycle_counts(n, &params, &stream.substream(i))?;
                for (m, k) in c.nonzero() {
                    t.sum[m - 1] += k as u64;
                    t.sum_sq[m - 1] += (k as u64) * (k as u64);
                }
                t.cycles += c.total_cycles();
                if tabulate {
                    *t.types.entry(c.as_slice().to_vec()).or_insert(0) += 1;
                }
                Ok::<_, ewens_clt::Error>(t)
            },
        )
        .try_reduce(|| Tally::new(n), |a, b| Ok(a.merge(b)))?;

    let s = args.samples as f64;
    let mut rows = Vec::with_capacity(n);
    for m in 1..=n {
        let mean = tally.sum[m - 1] as f64 / s;
        let var = if args.samples > 1 { (tally.sum_sq[m - 1] as f64 - s * mean * mean) / (s - 1.0) } else { f64::NAN };
        rows.push(vec![
            m.to_string(),
            cell(mean),
            cell((var.max(0.0) / s).sqrt()),
            cell(expected_cycle_count(m, n, &params)),
        ]);
    }
    let (pmf_table, chi_square) = if tabulate {
        let types = enumerate_cycle_types(n, &params)?;
        let observed: Vec<u64> = types.iter().map(|t| *tally.types.get(t.counts.as_slice()).unwrap_or(&0)).collect();
        let probs: Vec<f64> = types.iter().map(|t| t.pmf).collect();
        let chi = chi_square_gof(&observed, &probs)?;
        let table = types
            .iter()
            .zip(&observed)
            .map(|(t, &o)| PmfRow { counts: t.counts.as_slice().to_vec(), observed: o, frequency: o as f64 / s, pmf: t.pmf })
            .collect();
        (Some(table), Some(chi))
    } else {
        (None, None)
    };
    let theta = args.theta;
    let payload = SamplePayload {
        n,
        theta,
        samples: args.samples,
        seed: args.seed,
        mean_total_cycles: tally.cycles as f64 / s,
        expected_total_cycles: (0..n).map(|i| theta / (theta + i as f64)).sum(),
        pmf_table,
        chi_square,
    };

    let config = SampleConfig { command: "sample", n: args.n, theta, samples: args.samples, seed: args.seed };
    let manifest = RunManifest::new("sample", &config, Some(args.seed), started);
    let dir = OutputDir::create(out)?;
    let csv = dir.write_csv("sample.csv", &manifest, &["m", "mean", "std_error", "expected"], &rows)?;
    let json = dir.write_json("sample.json", &manifest, &payload)?;
    if let Some(chi) = &payload.chi_square {
        println!("chi-square p = {:.4} over {} bins", chi.p_value, chi.bins);
    }
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

#[derive(Serialize)]
struct LimitConfig<'a> {
    command: &'static str,
    function: &'a CircleFunction,
    x: String,
    theta: f64,
}

#[derive(Serialize)]
struct LimitPayload {
    function: String,
    x: String,
    limit: LimitParameters,
    singularity: SingularityReport,
}

pub fn limit(args: &LimitArgs, out: &Path) -> Result<(), CliError> {
    let started = now();
    let f: CircleFunction = parse_json(&args.function)?;
    let x = parse_point(&args.x)?;
    require_exact_point(&x)?;
    let cfg = QuadratureConfig::default();
    let lp = covariance_parameters(&f, args.theta, &x, &cfg)?;
    let singularity = sigma_singularity_test(&f, &x, &cfg)?;
    let payload = LimitPayload { function: f.label().to_string(), x: x.to_string(), limit: lp, singularity };
    let config = LimitConfig { command: "limit", function: &f, x: x.to_string(), theta: args.theta };
    let manifest = RunManifest::new("limit", &config, None, started);
    let dir = OutputDir::create(out)?;
    let path = dir.write_json("limit.json", &manifest, &payload)?;
    let l = &payload.limit;
    println!(
        "m(f) = {:.10} {:+.10}i, V_a = {:.10}, V_b = {:.10}, E_ab = {:.3e}, singular = {}",
        l.m_f.re, l.m_f.im, l.v_a, l.v_b, l.e_ab, payload.singularity.singular
    );
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct Tagged<'a> {
    command: &'static str,
    config: &'a ExperimentConfig,
}

fn load_experiment(args: &ConfigArgs) -> Result<ExperimentConfig, CliError> {
    let config: ExperimentConfig = parse_json(&args.config)?;
    config.validate()?;
    Ok(config)
}

#[derive(Serialize)]
struct CltEntry {
    moments: MomentReport,
    d_w_re: Option<f64>,
    d_w_im: Option<f64>,
    char_fn: CharFnGrid,
}

#[derive(Serialize)]
struct CltPayload {
    limit: LimitParameters,
    reports: Vec<CltEntry>,
}

const FLAT_HEADER: [&str; 12] =
    ["n", "mean_re", "mean_im", "cov_aa", "cov_ab", "cov_bb", "target_aa", "target_ab", "target_bb", "d_w_re", "d_w_im", "rejected"];

fn opt(x: Option<f64>) -> String {
    x.map(cell).unwrap_or_default()
}

pub fn clt(args: &ConfigArgs, out: &Path) -> Result<(), CliError> {
    let started = now();
    let config = load_experiment(args)?;
    let limit = config.limit_parameters()?;
    let mut reports = Vec::with_capacity(config.n_grid.len());
    for &n in &config.n_grid {
        let draws = sample_draws(&config, &limit, n)?;
        let moments = moment_report(n, &draws, limit.sigma);
        let samples = accepted(&draws);
        let d_w = |values: Vec<f64>, var: f64| {
            (values.len() >= 2 && var > 0.0).then(|| wasserstein_1d(&values, 0.0, var.sqrt())).transpose()
        };
        let d_w_re = d_w(samples.iter().map(|s| s.re).collect(), limit.sigma[0][0])?;
        let d_w_im = d_w(samples.iter().map(|s| s.im).collect(), limit.sigma[1][1])?;
        let char_fn = char_fn_from_table(&LogTable::new(&config.f, &config.x, n), &limit, &CHAR_FN_GRID)?;
        reports.push(CltEntry { moments, d_w_re, d_w_im, char_fn });
    }
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let m = &r.moments;
            let t = &m.target_sigma;
            vec![
                m.n.to_string(),
                cell(m.mean.re),
                cell(m.mean.im),
                cell(m.cov[0][0]),
                cell(m.cov[0][1]),
                cell(m.cov[1][1]),
                cell(t[0][0]),
                cell(t[0][1]),
                cell(t[1][1]),
                opt(r.d_w_re),
                opt(r.d_w_im),
                m.rejected.to_string(),
            ]
        })
        .collect();
    let manifest = RunManifest::new("clt", &Tagged { command: "clt", config: &config }, Some(config.seed), started);
    let dir = OutputDir::create(out)?;
    let csv = dir.write_csv("clt.csv", &manifest, &FLAT_HEADER, &rows)?;
    for r in &reports {
        let m = &r.moments;
        println!(
            "n = {}: cov = [[{:.4}, {:.4}], [{:.4}, {:.4}]], max char-fn gap {:.4}, rejected {}",
            m.n,
            m.cov[0][0],
            m.cov[0][1],
            m.cov[1][0],
            m.cov[1][1],
            r.char_fn.gaps.iter().copied().fold(0.0, f64::max),
            m.rejected
        );
    }
    let json = dir.write_json("clt.json", &manifest, &CltPayload { limit, reports })?;
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

#[derive(Serialize)]
struct WassersteinPayload {
    limit: LimitParameters,
    reports: Vec<WassersteinReport>,
    trend: Option<TrendFit>,
}

pub fn wasserstein(args: &ConfigArgs, out: &Path) -> Result<(), CliError> {
    let started = now();
    let config = load_experiment(args)?;
    let limit = config.limit_parameters()?;
    let reports = wasserstein_experiment(&config)?;
    let trend = if reports.len() >= 3 { Some(rate_trend(&reports)?) } else { None };
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.samples.to_string(),
                cell(r.d_w_re),
                opt(r.d_w_im),
                cell(r.variance),
                cell(r.stein_bound),
                cell(r.standardized_bound),
                cell(r.trend_coefficient),
            ]
        })
        .collect();
    let manifest =
        RunManifest::new("wasserstein", &Tagged { command: "wasserstein", config: &config }, Some(config.seed), started);
    let dir = OutputDir::create(out)?;
    let header = ["n", "samples", "d_w_re", "d_w_im", "variance", "stein_bound", "standardized_bound", "trend_coefficient"];
    let csv = dir.write_csv("wasserstein.csv", &manifest, &header, &rows)?;
    for r in &reports {
        println!("n = {}: d_W(re) = {:.4}, d_W sqrt(log n) = {:.4}", r.n, r.d_w_re, r.trend_coefficient);
    }
    if let Some(t) = &trend {
        println!("trend: max/min {:.3}, slope {:.3}, passes = {}", t.ratio, t.slope, t.passes);
    }
    let json = dir.write_json("wasserstein.json", &manifest, &WassersteinPayload { limit, reports, trend })?;
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

#[derive(Serialize)]
struct DiscrepancyConfig {
    command: &'static str,
    t: String,
    n: u64,
    gamma: Option<f64>,
    k: Option<f64>,
}

#[derive(Serialize)]
struct DiscrepancyPayload {
    t: String,
    type_estimate: Option<f64>,
    precision_bound: f64,
    report: DiscrepancyReport,
    decay_fit: Option<DecayFit>,
    finite_type: Option<FiniteTypeReport>,
    warnings: Vec<String>,
}

/// `100, 1000, ...` below `n`, then `n`.
fn decade_grid(n: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = std::iter::successors(Some(100usize), |g| g.checked_mul(10)).take_while(|&g| g < n).collect();
    grid.push(n);
    grid
}

pub fn discrepancy(args: &DiscrepancyArgs, out: &Path) -> Result<(), CliError> {
    let started = now();
    let t = parse_point(&args.t)?;
    let n = args.n as usize;
    let mut warnings = Vec::new();
    if matches!(t, EvaluationPoint::Decimal { .. }) {
        let w = format!("{t} is a decimal; its Diophantine type is unknown and the sequence is only as exact as the float");
        eprintln!("warning: {w}");
        warnings.push(w);
    }
    let seq = frac_parts(&t, n)?;
    let report = star_discrepancy(&seq)?;
    let grid = decade_grid(n);
    let decay_fit = if t.irrational().is_some() && grid.len() >= 2 {
        Some(discrepancy_decay_fit(&t, &grid)?)
    } else {
        if t.is_rational() {
            warnings.push("no decay fit: the discrepancy of a rational rotation does not tend to zero".into());
        }
        None
    };
    let finite_type = match (args.gamma, args.k) {
        (Some(gamma), Some(k)) => Some(finite_type_scan(&t, gamma, k, args.n, None)?),
        _ => None,
    };
    let payload = DiscrepancyPayload {
        t: t.to_string(),
        type_estimate: t.irrational().map(|i| i.type_estimate()),
        precision_bound: seq.precision_bound,
        report,
        decay_fit,
        finite_type,
        warnings,
    };
    let config = DiscrepancyConfig { command: "discrepancy", t: t.to_string(), n: args.n, gamma: args.gamma, k: args.k };
    let manifest = RunManifest::new("discrepancy", &config, None, started);
    let dir = OutputDir::create(out)?;
    let rows: Vec<Vec<String>> = match &payload.decay_fit {
        Some(fit) => fit.n.iter().zip(&fit.d_star).map(|(n, d)| vec![n.to_string(), cell(*d)]).collect(),
        None => vec![vec![n.to_string(), cell(payload.report.d_star)]],
    };
    let csv = dir.write_csv("discrepancy.csv", &manifest, &["n", "d_star"], &rows)?;
    if args.sequence {
        let seq_rows: Vec<Vec<String>> = seq.values.iter().enumerate().map(|(i, v)| vec![(i + 1).to_string(), cell(*v)]).collect();
        dir.write_csv("sequence.csv", &manifest, &["m", "value"], &seq_rows)?;
    }
    print!("D*_n = {}, D_n = {}", payload.report.d_star, payload.report.d_n);
    if let Some(fit) = &payload.decay_fit {
        print!(", decay slope {:.3}", fit.slope);
    }
    println!();
    let json = dir.write_json("discrepancy.json", &manifest, &payload)?;
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}
