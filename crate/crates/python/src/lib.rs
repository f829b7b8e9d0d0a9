//! Python bindings: `import ewens_clt`.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use ewens::circle::CircleFunction as CoreFunction;
use ewens::equidist::{self, FracSequence};
use ewens::ewens as sampling;
use ewens::lab::{self, ExperimentConfig, Probe};
use ewens::mahler::{self, MahlerValue};
use ewens::{CycleCounts, EwensParams, QuadratureConfig, RngStream};

create_exception!(ewens_clt, HypothesisViolation, PyValueError, "A hypothesis of the limit theorem fails.");

fn to_py(e: ewens::Error) -> PyErr {
    use ewens::Error as E;
    match e {
        E::InvalidArgument(_) | E::Refused(_) => PyValueError::new_err(e.to_string()),
        E::Quadrature { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => HypothesisViolation::new_err(e.to_string()),
    }
}

/// Serializes through JSON into plain Python objects.
fn to_object<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn params(theta: f64) -> PyResult<EwensParams> {
    EwensParams::new(theta).map_err(to_py)
}

#[pyclass(name = "EvaluationPoint", module = "ewens_clt", frozen)]
struct PyPoint(ewens::EvaluationPoint);

#[pymethods]
impl PyPoint {
    /// Parses `golden`, `sqrt2`, `e-frac`, `p/q`, `rational p/q`, `cf:a1,...` or `decimal:x`.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn golden() -> Self {
        Self(ewens::EvaluationPoint::golden())
    }

    #[staticmethod]
    fn sqrt2() -> Self {
        Self(ewens::EvaluationPoint::sqrt2())
    }

    #[staticmethod]
    fn rational(p: i64, q: u64) -> PyResult<Self> {
        ewens::EvaluationPoint::rational(p, q).map(Self).map_err(to_py)
    }

    #[getter]
    fn value(&self) -> f64 {
        self.0.value()
    }

    /// `{m t}`.
    fn frac(&self, m: u64) -> f64 {
        self.0.frac(m)
    }

    fn frac_parts(&self, n: usize) -> PyResult<Vec<f64>> {
        Ok(equidist::frac_parts(&self.0, n).map_err(to_py)?.values)
    }

    fn __repr__(&self) -> String {
        format!("EvaluationPoint('{}')", self.0)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }
}

#[pyclass(name = "CircleFunction", module = "ewens_clt", frozen)]
struct PyCircleFunction(CoreFunction);

#[pymethods]
impl PyCircleFunction {
    /// Polynomial `sum_k coeffs[k] z^k` with zeros on the circle declared
    /// as `(p, q, multiplicity)` for `e^{2 pi i p/q}`.
    #[new]
    #[pyo3(signature = (coeffs, zeros = Vec::new(), label = "f".to_string()))]
    fn new(coeffs: Vec<Complex64>, zeros: Vec<(i64, u64, u32)>, label: String) -> PyResult<Self> {
        let zeros = zeros
            .into_iter()
            .map(|(p, q, k)| ewens::circle::DeclaredZero::new(p, q, k))
            .collect::<ewens::Result<Vec<_>>>()
            .map_err(to_py)?;
        CoreFunction::new(label, coeffs, zeros).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn one_minus_z() -> Self {
        Self(CoreFunction::one_minus_z())
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(Self).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("serializes")
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label().to_string()
    }

    /// `f(e^{2 pi i s})`.
    fn eval(&self, s: f64) -> Complex64 {
        self.0.eval_f(s)
    }

    /// Principal log of `f(e^{2 pi i s})`; `None` where `f` vanishes.
    fn log(&self, s: f64) -> Option<Complex64> {
        let l = self.0.log_f(s);
        (!l.infinite).then(|| l.to_complex())
    }

    fn validate_zeros<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &self.0.validate_zeros())
    }

    /// `w^n(f)` at `x` for the given cycle counts `[C_1, ..., C_n]`.
    fn wn(&self, x: &PyPoint, counts: Vec<u32>) -> PyResult<Complex64> {
        let counts = CycleCounts::new(counts).map_err(to_py)?;
        self.0.wn(&x.0, &counts).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("CircleFunction({})", self.to_json())
    }
}

/// Cycle counts `[C_1, ..., C_n]` of an Ewens(theta) permutation.
#[pyfunction]
#[pyo3(signature = (n, theta = 1.0, seed = 0, stream = 0))]
fn sample_cycle_counts(n: usize, theta: f64, seed: u64, stream: u64) -> PyResult<Vec<u32>> {
    let c = sampling::sample_cycle_counts(n, &params(theta)?, &RngStream::new(seed, stream)).map_err(to_py)?;
    Ok(c.as_slice().to_vec())
}

#[pyfunction]
fn ewens_log_pmf(counts: Vec<u32>, theta: f64) -> PyResult<f64> {
    let counts = CycleCounts::new(counts).map_err(to_py)?;
    Ok(sampling::ewens_log_pmf(&counts, &params(theta)?))
}

#[pyfunction]
fn expected_cycle_count(m: usize, n: usize, theta: f64) -> PyResult<f64> {
    if m == 0 || m > n {
        return Err(PyValueError::new_err("need 1 <= m <= n"));
    }
    Ok(sampling::expected_cycle_count(m, n, &params(theta)?))
}

/// `[(counts, pmf), ...]` over all cycle types of `S_n`, `n <= 12`.
#[pyfunction]
fn enumerate_cycle_types(n: usize, theta: f64) -> PyResult<Vec<(Vec<u32>, f64)>> {
    let types = sampling::enumerate_cycle_types(n, &params(theta)?).map_err(to_py)?;
    Ok(types.into_iter().map(|t| (t.counts.as_slice().to_vec(), t.pmf)).collect())
}

/// `m(f)` by quadrature over the circle.
#[pyfunction]
fn mahler_measure(f: &PyCircleFunction) -> PyResult<Complex64> {
    Ok(mahler::m_irrational(&f.0, &QuadratureConfig::default()).map_err(to_py)?.value)
}

/// `m(f)` at a root of unity `e^{2 pi i p/q}`; `None` if `f` vanishes at a power.
#[pyfunction]
fn mahler_measure_rational(f: &PyCircleFunction, p: i64, q: u64) -> PyResult<Option<Complex64>> {
    Ok(match mahler::m_rational(&f.0, p, q).map_err(to_py)? {
        MahlerValue::Finite(z) => Some(z),
        MahlerValue::Infinite { .. } => None,
    })
}

/// `m(f)`, `V_a`, `V_b`, `E_ab` and `Sigma` as a dict.
#[pyfunction]
#[pyo3(signature = (f, x, theta = 1.0))]
fn limit_parameters<'py>(py: Python<'py>, f: &PyCircleFunction, x: &PyPoint, theta: f64) -> PyResult<Bound<'py, PyAny>> {
    let lp = mahler::covariance_parameters(&f.0, theta, &x.0, &QuadratureConfig::default()).map_err(to_py)?;
    to_object(py, &lp)
}

/// `(D*_n, D_n)` of points in `[0, 1)`.
#[pyfunction]
fn star_discrepancy(values: Vec<f64>) -> PyResult<(f64, f64)> {
    let seq = FracSequence::from_values(values).map_err(to_py)?;
    let r = equidist::star_discrepancy(&seq).map_err(to_py)?;
    Ok((r.d_star, r.d_n))
}

#[pyfunction]
fn km_moments<'py>(py: Python<'py>, m: u64, theta: f64) -> PyResult<Bound<'py, PyAny>> {
    to_object(py, &lab::km_moments(m, theta).map_err(to_py)?)
}

/// Exact characteristic function of the surrogate next to its Gaussian limit.
#[pyfunction]
fn char_fn<'py>(
    py: Python<'py>,
    f: &PyCircleFunction,
    x: &PyPoint,
    theta: f64,
    n: usize,
    grid: Vec<[f64; 2]>,
) -> PyResult<Bound<'py, PyAny>> {
    to_object(py, &lab::exact_char_fn(&f.0, &x.0, theta, n, &grid).map_err(to_py)?)
}

/// Runs an experiment config (JSON text) and returns the moment reports.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let config: ExperimentConfig = serde_json::from_str(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = py.detach(|| lab::run_experiment(&config)).map_err(to_py)?;
    to_object(py, &report)
}

/// Draws of the normalized statistic as `[(re, im), ...]` (rejected draws omitted).
#[pyfunction]
fn sample_statistic(py: Python<'_>, config: &str, n: usize) -> PyResult<Vec<(f64, f64)>> {
    let config: ExperimentConfig = serde_json::from_str(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    config.validate().map_err(to_py)?;
    let draws = py
        .detach(|| {
            let limit = config.limit_parameters()?;
            lab::sample_draws(&config, &limit, n)
        })
        .map_err(to_py)?;
    Ok(lab::accepted(&draws).iter().map(|s| (s.re, s.im)).collect())
}

#[pyfunction]
fn wasserstein_1d(samples: Vec<f64>, mean: f64, sd: f64) -> PyResult<f64> {
    lab::wasserstein_1d(&samples, mean, sd).map_err(to_py)
}

/// Names of the certified probe functions, in order.
#[pyfunction]
fn probe_names() -> Vec<String> {
    lab::certified_probes().iter().map(Probe::name).collect()
}

fn probe_by_index(index: usize) -> PyResult<Probe> {
    lab::certified_probes()
        .get(index)
        .copied()
        .ok_or_else(|| PyValueError::new_err(format!("probe index {index} out of range")))
}

/// Both sides of the Stein identity for certified probe `index`.
#[pyfunction]
fn stein_identity_residual<'py>(
    py: Python<'py>,
    index: usize,
    sigma: [[f64; 2]; 2],
    samples: Vec<[f64; 2]>,
) -> PyResult<Bound<'py, PyAny>> {
    let probe = probe_by_index(index)?;
    let r = py.detach(|| lab::stein_identity_residual(&probe, &sigma, &samples)).map_err(to_py)?;
    to_object(py, &r)
}

#[pymodule]
fn ewens_clt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HypothesisViolation", m.py().get_type::<HypothesisViolation>())?;
    m.add_class::<PyPoint>()?;
    m.add_class::<PyCircleFunction>()?;
    m.add_function(wrap_pyfunction!(sample_cycle_counts, m)?)?;
    m.add_function(wrap_pyfunction!(ewens_log_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(expected_cycle_count, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_cycle_types, m)?)?;
    m.add_function(wrap_pyfunction!(mahler_measure, m)?)?;
    m.add_function(wrap_pyfunction!(mahler_measure_rational, m)?)?;
    m.add_function(wrap_pyfunction!(limit_parameters, m)?)?;
    m.add_function(wrap_pyfunction!(star_discrepancy, m)?)?;
    m.add_function(wrap_pyfunction!(km_moments, m)?)?;
    m.add_function(wrap_pyfunction!(char_fn, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(sample_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein_1d, m)?)?;
    m.add_function(wrap_pyfunction!(probe_names, m)?)?;
    m.add_function(wrap_pyfunction!(stein_identity_residual, m)?)?;
    Ok(())
}
