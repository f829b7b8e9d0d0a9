//! Functions on the unit circle and the branch-fixed logarithm.
//!
//! A [`CircleFunction`] is `f(z) = z^shift * sum_k c_k z^k` restricted to
//! `|z| = 1`, together with its declared zeros at roots of unity. The
//! polynomial is deflated by the declared zeros once, and `log f` is then
//! evaluated in factored form:
//!
//! ```text
//! z - zeta = e^{i pi (s + alpha)} * 2i sin(pi (s - alpha)),   z = e^{2 pi i s}, zeta = e^{2 pi i alpha}
//! ```
//!
//! so `log|f|` stays accurate arbitrarily close to a zero and the argument is
//! a sum of explicit angles reduced once to `(-pi, pi]`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ewens::CycleCounts;
use crate::point::{gcd, EvaluationPoint};

/// Default tolerance for `|p(zeta)|` relative to the coefficient 1-norm.
pub const DEFAULT_ZERO_TOLERANCE: f64 = 1e-9;
/// Distance from the unit circle below which a computed root counts as a
/// zero on the circle.
pub const CIRCLE_ROOT_TOLERANCE: f64 = 1e-6;
/// Largest `n` for which [`char_poly_direct`] builds the permutation matrix.
pub const MAX_DETERMINANT_N: usize = 10;

/// A zero at `e^{2 pi i p/q}` of the given multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DeclaredZero {
    pub p: u64,
    pub q: u64,
    pub mult: u32,
}

impl DeclaredZero {
    pub fn new(p: i64, q: u64, mult: u32) -> Result<Self> {
        if q == 0 || mult == 0 {
            return Err(Error::invalid(format!("zero ({p}, {q}, {mult}): q and multiplicity must be positive")));
        }
        let p = p.rem_euclid(q as i64) as u64;
        let g = gcd(p, q);
        Ok(Self { p: p / g, q: q / g, mult })
    }

    pub fn angle(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    pub fn root(&self) -> Complex64 {
        cis_turns(self.angle())
    }

    /// Whether `e^{2 pi i j/q}` is this zero, by exact integer comparison.
    pub fn hits(&self, j: u64, q: u64) -> bool {
        (j % q) as u128 * self.q as u128 == self.p as u128 * q as u128
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    pub re: f64,
    pub im: f64,
    pub infinite: bool,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue { re: 0.0, im: 0.0, infinite: false };

    pub fn infinite() -> Self {
        LogValue { re: f64::NEG_INFINITY, im: 0.0, infinite: true }
    }

    pub fn finite(re: f64, im: f64) -> Self {
        LogValue { re, im, infinite: false }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// `(a, b) = (log|f|, arg f)` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ABDecomposition {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "CircleFunctionJson", into = "CircleFunctionJson")]
pub struct CircleFunction {
    label: String,
    coeffs: Vec<Complex64>,
    zeros: Vec<DeclaredZero>,
    shift: i32,
    zero_tolerance: f64,
    /// `p` divided by all declared zero factors, or `None` if some declared
    /// zero does not divide `p` within tolerance.
    deflated: Option<Vec<Complex64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CircleFunctionJson {
    #[serde(default)]
    label: String,
    coeffs: Vec<[f64; 2]>,
    #[serde(default)]
    zeros: Vec<(i64, u64, u32)>,
    #[serde(default, skip_serializing_if = "is_zero")]
    shift: i32,
}

fn is_zero(v: &i32) -> bool {
    *v == 0
}

impl TryFrom<CircleFunctionJson> for CircleFunction {
    type Error = Error;

    fn try_from(j: CircleFunctionJson) -> Result<Self> {
        let coeffs = j.coeffs.iter().map(|c| Complex64::new(c[0], c[1])).collect();
        let zeros = j.zeros.iter().map(|&(p, q, m)| DeclaredZero::new(p, q, m)).collect::<Result<Vec<_>>>()?;
        let mut f = CircleFunction::new(j.label, coeffs, zeros)?;
        f.shift = j.shift;
        Ok(f)
    }
}

impl From<CircleFunction> for CircleFunctionJson {
    fn from(f: CircleFunction) -> Self {
        CircleFunctionJson {
            label: f.label,
            coeffs: f.coeffs.iter().map(|c| [c.re, c.im]).collect(),
            zeros: f.zeros.iter().map(|z| (z.p as i64, z.q, z.mult)).collect(),
            shift: f.shift,
        }
    }
}

impl CircleFunction {
    /// `p(z) = sum_k coeffs[k] z^k` with the given declared zeros.
    pub fn new(label: impl Into<String>, coeffs: Vec<Complex64>, zeros: Vec<DeclaredZero>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
            return Err(Error::invalid("a circle function needs a nonzero coefficient"));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        let mut merged: Vec<DeclaredZero> = Vec::new();
        for z in zeros {
            match merged.iter_mut().find(|m| m.p == z.p && m.q == z.q) {
                Some(m) => m.mult += z.mult,
                None => merged.push(z),
            }
        }
        let mut f = Self {
            label: label.into(),
            coeffs,
            zeros: merged,
            shift: 0,
            zero_tolerance: DEFAULT_ZERO_TOLERANCE,
            deflated: None,
        };
        f.deflated = f.deflate();
        Ok(f)
    }

    /// Real-coefficient polynomial with the given zeros.
    pub fn from_real(label: impl Into<String>, coeffs: &[f64], zeros: &[(i64, u64, u32)]) -> Result<Self> {
        let zeros = zeros.iter().map(|&(p, q, m)| DeclaredZero::new(p, q, m)).collect::<Result<Vec<_>>>()?;
        Self::new(label, coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect(), zeros)
    }

    /// `f(z) = 1 - z`, whose class function is the characteristic polynomial.
    pub fn one_minus_z() -> Self {
        Self::from_real("1-z", &[1.0, -1.0], &[(0, 1, 1)]).expect("valid")
    }

    pub fn constant(c: Complex64) -> Result<Self> {
        Self::new("const", vec![c], vec![])
    }

    /// Multiplies by `z^shift`; on the circle a negative shift turns `z^k`
    /// into `conj(z)^{-k}`, e.g. `3 + z + conj(z)` is `z^{-1}(1 + 3z + z^2)`.
    pub fn with_shift(mut self, shift: i32) -> Self {
        self.shift = shift;
        self
    }

    pub fn with_zero_tolerance(mut self, tol: f64) -> Self {
        self.zero_tolerance = tol;
        self.deflated = self.deflate();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn zeros(&self) -> &[DeclaredZero] {
        &self.zeros
    }

    pub fn shift(&self) -> i32 {
        self.shift
    }

    pub fn zero_tolerance(&self) -> f64 {
        self.zero_tolerance
    }

    /// Declared zero angles in `[0, 1)`, sorted.
    pub fn zero_angles(&self) -> Vec<f64> {
        let mut a: Vec<f64> = self.zeros.iter().map(|z| z.angle()).collect();
        a.sort_by(f64::total_cmp);
        a
    }

    fn scale(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    fn deflate(&self) -> Option<Vec<Complex64>> {
        let tol = self.zero_tolerance * self.scale();
        let mut r = self.coeffs.clone();
        for z in &self.zeros {
            let root = z.root();
            for _ in 0..z.mult {
                if r.len() < 2 {
                    return None;
                }
                let (quotient, remainder) = synthetic_division(&r, root);
                if remainder.norm() > tol {
                    return None;
                }
                r = quotient;
            }
        }
        Some(r)
    }

    /// `f(e^{2 pi i s})` by Horner evaluation.
    pub fn eval_f(&self, s: f64) -> Complex64 {
        let z = cis_turns(s);
        horner(&self.coeffs, z) * cis_turns(self.shift as f64 * s)
    }

    /// Principal logarithm of `f(e^{2 pi i s})`, with `arg` in `(-pi, pi]`.
    pub fn log_f(&self, s: f64) -> LogValue {
        self.log_at(s, 0.0)
    }

    /// `log f` at `s = anchor + offset`, where the offset may be far below
    /// the resolution of `anchor`.
    pub fn log_at(&self, anchor: f64, offset: f64) -> LogValue {
        let s = anchor + offset;
        let z = cis_turns(s);
        let Some(r) = &self.deflated else {
            let v = horner(&self.coeffs, z);
            if v.norm() <= self.zero_tolerance * self.scale() {
                return LogValue::infinite();
            }
            return LogValue::finite(v.norm().ln(), wrap_angle(v.arg() + TAU * self.shift as f64 * s));
        };
        let mut re = 0.0;
        let mut arg = 0.0;
        for zero in &self.zeros {
            let alpha = zero.angle();
            let base = anchor - alpha;
            let k1 = base.round();
            let d1 = (base - k1) + offset;
            let k2 = d1.round();
            let d = d1 - k2;
            if d == 0.0 {
                return LogValue::infinite();
            }
            let sd = (PI * d).sin();
            let mult = zero.mult as f64;
            re += mult * (2.0 * sd.abs()).ln();
            // z - zeta = e^{i pi (s + alpha + k)} 2i sin(pi d), d = s - alpha - k
            let mut theta = PI * ((s + alpha) + (k1 + k2)).rem_euclid(2.0) + 0.5 * PI;
            if sd < 0.0 {
                theta += PI;
            }
            arg += (mult * theta).rem_euclid(TAU);
        }
        let v = horner(r, z);
        if v.norm() <= self.zero_tolerance * self.scale() {
            return LogValue::infinite();
        }
        re += v.norm().ln();
        arg += v.arg() + TAU * (self.shift as f64 * s).rem_euclid(1.0);
        LogValue::finite(re, wrap_angle(arg))
    }

    /// `log f(x^m)` with exact detection of hits on declared zeros.
    pub fn log_at_point(&self, x: &EvaluationPoint, m: u64) -> LogValue {
        if let EvaluationPoint::Rational { p, q } = x {
            let j = (m as u128 * *p as u128 % *q as u128) as u64;
            if self.zeros.iter().any(|z| z.hits(j, *q)) {
                return LogValue::infinite();
            }
            return self.log_f(j as f64 / *q as f64);
        }
        self.log_f(x.frac(m))
    }

    pub fn ab_decomposition(&self, s: f64) -> Result<ABDecomposition> {
        let l = self.log_f(s);
        if l.infinite {
            return Err(Error::ZeroOnCircle { s });
        }
        Ok(ABDecomposition { a: l.re, b: l.im })
    }

    /// Checks the declared zeros and searches for undeclared zeros on the
    /// circle.
    pub fn validate_zeros(&self) -> ZeroValidation {
        let scale = self.scale();
        let tol = self.zero_tolerance * scale;
        let mut declared = Vec::new();
        for z in &self.zeros {
            let taylor = taylor_coefficients(&self.coeffs, z.root(), z.mult as usize + 1);
            let residuals: Vec<f64> = taylor.iter().map(|c| c.norm()).collect();
            let vanishing = residuals[..z.mult as usize].iter().all(|&r| r <= tol);
            let next_nonzero = residuals[z.mult as usize] > tol;
            declared.push(DeclaredZeroCheck {
                p: z.p,
                q: z.q,
                mult: z.mult,
                taylor_residuals: residuals,
                ok: vanishing && next_nonzero,
            });
        }
        let poly = self.deflated.clone().unwrap_or_else(|| self.coeffs.clone());
        let mut undeclared = Vec::new();
        for root in polynomial_roots(&poly) {
            if (root.norm() - 1.0).abs() < CIRCLE_ROOT_TOLERANCE {
                let s = (root.arg() / TAU).rem_euclid(1.0);
                let known = self.deflated.is_none()
                    && self.zeros.iter().any(|z| {
                        let d = (s - z.angle()).rem_euclid(1.0);
                        d.min(1.0 - d) < CIRCLE_ROOT_TOLERANCE
                    });
                if !known {
                    undeclared.push(UndeclaredZero { s, root: [root.re, root.im] });
                }
            }
        }
        undeclared.sort_by(|a, b| a.s.total_cmp(&b.s));
        let common_denominator = self.zeros.iter().fold(1u64, |acc, z| acc / gcd(acc, z.q) * z.q);
        let mut issues = Vec::new();
        for d in declared.iter().filter(|d| !d.ok) {
            issues.push(format!("declared zero {}/{} with multiplicity {} does not match p", d.p, d.q, d.mult));
        }
        for u in &undeclared {
            issues.push(format!("undeclared zero on the circle at s = {:.12}", u.s));
        }
        ZeroValidation { valid: issues.is_empty(), declared, undeclared, common_denominator, issues }
    }

    /// `Ok(())` if the zero hypothesis holds, else the violation.
    pub fn require_valid(&self) -> Result<ZeroValidation> {
        let v = self.validate_zeros();
        if v.valid {
            Ok(v)
        } else {
            Err(Error::HypothesisViolation(format!("{}: {}", self.label, v.issues.join("; "))))
        }
    }

    /// `w^n(f) = sum_m C_m log f(x^m)`.
    pub fn wn(&self, x: &EvaluationPoint, counts: &CycleCounts) -> Result<Complex64> {
        LogTable::new(self, x, counts.n()).wn(counts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeclaredZeroCheck {
    pub p: u64,
    pub q: u64,
    pub mult: u32,
    /// `|p^{(k)}(zeta) / k!|` for `k = 0..=mult`.
    pub taylor_residuals: Vec<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UndeclaredZero {
    pub s: f64,
    pub root: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroValidation {
    pub valid: bool,
    pub declared: Vec<DeclaredZeroCheck>,
    pub undeclared: Vec<UndeclaredZero>,
    /// Least common multiple of the orders of the declared zeros.
    pub common_denominator: u64,
    pub issues: Vec<String>,
}

/// `log f(x^m)` for `m = 1..=n`, precomputed once. For rational `x` of order
/// `q` only one period is stored.
#[derive(Debug, Clone)]
pub struct LogTable {
    values: Vec<LogValue>,
    n: usize,
}

impl LogTable {
    pub fn new(f: &CircleFunction, x: &EvaluationPoint, n: usize) -> Self {
        let len = match x.order() {
            Some(q) => (q as usize).min(n.max(1)),
            None => n,
        };
        let values = (1..=len as u64).into_par_iter().map(|m| f.log_at_point(x, m)).collect();
        Self { values, n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The table for a smaller `n`.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n {
            return Err(Error::invalid(format!("prefix length {n} outside 1..={}", self.n)));
        }
        Ok(Self { values: self.values[..self.values.len().min(n)].to_vec(), n })
    }

    pub fn get(&self, m: usize) -> LogValue {
        self.values[(m - 1) % self.values.len()]
    }

    /// Smallest `m <= n` with `f(x^m) = 0`.
    pub fn first_infinite(&self) -> Option<usize> {
        self.values.iter().position(|v| v.infinite).map(|i| i + 1).filter(|&m| m <= self.n)
    }

    pub fn iter(&self) -> impl Iterator<Item = LogValue> + '_ {
        (1..=self.n).map(|m| self.get(m))
    }

    pub fn wn(&self, counts: &CycleCounts) -> Result<Complex64> {
        if counts.n() > self.n {
            return Err(Error::invalid(format!("table covers m <= {}, counts have n = {}", self.n, counts.n())));
        }
        let mut sum = Complex64::new(0.0, 0.0);
        for (m, c) in counts.nonzero() {
            let v = self.get(m);
            if v.infinite {
                return Err(Error::InfiniteValue { m });
            }
            sum += v.to_complex() * c as f64;
        }
        Ok(sum)
    }
}

/// Both sides of `Z_n(x) = det(I - x sigma) = prod_m (1 - x^m)^{C_m}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharPoly {
    pub product: Complex64,
    /// `det(I - x sigma)` for a permutation of the given cycle type; only
    /// for `n <= 10`.
    pub determinant: Option<Complex64>,
}

pub fn char_poly_direct(counts: &CycleCounts, x: Complex64) -> CharPoly {
    let mut product = Complex64::new(1.0, 0.0);
    for (m, c) in counts.nonzero() {
        product *= (Complex64::new(1.0, 0.0) - x.powu(m as u32)).powu(c);
    }
    let n = counts.n();
    let determinant = (n <= MAX_DETERMINANT_N).then(|| {
        let perm = counts.canonical_permutation();
        let mut a = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            a[i][i] += 1.0;
            a[perm[i]][i] -= x;
        }
        determinant(a)
    });
    CharPoly { product, determinant }
}

/// Determinant by Gaussian elimination with partial pivoting.
fn determinant(mut a: Vec<Vec<Complex64>>) -> Complex64 {
    let n = a.len();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap();
        if a[pivot][col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= factor * v;
            }
        }
    }
    det
}

/// `e^{2 pi i s}` with the argument reduced to `[-1/2, 1/2]` turns first.
pub fn cis_turns(s: f64) -> Complex64 {
    let r = s - s.round();
    let (sin, cos) = (TAU * r).sin_cos();
    Complex64::new(cos, sin)
}

/// Reduces an angle to `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Divides `p` (ascending coefficients) by `z - root`.
fn synthetic_division(p: &[Complex64], root: Complex64) -> (Vec<Complex64>, Complex64) {
    let d = p.len() - 1;
    let mut q = vec![Complex64::new(0.0, 0.0); d];
    let mut acc = p[d];
    for k in (0..d).rev() {
        q[k] = acc;
        acc = acc * root + p[k];
    }
    (q, acc)
}

/// First `count` Taylor coefficients of `p` at `root`.
fn taylor_coefficients(p: &[Complex64], root: Complex64, count: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(count);
    let mut cur = p.to_vec();
    for _ in 0..count {
        if cur.is_empty() {
            out.push(Complex64::new(0.0, 0.0));
            continue;
        }
        if cur.len() == 1 {
            out.push(cur[0]);
            cur.clear();
            continue;
        }
        let (q, r) = synthetic_division(&cur, root);
        out.push(r);
        cur = q;
    }
    out
}

/// All roots of a polynomial (ascending coefficients) by Aberth iteration.
pub fn polynomial_roots(p: &[Complex64]) -> Vec<Complex64> {
    let mut c: Vec<Complex64> = p.to_vec();
    while c.last().is_some_and(|v| v.norm() == 0.0) {
        c.pop();
    }
    let mut roots = Vec::new();
    // roots at the origin
    while c.len() > 1 && c[0].norm() == 0.0 {
        c.remove(0);
        roots.push(Complex64::new(0.0, 0.0));
    }
    let d = c.len().saturating_sub(1);
    if d == 0 {
        return roots;
    }
    let lead = c[d];
    let monic: Vec<Complex64> = c.iter().map(|v| v / lead).collect();
    let deriv: Vec<Complex64> = (1..=d).map(|k| monic[k] * k as f64).collect();
    let radius = (1..=d).map(|k| monic[d - k].norm().powf(1.0 / k as f64)).fold(0.0, f64::max).max(1e-3);
    let mut z: Vec<Complex64> =
        (0..d).map(|k| Complex64::from_polar(radius, TAU * k as f64 / d as f64 + 0.4)).collect();
    for _ in 0..1000 {
        let mut max_step: f64 = 0.0;
        for k in 0..d {
            let pv = horner(&monic, z[k]);
            let dv = horner(&deriv, z[k]);
            if pv.norm() == 0.0 {
                continue;
            }
            let ratio = pv / dv;
            let sum: Complex64 = (0..d).filter(|&j| j != k).map(|j| (z[k] - z[j]).inv()).sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * sum);
            if step.re.is_finite() && step.im.is_finite() {
                z[k] -= step;
                max_step = max_step.max(step.norm() / z[k].norm().max(1e-300));
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }
    roots.extend(z);
    roots
}
