//! Evaluation points `x = e^{2 pi i t}` on the unit circle.
//!
//! A rational `t = p/q` is kept as the reduced pair, so `{m t}` is computed
//! exactly by modular arithmetic. An irrational `t` is kept as its continued
//! fraction `[0; a_1, a_2, ...]` together with a 128-bit fixed-point value
//! taken from a convergent `p_k / q_k` with `q_k >= 2^64`; the fixed-point
//! error is below `2^-127`, so `{m t}` obtained by wrapping multiplication is
//! accurate to `m * 2^-127` before the final rounding to `f64`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_POW_M53: f64 = 1.0 / 9_007_199_254_740_992.0;
/// Number of partial quotients generated for the named irrationals.
const NAMED_CF_LEN: usize = 160;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EvaluationPoint {
    /// `t = p / q` with `gcd(p, q) = 1` and `0 <= p < q`.
    Rational { p: u64, q: u64 },
    Irrational(Irrational),
    /// A bare floating-point `t`. Its Diophantine type is unknown; only plain
    /// discrepancy runs accept it.
    Decimal { value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Irrational {
    label: String,
    cf: Vec<u64>,
    fixed: u128,
    convergent_denominators: Vec<u128>,
}

impl EvaluationPoint {
    pub fn rational(p: i64, q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::invalid("denominator must be positive"));
        }
        let p = p.rem_euclid(q as i64) as u64;
        let g = gcd(p, q);
        Ok(EvaluationPoint::Rational { p: p / g, q: q / g })
    }

    /// `(sqrt 5 - 1) / 2 = [0; 1, 1, 1, ...]`.
    pub fn golden() -> Self {
        Self::named("golden", vec![1; NAMED_CF_LEN])
    }

    /// `sqrt 2 - 1 = [0; 2, 2, 2, ...]`.
    pub fn sqrt2() -> Self {
        Self::named("sqrt2", vec![2; NAMED_CF_LEN])
    }

    /// `e - 2 = [0; 1, 2, 1, 1, 4, 1, 1, 6, ...]`.
    pub fn e_frac() -> Self {
        let cf = (0..NAMED_CF_LEN as u64).map(|i| if i % 3 == 1 { 2 * (i / 3 + 1) } else { 1 }).collect();
        Self::named("e-frac", cf)
    }

    fn named(label: &str, cf: Vec<u64>) -> Self {
        let mut irr = Irrational::from_cf(cf).expect("named continued fraction is long enough");
        irr.label = label.to_string();
        EvaluationPoint::Irrational(irr)
    }

    /// Irrational `t = [0; a_1, a_2, ...]` from its partial quotients.
    pub fn from_continued_fraction(cf: Vec<u64>) -> Result<Self> {
        Ok(EvaluationPoint::Irrational(Irrational::from_cf(cf)?))
    }

    pub fn decimal(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::invalid("decimal t must be finite"));
        }
        Ok(EvaluationPoint::Decimal { value: value.rem_euclid(1.0) })
    }

    /// `t` rounded to `f64`.
    pub fn value(&self) -> f64 {
        match self {
            EvaluationPoint::Rational { p, q } => *p as f64 / *q as f64,
            EvaluationPoint::Irrational(irr) => fixed_to_unit(irr.fixed),
            EvaluationPoint::Decimal { value } => *value,
        }
    }

    /// Order of `x` as a root of unity.
    pub fn order(&self) -> Option<u64> {
        match self {
            EvaluationPoint::Rational { q, .. } => Some(*q),
            _ => None,
        }
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, EvaluationPoint::Rational { .. })
    }

    pub fn irrational(&self) -> Option<&Irrational> {
        match self {
            EvaluationPoint::Irrational(irr) => Some(irr),
            _ => None,
        }
    }

    /// `{m t}`.
    pub fn frac(&self, m: u64) -> f64 {
        match self {
            EvaluationPoint::Rational { p, q } => ((m as u128 * *p as u128) % *q as u128) as f64 / *q as f64,
            EvaluationPoint::Irrational(irr) => fixed_to_unit(irr.fixed.wrapping_mul(m as u128)),
            EvaluationPoint::Decimal { .. } => fixed_to_unit(self.fixed().wrapping_mul(m as u128)),
        }
    }

    /// `{t}, {2t}, {3t}, ...` by running addition.
    pub fn frac_iter(&self) -> FracIter {
        match self {
            EvaluationPoint::Rational { p, q } => FracIter::Modular { p: *p, q: *q, acc: 0 },
            _ => FracIter::Fixed { step: self.fixed(), acc: 0 },
        }
    }

    /// Worst-case absolute error of `{m t}` for `m <= n`.
    pub fn precision_bound(&self, n: u64) -> f64 {
        match self {
            EvaluationPoint::Rational { .. } => 0.0,
            // fixed-point representation error plus the final rounding to 53 bits
            EvaluationPoint::Irrational(_) => n as f64 * 2f64.powi(-127) + TWO_POW_M53,
            // the f64 input is taken as exact
            EvaluationPoint::Decimal { .. } => TWO_POW_M53,
        }
    }

    fn fixed(&self) -> u128 {
        match self {
            EvaluationPoint::Rational { p, q } => long_division(*p as u128, *q as u128),
            EvaluationPoint::Irrational(irr) => irr.fixed,
            EvaluationPoint::Decimal { value } => ((value * 9_007_199_254_740_992.0) as u128) << 75,
        }
    }
}

impl Irrational {
    fn from_cf(cf: Vec<u64>) -> Result<Self> {
        if cf.iter().any(|&a| a == 0) {
            return Err(Error::invalid("partial quotients a_1, a_2, ... must be positive"));
        }
        // p_{-1} = 1, q_{-1} = 0; p_0 = 0, q_0 = 1
        let (mut p_prev, mut q_prev) = (1u128, 0u128);
        let (mut p, mut q) = (0u128, 1u128);
        let mut denominators = Vec::new();
        let mut reached = false;
        for &a in &cf {
            let next = (a as u128)
                .checked_mul(p)
                .and_then(|x| x.checked_add(p_prev))
                .zip((a as u128).checked_mul(q).and_then(|x| x.checked_add(q_prev)));
            let Some((p_next, q_next)) = next else {
                // the next convergent is beyond 2^128, so p/q is already within 2^-128 of t
                reached = true;
                break;
            };
            (p_prev, q_prev, p, q) = (p, q, p_next, q_next);
            denominators.push(q);
            if q >= 1u128 << 64 {
                reached = true;
                break;
            }
        }
        if !reached {
            return Err(Error::invalid(format!(
                "continued fraction with {} terms does not reach a convergent denominator >= 2^64",
                cf.len()
            )));
        }
        Ok(Self { label: format!("cf[{}]", cf.len()), fixed: long_division(p, q), cf, convergent_denominators: denominators })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn partial_quotients(&self) -> &[u64] {
        &self.cf
    }

    /// Convergent denominators `q_1, q_2, ...` up to the first one `>= 2^64`.
    pub fn convergent_denominators(&self) -> &[u128] {
        &self.convergent_denominators
    }

    /// Estimate of the Diophantine type `eta = limsup ln q_{k+1} / ln q_k`,
    /// taken as the maximum of the ratio over convergents with `q_k >= 2^16`.
    pub fn type_estimate(&self) -> f64 {
        let qs = &self.convergent_denominators;
        let ratios: Vec<f64> = qs
            .windows(2)
            .filter(|w| w[0] >= 1 << 16)
            .map(|w| (w[1] as f64).ln() / (w[0] as f64).ln())
            .collect();
        if ratios.is_empty() {
            // only huge partial quotients: fall back to every available pair
            return qs
                .windows(2)
                .filter(|w| w[0] > 1)
                .map(|w| (w[1] as f64).ln() / (w[0] as f64).ln())
                .fold(1.0, f64::max);
        }
        ratios.into_iter().fold(1.0, f64::max)
    }
}

/// Iterator over `{m t}` for `m = 1, 2, ...`.
#[derive(Debug, Clone)]
pub enum FracIter {
    Modular { p: u64, q: u64, acc: u64 },
    Fixed { step: u128, acc: u128 },
}

impl Iterator for FracIter {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        match self {
            FracIter::Modular { p, q, acc } => {
                *acc = ((*acc as u128 + *p as u128) % *q as u128) as u64;
                Some(*acc as f64 / *q as f64)
            }
            FracIter::Fixed { step, acc } => {
                *acc = acc.wrapping_add(*step);
                Some(fixed_to_unit(*acc))
            }
        }
    }
}

fn fixed_to_unit(x: u128) -> f64 {
    // keep 53 bits so the result is exact and strictly below 1
    (x >> 75) as f64 * TWO_POW_M53
}

// floor(num * 2^128 / den) for num < den.
fn long_division(num: u128, den: u128) -> u128 {
    debug_assert!(num < den);
    let mut r = num;
    let mut out = 0u128;
    for _ in 0..128 {
        out <<= 1;
        // r < den, so 2r >= den  <=>  r >= den - r
        if r >= den - r {
            r -= den - r;
            out |= 1;
        } else {
            r <<= 1;
        }
    }
    out
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl fmt::Display for EvaluationPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvaluationPoint::Rational { p, q } => write!(f, "rational {p}/{q}"),
            EvaluationPoint::Irrational(irr) => match irr.label.as_str() {
                "golden" | "sqrt2" | "e-frac" => f.write_str(&irr.label),
                _ => {
                    let terms: Vec<String> = irr.cf.iter().map(|a| a.to_string()).collect();
                    write!(f, "cf:{}", terms.join(","))
                }
            },
            EvaluationPoint::Decimal { value } => write!(f, "decimal:{value:?}"),
        }
    }
}

impl FromStr for EvaluationPoint {
    type Err = Error;

    /// Accepts `golden`, `sqrt2`, `e-frac`, `rational p/q` (or bare `p/q`),
    /// `cf:a1,a2,...` and `decimal:<float>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "golden" => return Ok(Self::golden()),
            "sqrt2" => return Ok(Self::sqrt2()),
            "e-frac" => return Ok(Self::e_frac()),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("cf:") {
            let cf = rest
                .split(',')
                .map(|a| a.trim().parse::<u64>().map_err(|e| Error::invalid(format!("bad partial quotient {a:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            return Self::from_continued_fraction(cf);
        }
        if let Some(rest) = s.strip_prefix("decimal:") {
            let v = rest.trim().parse::<f64>().map_err(|e| Error::invalid(format!("bad decimal {rest:?}: {e}")))?;
            return Self::decimal(v);
        }
        let frac = s.strip_prefix("rational").map(str::trim).unwrap_or(s);
        if let Some((p, q)) = frac.split_once('/') {
            let p = p.trim().parse::<i64>().map_err(|e| Error::invalid(format!("bad numerator {p:?}: {e}")))?;
            let q = q.trim().parse::<u64>().map_err(|e| Error::invalid(format!("bad denominator {q:?}: {e}")))?;
            return Self::rational(p, q);
        }
        Err(Error::invalid(format!(
            "unrecognized point {s:?}; expected golden, sqrt2, e-frac, rational p/q, cf:a1,a2,... or decimal:<t>"
        )))
    }
}

impl TryFrom<String> for EvaluationPoint {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EvaluationPoint> for String {
    fn from(p: EvaluationPoint) -> String {
        p.to_string()
    }
}
