//! Ewens-distributed cycle counts.
//!
//! Cycle counts are sampled through the Feller coupling: a Bernoulli word
//! `1 xi_2 xi_3 ...` with `P(xi_m = 1) = theta / (theta + m - 1)`. The
//! spacings between consecutive ones of `1 xi_2 ... xi_n 1` have the law of
//! the cycle lengths of an Ewens permutation of size `n`, while the spacings
//! of the whole word give independent Poisson counts `Y_m` with mean
//! `theta / m`. Both are read off the same bits, so `C_m` and `Y_m` can be
//! compared draw by draw.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Default ratio between the sampled horizon and `n` for the Poisson side of
/// the coupling. Spacings that would end beyond the horizon are dropped; the
/// expected number of those is of order `theta / horizon`.
pub const DEFAULT_HORIZON_FACTOR: usize = 10;

/// Largest `n` accepted by [`enumerate_cycle_types`].
pub const MAX_ENUMERATION_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EwensParams {
    theta: f64,
}

impl EwensParams {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::invalid(format!("theta must be positive and finite, got {theta}")));
        }
        Ok(Self { theta })
    }

    /// The uniform measure.
    pub fn uniform() -> Self {
        Self { theta: 1.0 }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Success probability of the Feller bit at position `m >= 1`.
    #[inline]
    pub fn bit_probability(&self, m: usize) -> f64 {
        self.theta / (self.theta + (m - 1) as f64)
    }
}

/// Cycle counts `(C_1, ..., C_n)` of a permutation of size `n`.
///
/// The constructor enforces `sum_m m * C_m = n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CycleCounts {
    // counts[m - 1] = C_m
    counts: Vec<u32>,
}

impl CycleCounts {
    /// `counts[m - 1]` is the number of `m`-cycles.
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid("cycle counts need n >= 1"));
        }
        let n = counts.len() as u64;
        let total: u64 = counts.iter().enumerate().map(|(i, &c)| (i as u64 + 1) * c as u64).sum();
        if total != n {
            return Err(Error::invalid(format!("sum of m * C_m is {total}, expected n = {n}")));
        }
        Ok(Self { counts })
    }

    /// Builds the counts from a list of cycle lengths summing to `n`.
    pub fn from_cycle_lengths(n: usize, lengths: &[usize]) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be >= 1"));
        }
        let mut counts = vec![0u32; n];
        for &len in lengths {
            if len == 0 || len > n {
                return Err(Error::invalid(format!("cycle length {len} outside 1..={n}")));
            }
            counts[len - 1] += 1;
        }
        Self::new(counts)
    }

    /// Cycle type of a permutation in one-line notation on `0..n`.
    pub fn from_permutation(perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        let mut lengths = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = *perm
                    .get(i)
                    .filter(|&&j| j < n)
                    .ok_or_else(|| Error::invalid("not a permutation"))?;
                len += 1;
            }
            if i != start {
                return Err(Error::invalid("not a permutation"));
            }
            lengths.push(len);
        }
        Self::from_cycle_lengths(n, &lengths)
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    /// `C_m`, zero outside `1..=n`.
    pub fn get(&self, m: usize) -> u32 {
        if m == 0 {
            return 0;
        }
        self.counts.get(m - 1).copied().unwrap_or(0)
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.counts
    }

    /// `(m, C_m)` for every `m` with `C_m > 0`, in increasing `m`.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i + 1, c))
    }

    pub fn total_cycles(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// A permutation of this cycle type in one-line notation: cycles are laid
    /// out on consecutive blocks, shortest first.
    pub fn canonical_permutation(&self) -> Vec<usize> {
        let mut perm = Vec::with_capacity(self.n());
        for (m, c) in self.nonzero() {
            for _ in 0..c {
                let base = perm.len();
                perm.extend((0..m).map(|k| base + (k + 1) % m));
            }
        }
        perm
    }
}

/// Bits `xi_1 = 1, xi_2, ..., xi_horizon` of the Feller coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct FellerSequence {
    words: Vec<u64>,
    horizon: usize,
    theta: f64,
}

impl FellerSequence {
    /// Builds a sequence from explicit bits; `bits[0]` is position 1 and must be set.
    pub fn from_bits(bits: &[bool], params: &EwensParams) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::invalid("horizon must be >= 1"));
        }
        if !bits[0] {
            return Err(Error::invalid("the first Feller bit is always 1"));
        }
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
            words[i / 64] |= 1 << (i % 64);
        }
        Ok(Self { words, horizon: bits.len(), theta: params.theta() })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Bit at position `m` (1-based).
    pub fn bit(&self, m: usize) -> bool {
        assert!(m >= 1 && m <= self.horizon, "position {m} outside 1..={}", self.horizon);
        let i = m - 1;
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// Positions of the ones, increasing.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w * 64 + tz + 1)
            })
        })
    }
}

/// Counts `Y_m` of `m`-spacings in the sampled part of the Feller word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoissonCounts {
    // y[m - 1] = Y_m
    y: Vec<u64>,
    /// The word ends in a run of zeros, so one spacing was cut by the horizon.
    pub truncated: bool,
}

impl PoissonCounts {
    pub fn get(&self, m: usize) -> u64 {
        if m == 0 {
            return 0;
        }
        self.y.get(m - 1).copied().unwrap_or(0)
    }

    pub fn m_max(&self) -> usize {
        self.y.len()
    }
}

pub fn sample_feller_bits(horizon: usize, params: &EwensParams, stream: &RngStream) -> Result<FellerSequence> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    let mut rng = stream.rng();
    let mut words = vec![0u64; horizon.div_ceil(64)];
    words[0] = 1;
    for m in 2..=horizon {
        if rng.random::<f64>() < params.bit_probability(m) {
            let i = m - 1;
            words[i / 64] |= 1 << (i % 64);
        }
    }
    Ok(FellerSequence { words, horizon, theta: params.theta() })
}

/// Cycle counts from the spacings of `1 xi_2 ... xi_n 1`.
pub fn cycle_counts_from_bits(seq: &FellerSequence, n: usize) -> Result<CycleCounts> {
    if n == 0 || n > seq.horizon {
        return Err(Error::invalid(format!("need 1 <= n <= horizon = {}, got n = {n}", seq.horizon)));
    }
    let mut counts = vec![0u32; n];
    let mut last = 1;
    for pos in seq.ones().skip(1).take_while(|&p| p <= n).chain(std::iter::once(n + 1)) {
        counts[pos - last - 1] += 1;
        last = pos;
    }
    CycleCounts::new(counts)
}

/// `Y_m` for `m <= m_max` from the spacings fully inside the sampled word.
pub fn coupled_poisson_counts(seq: &FellerSequence, m_max: usize) -> Result<PoissonCounts> {
    if m_max == 0 || m_max > seq.horizon {
        return Err(Error::invalid(format!("need 1 <= m_max <= horizon = {}, got {m_max}", seq.horizon)));
    }
    let mut y = vec![0u64; m_max];
    let mut last = 1;
    for pos in seq.ones().skip(1) {
        let len = pos - last;
        if len <= m_max {
            y[len - 1] += 1;
        }
        last = pos;
    }
    Ok(PoissonCounts { y, truncated: last != seq.horizon })
}

/// Streams the cycle lengths of a size-`n` Feller draw without storing bits.
///
/// Consumes the generator exactly like [`sample_feller_bits`], so the lengths
/// agree with [`cycle_counts_from_bits`] on the same stream.
pub fn for_each_cycle_length<R: Rng + ?Sized>(n: usize, params: &EwensParams, rng: &mut R, mut emit: impl FnMut(usize)) {
    let mut last = 1;
    for m in 2..=n {
        if rng.random::<f64>() < params.bit_probability(m) {
            emit(m - last);
            last = m;
        }
    }
    emit(n + 1 - last);
}

pub fn sample_cycle_counts(n: usize, params: &EwensParams, stream: &RngStream) -> Result<CycleCounts> {
    let seq = sample_feller_bits(n, params, stream)?;
    cycle_counts_from_bits(&seq, n)
}

/// `ln binom(theta + n - 1, n) = lgamma(theta + n) - lgamma(n + 1) - lgamma(theta)`.
pub fn ln_rising_binomial(theta: f64, n: usize) -> f64 {
    ln_gamma(theta + n as f64) - ln_gamma(n as f64 + 1.0) - ln_gamma(theta)
}

/// Log-probability of the cycle type under the Ewens measure.
pub fn ewens_log_pmf(counts: &CycleCounts, params: &EwensParams) -> f64 {
    let theta = params.theta();
    let body: f64 = counts
        .nonzero()
        .map(|(m, c)| c as f64 * (theta / m as f64).ln() - ln_gamma(c as f64 + 1.0))
        .sum();
    body - ln_rising_binomial(theta, counts.n())
}

/// `E C_m^{(n)} = (theta/m) binom(theta+n-m-1, n-m) / binom(theta+n-1, n)` for `m <= n`.
pub fn expected_cycle_count(m: usize, n: usize, params: &EwensParams) -> f64 {
    if m == 0 || m > n {
        return 0.0;
    }
    let theta = params.theta();
    (theta / m as f64) * (ln_rising_binomial(theta, n - m) - ln_rising_binomial(theta, n)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleType {
    pub counts: CycleCounts,
    pub pmf: f64,
    /// Number of permutations with this cycle type, `n! / prod m^{c_m} c_m!`.
    pub permutations: u64,
}

/// All cycle types of `S_n` with their Ewens weights. Refuses `n > 12`.
pub fn enumerate_cycle_types(n: usize, params: &EwensParams) -> Result<Vec<CycleType>> {
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    if n > MAX_ENUMERATION_N {
        return Err(Error::Refused(format!("enumeration is capped at n <= {MAX_ENUMERATION_N}, got {n}")));
    }
    let mut out = Vec::new();
    let mut counts = vec![0u32; n];
    partitions(n, n, &mut counts, &mut out);
    let factorial: u64 = (1..=n as u64).product();
    Ok(out
        .into_iter()
        .map(|counts| {
            let counts = CycleCounts::new(counts).expect("partition of n");
            let denom: u64 = counts
                .nonzero()
                .map(|(m, c)| (m as u64).pow(c) * (1..=c as u64).product::<u64>())
                .product();
            let pmf = ewens_log_pmf(&counts, params).exp();
            CycleType { counts, pmf, permutations: factorial / denom }
        })
        .collect())
}

// Partitions of `rest` into parts <= `max_part`, written into `counts`.
fn partitions(rest: usize, max_part: usize, counts: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if rest == 0 {
        out.push(counts.clone());
        return;
    }
    for part in (1..=max_part.min(rest)).rev() {
        counts[part - 1] += 1;
        partitions(rest - part, part, counts, out);
        counts[part - 1] -= 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CouplingBoundCase {
    /// `theta >= 1`: `theta (theta + 1) / (theta + n)`.
    LargeTheta,
    /// `0 < theta < 1`: `theta (theta + 1) / (theta + n - m)`.
    SmallTheta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingGap {
    pub n: usize,
    pub m: usize,
    pub samples: usize,
    pub mean_gap: f64,
    pub std_error: f64,
    pub bound: f64,
    pub case: CouplingBoundCase,
    /// `false` when `theta < 1` and `m > n / 2`; the bound is only checked for `m <= n / 2` there.
    pub within_tested_range: bool,
    /// Draws whose word ended in a run of zeros at the horizon.
    pub truncated_draws: usize,
    pub horizon: usize,
    pub stream: RngStream,
}

impl CouplingGap {
    pub fn respects_bound(&self, sigmas: f64) -> bool {
        self.mean_gap <= self.bound + sigmas * self.std_error
    }
}

/// Upper bound on `E|C_m^{(n)} - Y_m|` under the Feller coupling.
pub fn coupling_bound(n: usize, m: usize, params: &EwensParams) -> (f64, CouplingBoundCase) {
    let theta = params.theta();
    if theta >= 1.0 {
        (theta * (theta + 1.0) / (theta + n as f64), CouplingBoundCase::LargeTheta)
    } else {
        (theta * (theta + 1.0) / (theta + (n - m) as f64), CouplingBoundCase::SmallTheta)
    }
}

pub fn coupling_gap_estimate(
    n: usize,
    m: usize,
    params: &EwensParams,
    samples: usize,
    stream: &RngStream,
) -> Result<CouplingGap> {
    let mut gaps = coupling_gaps(n, &[m], params, samples, DEFAULT_HORIZON_FACTOR * n, stream)?;
    Ok(gaps.remove(0))
}

/// `E|C_m - Y_m|` for several `m` from the same coupled draws. Draw `i` uses
/// `stream.substream(i)`.
pub fn coupling_gaps(
    n: usize,
    ms: &[usize],
    params: &EwensParams,
    samples: usize,
    horizon: usize,
    stream: &RngStream,
) -> Result<Vec<CouplingGap>> {
    if samples == 0 {
        return Err(Error::invalid("samples must be >= 1"));
    }
    if n == 0 || horizon < n {
        return Err(Error::invalid(format!("need 1 <= n <= horizon, got n = {n}, horizon = {horizon}")));
    }
    if let Some(&bad) = ms.iter().find(|&&m| m == 0 || m > n) {
        return Err(Error::invalid(format!("m = {bad} outside 1..={n}")));
    }
    let m_max = ms.iter().copied().max().unwrap_or(1);
    let draws: Vec<(Vec<u64>, bool)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let seq = sample_feller_bits(horizon, params, &stream.substream(i)).expect("horizon >= 1");
            let c = cycle_counts_from_bits(&seq, n).expect("n <= horizon");
            let y = coupled_poisson_counts(&seq, m_max).expect("m_max <= n");
            let gaps = ms.iter().map(|&m| (c.get(m) as i64 - y.get(m) as i64).unsigned_abs()).collect();
            (gaps, y.truncated)
        })
        .collect();
    let truncated_draws = draws.iter().filter(|(_, t)| *t).count();
    Ok(ms
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let (mean, std_error) = mean_and_std_error(draws.iter().map(|(g, _)| g[k] as f64));
            let (bound, case) = coupling_bound(n, m, params);
            CouplingGap {
                n,
                m,
                samples,
                mean_gap: mean,
                std_error,
                bound,
                case,
                within_tested_range: params.theta() >= 1.0 || 2 * m <= n,
                truncated_draws,
                horizon,
                stream: *stream,
            }
        })
        .collect())
}

pub(crate) fn mean_and_std_error(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut count, mut mean, mut m2) = (0.0f64, 0.0f64, 0.0f64);
    for v in values {
        count += 1.0;
        let delta = v - mean;
        mean += delta / count;
        m2 += delta * (v - mean);
    }
    if count < 2.0 {
        return (mean, f64::INFINITY);
    }
    (mean, (m2 / (count - 1.0) / count).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Number of bins after pooling those with expected count below 5.
    pub bins: usize,
}

/// Pearson goodness-of-fit of observed counts against probabilities.
///
/// Bins with expected count below 5 are pooled (smallest first) into one bin.
pub fn chi_square_gof(observed: &[u64], probabilities: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != probabilities.len() || observed.is_empty() {
        return Err(Error::invalid("observed and probabilities must be non-empty and equally long"));
    }
    let total: u64 = observed.iter().sum();
    let total = total as f64;
    let bins: Vec<(f64, f64)> = observed.iter().zip(probabilities).map(|(&o, &p)| (o as f64, p * total)).collect();
    let (rare, mut pooled): (Vec<_>, Vec<_>) = bins.into_iter().partition(|&(_, e)| e < 5.0);
    let rare = rare.iter().fold((0.0, 0.0), |acc, &(o, e)| (acc.0 + o, acc.1 + e));
    if rare.1 > 0.0 {
        if rare.1 >= 5.0 || pooled.is_empty() {
            pooled.push(rare);
        } else {
            let smallest = pooled.iter_mut().min_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty");
            smallest.0 += rare.0;
            smallest.1 += rare.1;
        }
    }
    let statistic: f64 = pooled.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).map_err(|e| Error::invalid(e.to_string()))?;
        1.0 - dist.cdf(statistic)
    };
    Ok(ChiSquareTest { statistic, dof, p_value, bins: pooled.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(theta: f64) -> EwensParams {
        EwensParams::new(theta).unwrap()
    }

    #[test]
    fn rejects_bad_theta() {
        assert!(EwensParams::new(0.0).is_err());
        assert!(EwensParams::new(-1.0).is_err());
        assert!(EwensParams::new(f64::NAN).is_err());
    }

    #[test]
    fn bit_probability_uniform_is_one_over_m() {
        let p = EwensParams::uniform();
        for m in 1..50 {
            assert_eq!(p.bit_probability(m), 1.0 / m as f64);
        }
    }

    #[test]
    fn bit_probability_tends_to_one_for_large_theta() {
        let mut last = 0.0;
        for theta in [1.0, 10.0, 1e3, 1e6, 1e9] {
            let p = params(theta).bit_probability(7);
            assert!(p > last);
            last = p;
        }
        assert!(1.0 - last < 1e-8);
    }

    #[test]
    fn zero_horizon_is_invalid() {
        assert!(sample_feller_bits(0, &EwensParams::uniform(), &RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn counts_from_all_ones() {
        let seq = FellerSequence::from_bits(&[true; 9], &EwensParams::uniform()).unwrap();
        let c = cycle_counts_from_bits(&seq, 9).unwrap();
        assert_eq!(c.get(1), 9);
        assert_eq!(c.total_cycles(), 9);
    }

    #[test]
    fn counts_from_single_spacing() {
        let seq = FellerSequence::from_bits(&[true, false, false, false, false], &EwensParams::uniform()).unwrap();
        let c = cycle_counts_from_bits(&seq, 5).unwrap();
        assert_eq!(c.as_slice(), &[0, 0, 0, 0, 1]);
    }

    #[test]
    fn counts_from_mixed_word() {
        // 1 0 1 1 | 1: spacings 2, 1, 1
        let seq = FellerSequence::from_bits(&[true, false, true, true], &EwensParams::uniform()).unwrap();
        let c = cycle_counts_from_bits(&seq, 4).unwrap();
        assert_eq!(c.as_slice(), &[2, 1, 0, 0]);
    }

    #[test]
    fn n_beyond_horizon_is_invalid() {
        let seq = FellerSequence::from_bits(&[true, true], &EwensParams::uniform()).unwrap();
        assert!(cycle_counts_from_bits(&seq, 3).is_err());
    }

    #[test]
    fn poisson_counts_all_ones() {
        let seq = FellerSequence::from_bits(&[true; 20], &EwensParams::uniform()).unwrap();
        let y = coupled_poisson_counts(&seq, 5).unwrap();
        assert_eq!(y.get(1), 19);
        assert!(!y.truncated);
    }

    #[test]
    fn poisson_counts_flags_trailing_zeros() {
        let seq = FellerSequence::from_bits(&[true, false, true, false], &EwensParams::uniform()).unwrap();
        let y = coupled_poisson_counts(&seq, 3).unwrap();
        assert_eq!(y.get(2), 1);
        assert!(y.truncated);
    }

    #[test]
    fn gap_is_zero_when_suffix_is_all_ones() {
        // prefix 1 0 1 1 then ones: C and Y agree on every m <= n
        let mut bits = vec![true, false, true, true];
        bits.extend([true; 16]);
        let seq = FellerSequence::from_bits(&bits, &EwensParams::uniform()).unwrap();
        let c = cycle_counts_from_bits(&seq, 4).unwrap();
        let y = coupled_poisson_counts(&seq, 4).unwrap();
        // Y_1 also counts the 1-spacings after position 4; the others agree.
        for m in 2..=4 {
            assert_eq!(c.get(m) as u64, y.get(m));
        }
    }

    #[test]
    fn walker_matches_bits() {
        let p = params(1.7);
        for i in 0..20 {
            let stream = RngStream::new(11, i);
            let from_bits = sample_cycle_counts(300, &p, &stream).unwrap();
            let mut lengths = Vec::new();
            for_each_cycle_length(300, &p, &mut stream.rng(), |len| lengths.push(len));
            assert_eq!(CycleCounts::from_cycle_lengths(300, &lengths).unwrap(), from_bits);
        }
    }

    #[test]
    fn pmf_uniform_identity() {
        let c = CycleCounts::new(vec![3, 0, 0]).unwrap();
        assert!((ewens_log_pmf(&c, &EwensParams::uniform()).exp() - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn pmf_three_cycle_theta_two() {
        // Two 3-cycles, each with weight 2 / (2 * 3 * 4).
        let c = CycleCounts::new(vec![0, 0, 1]).unwrap();
        assert!((ewens_log_pmf(&c, &params(2.0)).exp() - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn pmf_normalizes() {
        let types = enumerate_cycle_types(5, &params(0.7)).unwrap();
        let total: f64 = types.iter().map(|t| t.pmf).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_counts_rejected() {
        assert!(CycleCounts::new(vec![1, 1, 1]).is_err());
        assert!(CycleCounts::new(vec![]).is_err());
    }

    #[test]
    fn expected_count_cases() {
        assert_eq!(expected_cycle_count(6, 5, &params(2.0)), 0.0);
        for m in 1..=30 {
            assert!((expected_cycle_count(m, 30, &EwensParams::uniform()) - 1.0 / m as f64).abs() < 1e-12);
        }
        assert!((expected_cycle_count(3, 3, &params(2.0)) - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn expected_count_matches_enumeration() {
        for theta in [0.3, 1.0, 2.5] {
            let p = params(theta);
            let types = enumerate_cycle_types(8, &p).unwrap();
            for m in 1..=8 {
                let exact: f64 = types.iter().map(|t| t.pmf * t.counts.get(m) as f64).sum();
                assert!((exact - expected_cycle_count(m, 8, &p)).abs() < 1e-12, "theta {theta} m {m}");
            }
        }
    }

    #[test]
    fn enumeration_of_s3() {
        let types = enumerate_cycle_types(3, &EwensParams::uniform()).unwrap();
        let mut found: Vec<(Vec<u32>, u64)> = types.iter().map(|t| (t.counts.as_slice().to_vec(), t.permutations)).collect();
        found.sort();
        assert_eq!(found, vec![(vec![0, 0, 1], 2), (vec![1, 1, 0], 3), (vec![3, 0, 0], 1)]);
    }

    #[test]
    fn enumeration_counts_permutations() {
        let types = enumerate_cycle_types(5, &EwensParams::uniform()).unwrap();
        assert_eq!(types.iter().map(|t| t.permutations).sum::<u64>(), 120);
        let one = enumerate_cycle_types(1, &EwensParams::uniform()).unwrap();
        assert_eq!(one.len(), 1);
        assert!((one[0].pmf - 1.0).abs() < 1e-15);
        assert_eq!(enumerate_cycle_types(12, &EwensParams::uniform()).unwrap().len(), 77);
        assert!(matches!(enumerate_cycle_types(13, &EwensParams::uniform()), Err(Error::Refused(_))));
    }

    #[test]
    fn permutation_cycle_type() {
        // (0 1 2)(3 4)(5)
        let c = CycleCounts::from_permutation(&[1, 2, 0, 4, 3, 5]).unwrap();
        assert_eq!(c.as_slice(), &[1, 1, 1, 0, 0, 0]);
        assert!(CycleCounts::from_permutation(&[0, 0]).is_err());
        let canon = c.canonical_permutation();
        assert_eq!(CycleCounts::from_permutation(&canon).unwrap(), c);
    }

    #[test]
    fn coupling_bound_values() {
        let (b, case) = coupling_bound(100, 1, &EwensParams::uniform());
        assert!((b - 2.0 / 101.0).abs() < 1e-15);
        assert_eq!(case, CouplingBoundCase::LargeTheta);
        let (b, case) = coupling_bound(100, 50, &params(0.5));
        assert!((b - 0.75 / 50.5).abs() < 1e-15);
        assert_eq!(case, CouplingBoundCase::SmallTheta);
    }

    #[test]
    fn chi_square_perfect_fit() {
        let t = chi_square_gof(&[250, 250, 500], &[0.25, 0.25, 0.5]).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert!((t.p_value - 1.0).abs() < 1e-12);
        assert_eq!(t.dof, 2);
    }

    #[test]
    fn chi_square_pools_rare_bins() {
        let t = chi_square_gof(&[500, 497, 3, 0], &[0.5, 0.497, 0.002, 0.001]).unwrap();
        assert_eq!(t.bins, 2);
    }

    #[test]
    fn chi_square_detects_mismatch() {
        let t = chi_square_gof(&[700, 300], &[0.5, 0.5]).unwrap();
        assert!(t.p_value < 1e-10);
    }
}
