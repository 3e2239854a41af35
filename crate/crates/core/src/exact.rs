//! Exact ground truth for `Hyp(n; M, N)`.
//!
//! Two backends share one interface:
//!
//! * **rational**: arbitrary-precision integer weights `C(M,k) C(N-M,n-k)`
//!   over `C(N,n)`; used whenever `N <= RATIONAL_MAX_POPULATION`. Every
//!   probability is an exact reduced fraction.
//! * **log-space**: log-weights from the ratio recurrence
//!   `P(k+1)/P(k) = (M-k)(n-k) / ((k+1)(N-M-n+k+1))`, anchored at the mode and
//!   normalized by a compensated sum. Each ratio is evaluated as
//!   `ln_1p((num - den) / den)` with `num - den` exact in `i128`, so the
//!   accumulated error stays near `1e-13` relative for populations up to 4e9.
//!
//! Points outside the support have probability exactly zero; they are not
//! errors.

use std::fmt;
use std::ops::RangeInclusive;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::params::HypParams;

/// Populations at or below this size use the exact rational backend.
pub const RATIONAL_MAX_POPULATION: u64 = 5000;

/// Log-weights more than this far below the mode are not tabulated.
const LOG_WINDOW: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Rational,
    #[serde(rename = "logspace")]
    LogSpace,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Rational => "rational",
            Backend::LogSpace => "logspace",
        })
    }
}

/// A probability: an exact fraction, or the natural log of a float value.
#[derive(Debug, Clone, PartialEq)]
pub enum ExactProb {
    Rational(BigRational),
    /// Natural log of the probability; `-inf` is an exact zero.
    LogSpace(f64),
}

impl ExactProb {
    pub fn backend(&self) -> Backend {
        match self {
            ExactProb::Rational(_) => Backend::Rational,
            ExactProb::LogSpace(_) => Backend::LogSpace,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ExactProb::Rational(r) => ratio_to_f64(r.numer(), r.denom()),
            ExactProb::LogSpace(l) => l.exp(),
        }
    }

    /// Natural log of the probability.
    pub fn ln(&self) -> f64 {
        match self {
            ExactProb::Rational(r) => {
                if r.is_zero() {
                    f64::NEG_INFINITY
                } else {
                    ratio_ln(r.numer(), r.denom())
                }
            }
            ExactProb::LogSpace(l) => *l,
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            ExactProb::Rational(r) => Some(r),
            ExactProb::LogSpace(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ExactProb::Rational(r) => r.is_zero(),
            ExactProb::LogSpace(l) => *l == f64::NEG_INFINITY,
        }
    }
}

impl fmt::Display for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExactProb::Rational(r) => write!(f, "{r}"),
            ExactProb::LogSpace(_) => f.write_str(&crate::fmt::sig12(self.to_f64())),
        }
    }
}

/// `a/b` rounded to the nearest `f64`, for big integers of any size.
pub(crate) fn ratio_to_f64(a: &BigInt, b: &BigInt) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    let negative = (a.sign() == num_bigint::Sign::Minus) != (b.sign() == num_bigint::Sign::Minus);
    let (a, b) = (a.magnitude(), b.magnitude());
    // scale so the quotient carries 66 bits, then fold the remainder into a
    // sticky bit so the final conversion rounds once
    let shift = b.bits() as i64 - a.bits() as i64 + 66;
    let (q, r) = if shift >= 0 {
        let a = a << shift as u64;
        (&a / b, &a % b)
    } else {
        let b = b << (-shift) as u64;
        (a / &b, a % &b)
    };
    let q = if r.is_zero() { q } else { q | num_bigint::BigUint::one() };
    let mut v = q.to_f64().unwrap_or(f64::NAN);
    let mut e = -shift;
    while e > 0 {
        let step = e.min(1000);
        v *= 2f64.powi(step as i32);
        e -= step;
    }
    while e < 0 {
        let step = (-e).min(1000);
        v *= 2f64.powi(-(step as i32));
        e += step;
    }
    if negative {
        -v
    } else {
        v
    }
}

/// `ln(a/b)` for big positive integers without overflowing `f64`.
fn ratio_ln(a: &BigInt, b: &BigInt) -> f64 {
    fn split(x: &BigInt) -> (f64, f64) {
        // x = mant * 2^shift with mant in f64 range
        let bits = x.bits();
        let shift = bits.saturating_sub(900);
        let mant = (x >> shift).to_f64().unwrap_or(f64::NAN);
        (mant, shift as f64)
    }
    let (ma, sa) = split(a);
    let (mb, sb) = split(b);
    (ma / mb).ln() + (sa - sb) * std::f64::consts::LN_2
}

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `ln(P(j+1) / P(j))` for `j` in `[lo, hi-1]` of the support.
pub(crate) fn log_ratio(params: &HypParams, j: u64) -> f64 {
    let m = params.marked() as i128;
    let n = params.sample() as i128;
    let b = params.unmarked() as i128;
    let j = j as i128;
    let num = (m - j) * (n - j);
    let den = (j + 1) * (b - n + j + 1);
    ((num - den) as f64 / den as f64).ln_1p()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Exact integer weights over the full support.
#[derive(Debug, Clone)]
pub struct RationalTable {
    params: HypParams,
    lo: u64,
    weights: Vec<BigInt>,
    prefix: Vec<BigInt>,
    total: BigInt,
}

impl RationalTable {
    pub fn new(params: &HypParams) -> Self {
        let (lo, hi) = (params.support_lo(), params.support_hi());
        let (m, n, b) = (params.marked(), params.sample(), params.unmarked());
        let mut weights = Vec::with_capacity((hi - lo + 1) as usize);
        let mut w = binomial(m, lo) * binomial(b, n - lo);
        weights.push(w.clone());
        for k in lo..hi {
            w = w * ((m - k) * (n - k)) / ((k + 1) * (b + k + 1 - n));
            weights.push(w.clone());
        }
        let mut prefix = Vec::with_capacity(weights.len());
        let mut acc = BigInt::zero();
        for w in &weights {
            acc += w;
            prefix.push(acc.clone());
        }
        debug_assert_eq!(acc, binomial(params.population(), n));
        RationalTable {
            params: *params,
            lo,
            weights,
            prefix,
            total: acc,
        }
    }

    fn index(&self, k: i64) -> Option<usize> {
        self.params.in_support(k).then(|| (k as u64 - self.lo) as usize)
    }

    pub fn pmf(&self, k: i64) -> BigRational {
        match self.index(k) {
            Some(i) => BigRational::new(self.weights[i].clone(), self.total.clone()),
            None => BigRational::zero(),
        }
    }

    /// `P(X <= k)` as the unreduced pair (numerator, denominator).
    fn cdf_raw(&self, k: i64) -> BigInt {
        if k < self.lo as i64 {
            BigInt::zero()
        } else if k >= self.params.support_hi() as i64 {
            self.total.clone()
        } else {
            self.prefix[(k as u64 - self.lo) as usize].clone()
        }
    }

    pub fn cdf(&self, k: i64) -> BigRational {
        BigRational::new(self.cdf_raw(k), self.total.clone())
    }

    pub fn sf(&self, k: i64) -> BigRational {
        BigRational::new(&self.total - self.cdf_raw(k), self.total.clone())
    }

    pub fn cdf_f64(&self, k: i64) -> f64 {
        ratio_to_f64(&self.cdf_raw(k), &self.total)
    }

    pub fn sf_f64(&self, k: i64) -> f64 {
        ratio_to_f64(&(&self.total - self.cdf_raw(k)), &self.total)
    }

    pub fn pmf_f64(&self, k: i64) -> f64 {
        match self.index(k) {
            Some(i) => ratio_to_f64(&self.weights[i], &self.total),
            None => 0.0,
        }
    }

    /// Unnormalized integer weights `C(M,k) C(N-M,n-k)` over the support.
    pub fn weights(&self) -> &[BigInt] {
        &self.weights
    }

    /// `C(N, n)`.
    pub fn total(&self) -> &BigInt {
        &self.total
    }
}

/// `ln(sum_j w_j / w_k)` over `j >= k` (`upward`) or `j <= k`, walking the
/// ratio recurrence away from the mode until terms stop mattering.
fn outer_mass_ln(params: &HypParams, k: u64, upward: bool) -> f64 {
    let (mut acc, mut t) = (CompensatedSum::default(), 1.0);
    acc.add(1.0);
    let mut j = k;
    loop {
        if upward {
            if j >= params.support_hi() {
                break;
            }
            t *= log_ratio(params, j).exp();
            j += 1;
        } else {
            if j <= params.support_lo() {
                break;
            }
            t *= (-log_ratio(params, j - 1)).exp();
            j -= 1;
        }
        acc.add(t);
        if t < 1e-18 * acc.value() {
            break;
        }
    }
    acc.value().ln()
}

/// Mode-anchored log-weights over the numerically relevant window.
#[derive(Debug, Clone)]
pub struct LogTable {
    params: HypParams,
    mode: u64,
    lo: u64,
    log_w: Vec<f64>,
    below: Vec<f64>,
    above: Vec<f64>,
    total: f64,
    ln_total: f64,
}

impl LogTable {
    pub fn new(params: &HypParams) -> Self {
        let (slo, shi) = (params.support_lo(), params.support_hi());
        let mode = mode(params);

        let mut left = Vec::new();
        let mut lw = 0.0;
        for j in (slo..mode).rev() {
            lw -= log_ratio(params, j);
            if lw < -LOG_WINDOW {
                break;
            }
            left.push(lw);
        }
        let mut right = Vec::new();
        let mut lw = 0.0;
        for j in mode..shi {
            lw += log_ratio(params, j);
            if lw < -LOG_WINDOW {
                break;
            }
            right.push(lw);
        }
        let lo = mode - left.len() as u64;
        let mut log_w: Vec<f64> = left.into_iter().rev().collect();
        log_w.push(0.0);
        log_w.extend(right);

        let hi = lo + log_w.len() as u64 - 1;
        let left_extra = if lo > slo {
            let lw = log_w[0] - log_ratio(params, lo - 1);
            (lw + outer_mass_ln(params, lo - 1, false)).exp()
        } else {
            0.0
        };
        let right_extra = if hi < shi {
            let lw = log_w[log_w.len() - 1] + log_ratio(params, hi);
            (lw + outer_mass_ln(params, hi + 1, true)).exp()
        } else {
            0.0
        };

        let lin: Vec<f64> = log_w.iter().map(|l| l.exp()).collect();
        let mut below = Vec::with_capacity(lin.len());
        let mut acc = CompensatedSum::default();
        acc.add(left_extra);
        for w in &lin {
            acc.add(*w);
            below.push(acc.value());
        }
        acc.add(right_extra);
        let total = acc.value();
        let mut above = vec![0.0; lin.len()];
        let mut acc = CompensatedSum::default();
        acc.add(right_extra);
        for (i, w) in lin.iter().enumerate().rev() {
            acc.add(*w);
            above[i] = acc.value();
        }

        LogTable {
            params: *params,
            mode,
            lo,
            log_w,
            below,
            above,
            total,
            ln_total: total.ln(),
        }
    }

    fn hi(&self) -> u64 {
        self.lo + self.log_w.len() as u64 - 1
    }

    /// Tabulated range of the support.
    pub fn window(&self) -> RangeInclusive<u64> {
        self.lo..=self.hi()
    }

    /// Unnormalized log-weight, extending the recurrence past the window.
    fn log_weight(&self, k: u64) -> f64 {
        if k < self.lo {
            let mut lw = self.log_w[0];
            for j in (k..self.lo).rev() {
                lw -= log_ratio(&self.params, j);
            }
            lw
        } else if k > self.hi() {
            let mut lw = *self.log_w.last().unwrap();
            for j in self.hi()..k {
                lw += log_ratio(&self.params, j);
            }
            lw
        } else {
            self.log_w[(k - self.lo) as usize]
        }
    }

    /// `ln sum_{j <= k} w_j` for `k` in the support.
    fn left_mass_ln(&self, k: u64) -> f64 {
        if k >= self.lo {
            return self.below[(k - self.lo) as usize].ln();
        }
        self.log_weight(k) + outer_mass_ln(&self.params, k, false)
    }

    /// `ln sum_{j >= k} w_j` for `k` in the support.
    fn right_mass_ln(&self, k: u64) -> f64 {
        if k <= self.hi() {
            return self.above[(k - self.lo) as usize].ln();
        }
        self.log_weight(k) + outer_mass_ln(&self.params, k, true)
    }

    pub fn pmf_ln(&self, k: i64) -> f64 {
        if !self.params.in_support(k) {
            return f64::NEG_INFINITY;
        }
        self.log_weight(k as u64) - self.ln_total
    }

    pub fn cdf_ln(&self, k: i64) -> f64 {
        let (slo, shi) = (self.params.support_lo() as i64, self.params.support_hi() as i64);
        if k < slo {
            f64::NEG_INFINITY
        } else if k >= shi {
            0.0
        } else if (k as u64) < self.mode {
            self.left_mass_ln(k as u64) - self.ln_total
        } else {
            (-self.sf_f64(k)).ln_1p()
        }
    }

    pub fn sf_ln(&self, k: i64) -> f64 {
        let (slo, shi) = (self.params.support_lo() as i64, self.params.support_hi() as i64);
        if k >= shi {
            f64::NEG_INFINITY
        } else if k < slo {
            0.0
        } else if (k as u64) >= self.mode {
            self.right_mass_ln(k as u64 + 1) - self.ln_total
        } else {
            (-self.cdf_f64(k)).ln_1p()
        }
    }

    /// `P(X <= k)`, summing whichever tail is smaller.
    pub fn cdf_f64(&self, k: i64) -> f64 {
        let (slo, shi) = (self.params.support_lo() as i64, self.params.support_hi() as i64);
        if k < slo {
            0.0
        } else if k >= shi {
            1.0
        } else if (k as u64) < self.mode {
            if (k as u64) >= self.lo {
                self.below[(k as u64 - self.lo) as usize] / self.total
            } else {
                (self.left_mass_ln(k as u64) - self.ln_total).exp()
            }
        } else {
            1.0 - self.sf_f64(k)
        }
    }

    /// `P(X > k)`, summing whichever tail is smaller.
    pub fn sf_f64(&self, k: i64) -> f64 {
        let (slo, shi) = (self.params.support_lo() as i64, self.params.support_hi() as i64);
        if k >= shi {
            0.0
        } else if k < slo {
            1.0
        } else if (k as u64) >= self.mode {
            let j = k as u64 + 1;
            if j <= self.hi() {
                self.above[(j - self.lo) as usize] / self.total
            } else {
                (self.right_mass_ln(j) - self.ln_total).exp()
            }
        } else {
            1.0 - self.cdf_f64(k)
        }
    }
}

/// A tabulated distribution on whichever backend fits the population.
#[derive(Debug, Clone)]
pub enum Distribution {
    Rational(RationalTable),
    LogSpace(LogTable),
}

impl Distribution {
    /// Rational backend when `N <= RATIONAL_MAX_POPULATION`, log-space above.
    pub fn new(params: &HypParams) -> Self {
        if params.population() <= RATIONAL_MAX_POPULATION {
            Distribution::Rational(RationalTable::new(params))
        } else {
            Distribution::LogSpace(LogTable::new(params))
        }
    }

    pub fn log_space(params: &HypParams) -> Self {
        Distribution::LogSpace(LogTable::new(params))
    }

    pub fn rational(params: &HypParams) -> Self {
        Distribution::Rational(RationalTable::new(params))
    }

    pub fn params(&self) -> &HypParams {
        match self {
            Distribution::Rational(t) => &t.params,
            Distribution::LogSpace(t) => &t.params,
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            Distribution::Rational(_) => Backend::Rational,
            Distribution::LogSpace(_) => Backend::LogSpace,
        }
    }

    /// Support points carrying non-negligible mass (the whole support for
    /// the rational backend).
    pub fn window(&self) -> RangeInclusive<u64> {
        match self {
            Distribution::Rational(t) => t.params.support(),
            Distribution::LogSpace(t) => t.window(),
        }
    }

    pub fn pmf(&self, k: i64) -> ExactProb {
        match self {
            Distribution::Rational(t) => ExactProb::Rational(t.pmf(k)),
            Distribution::LogSpace(t) => ExactProb::LogSpace(t.pmf_ln(k)),
        }
    }

    pub fn cdf(&self, k: i64) -> ExactProb {
        match self {
            Distribution::Rational(t) => ExactProb::Rational(t.cdf(k)),
            Distribution::LogSpace(t) => ExactProb::LogSpace(t.cdf_ln(k)),
        }
    }

    pub fn sf(&self, k: i64) -> ExactProb {
        match self {
            Distribution::Rational(t) => ExactProb::Rational(t.sf(k)),
            Distribution::LogSpace(t) => ExactProb::LogSpace(t.sf_ln(k)),
        }
    }

    pub fn pmf_f64(&self, k: i64) -> f64 {
        match self {
            Distribution::Rational(t) => t.pmf_f64(k),
            Distribution::LogSpace(t) => t.pmf_ln(k).exp(),
        }
    }

    pub fn cdf_f64(&self, k: i64) -> f64 {
        match self {
            Distribution::Rational(t) => t.cdf_f64(k),
            Distribution::LogSpace(t) => t.cdf_f64(k),
        }
    }

    pub fn sf_f64(&self, k: i64) -> f64 {
        match self {
            Distribution::Rational(t) => t.sf_f64(k),
            Distribution::LogSpace(t) => t.sf_f64(k),
        }
    }
}

pub fn pmf_exact(params: &HypParams, k: i64) -> ExactProb {
    if !params.in_support(k) {
        return Distribution::zero_for(params);
    }
    Distribution::new(params).pmf(k)
}

pub fn cdf_exact(params: &HypParams, k: i64) -> ExactProb {
    Distribution::new(params).cdf(k)
}

/// `P(X > k) = 1 - cdf_exact(k)`.
pub fn sf_exact(params: &HypParams, k: i64) -> ExactProb {
    Distribution::new(params).sf(k)
}

impl Distribution {
    fn zero_for(params: &HypParams) -> ExactProb {
        if params.population() <= RATIONAL_MAX_POPULATION {
            ExactProb::Rational(BigRational::zero())
        } else {
            ExactProb::LogSpace(f64::NEG_INFINITY)
        }
    }
}

/// Mean, variance and `sigma^2` as exact fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: BigRational,
    pub variance: BigRational,
    /// `N p q f (1-f) = (N-1)/N * Var(X)`.
    pub sigma2: BigRational,
}

impl Moments {
    pub fn mean_f64(&self) -> f64 {
        ratio_to_f64(self.mean.numer(), self.mean.denom())
    }
    pub fn variance_f64(&self) -> f64 {
        ratio_to_f64(self.variance.numer(), self.variance.denom())
    }
    pub fn sigma2_f64(&self) -> f64 {
        ratio_to_f64(self.sigma2.numer(), self.sigma2.denom())
    }
}

pub fn moments(params: &HypParams) -> Moments {
    let n = BigInt::from(params.sample());
    let m = BigInt::from(params.marked());
    let pop = BigInt::from(params.population());
    let mean = BigRational::new(&n * &m, pop.clone());
    let sigma2 = BigRational::new(
        &n * &m * BigInt::from(params.unmarked()) * BigInt::from(params.unsampled()),
        pop.pow(3),
    );
    let variance = &sigma2 * BigRational::new(pop.clone(), pop - 1);
    Moments {
        mean,
        variance,
        sigma2,
    }
}

/// Exact threshold `t = (M+1)(n+1)/(N+2) - 1`: `P(j+1) > P(j)` iff `j < t`,
/// with equality exactly at `j = t`.
pub fn mode_threshold(params: &HypParams) -> BigRational {
    let num = BigInt::from(params.marked() + 1) * BigInt::from(params.sample() + 1);
    let den = BigInt::from(params.population() + 2);
    BigRational::new(num, den) - BigRational::one()
}

/// Smallest maximizer of the pmf.
pub fn mode(params: &HypParams) -> u64 {
    let num = (params.marked() as i128 + 1) * (params.sample() as i128 + 1)
        - (params.population() as i128 + 2);
    let den = params.population() as i128 + 2;
    let ceil = num.div_euclid(den) + i128::from(num.rem_euclid(den) != 0);
    ceil.clamp(params.support_lo() as i128, params.support_hi() as i128) as u64
}

/// Parameters of the leftover count `Y = M - X ~ Hyp(N-n; M, N)`.
pub fn dual_leftover(params: &HypParams) -> HypParams {
    HypParams::new(params.unsampled(), params.marked(), params.population())
        .expect("leftover parameters inherit validity")
}

/// Parameters of the complement count `V = n - X ~ Hyp(n; N-M, N)`.
pub fn dual_reflect(params: &HypParams) -> HypParams {
    HypParams::new(params.sample(), params.unmarked(), params.population())
        .expect("reflected parameters inherit validity")
}
