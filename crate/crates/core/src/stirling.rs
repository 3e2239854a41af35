//! Certified two-term Stirling expansion of hypergeometric point
//! probabilities.
//!
//! For `k` with `|a_kn| <= delta` (and `6 min(np, nq) >= 1`),
//!
//! ```text
//! log P(k) = -x_kn^2 / (2(1-f)) - 1/2 log(2 pi npq (1-f)) + r(k)
//! ```
//!
//! where `|r(k)|` is bounded by an explicit three-term expression. A
//! [`CertifiedProb`] carries the main term and the multiplicative enclosure
//! `[value e^-R, value e^R]` that provably contains the exact probability.

use serde::Serialize;

use crate::error::{Error, GateFailure, Result};
use crate::gaussian;
use crate::params::HypParams;

/// Default `delta`: the widest certified window.
pub const DEFAULT_DELTA: f64 = 0.5;

/// Relative slack applied once to the remainder bound, plus a few ulps of
/// absolute slack for the final `exp` and multiplications.
const REM_SLACK_REL: f64 = 1e-12;
const REM_SLACK_ABS: f64 = 8.0 * f64::EPSILON;

/// Standardized lattice coordinates of a support point `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Standardized {
    pub k: i64,
    /// `(k - np) / sqrt(npq)`.
    pub x_kn: f64,
    /// `x_kn / ((1-f) sqrt(npq))`.
    pub a_kn: f64,
    /// `(k - np) / sigma`.
    pub x_tilde: f64,
}

pub fn standardize(params: &HypParams, k: i64) -> Standardized {
    let pop = params.population() as f64;
    let diff = params.centered_numerator(k) as f64 / pop;
    let sqrt_npq = params.npq().sqrt();
    let one_minus_f = params.unsampled() as f64 / pop;
    let x_kn = diff / sqrt_npq;
    Standardized {
        k,
        x_kn,
        a_kn: x_kn / (one_minus_f * sqrt_npq),
        x_tilde: diff / params.sigma(),
    }
}

/// Bounds on the Stirling error `eps_m = log m! - [log sqrt(2pi) - m + (m+1/2) log m]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StirlingEps {
    pub m: u64,
    /// `1 / (12m + 1)`.
    pub lo: f64,
    /// `1 / (12m)`.
    pub hi: f64,
}

pub fn stirling_eps_bounds(m: u64) -> Result<StirlingEps> {
    if m == 0 {
        return Err(Error::InvalidArgument("Stirling bounds need m >= 1".into()));
    }
    let m12 = 12.0 * m as f64;
    Ok(StirlingEps {
        m,
        lo: 1.0 / (m12 + 1.0),
        hi: 1.0 / m12,
    })
}

/// Outcome of each applicability condition for the certified expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Applicability {
    pub fraction_ok: bool,
    pub proportion_ok: bool,
    pub min_count_ok: bool,
    pub standardized_ok: bool,
    pub support_ok: bool,
    pub a_kn: f64,
    pub delta: f64,
}

impl Applicability {
    pub fn all_pass(&self) -> bool {
        self.fraction_ok && self.proportion_ok && self.min_count_ok && self.standardized_ok && self.support_ok
    }
}

fn validate_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("delta must lie in (0, 1/2], got {delta}")))
    }
}

pub fn check_applicability(params: &HypParams, k: i64, delta: f64) -> Result<Applicability> {
    validate_delta(delta)?;
    let (f, p) = (params.f(), params.p());
    let np = params.mean();
    let nq = params.sample() as f64 - np;
    let a = standardize(params, k).a_kn;
    Ok(Applicability {
        fraction_ok: f > 0.0 && f < 1.0,
        proportion_ok: p > 0.0 && p < 1.0,
        min_count_ok: 6.0 * np.min(nq) >= 1.0,
        standardized_ok: a.abs() <= delta,
        support_ok: params.in_support(k),
        a_kn: a,
        delta,
    })
}

/// Three-term bound on `|r(k)|` for given `npq`, `f`, `a = a_kn` and `delta`.
pub fn remainder_bound(npq: f64, f: f64, a: f64, delta: f64) -> f64 {
    let a_abs = a.abs();
    let c = (1.0 - delta).powi(3);
    let lead = 1.0 / (6.0 * npq * (1.0 - delta) * (1.0 - f));
    let mid = 0.5 * a_abs + a * a * (0.25 + 2.0 * delta / c);
    let cubic = a_abs.powi(3) * npq * (f / 4.0 + 1.0) * (0.5 + 2.0 * (1.0 + delta) / c);
    lead + mid + cubic
}

/// Main term with a certified multiplicative enclosure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifiedProb {
    pub k: i64,
    /// `-x_kn^2/(2(1-f)) - 1/2 log(2 pi npq (1-f))`.
    pub log_main: f64,
    /// Upper bound on `|r(k)|`, including rounding slack.
    pub rem_bound: f64,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl CertifiedProb {
    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }
}

pub fn certified_pmf(params: &HypParams, k: i64, delta: f64) -> Result<CertifiedProb> {
    let gate = check_applicability(params, k, delta)?;
    if !gate.fraction_ok {
        return Err(GateFailure::SamplingFraction { f: params.f() }.into());
    }
    if !gate.proportion_ok {
        return Err(GateFailure::Proportion { p: params.p() }.into());
    }
    if !gate.min_count_ok {
        let np = params.mean();
        return Err(GateFailure::MinExpectedCount {
            value: 6.0 * np.min(params.sample() as f64 - np),
        }
        .into());
    }
    if !gate.support_ok {
        return Err(GateFailure::Support {
            k,
            lo: params.support_lo(),
            hi: params.support_hi(),
        }
        .into());
    }
    if !gate.standardized_ok {
        return Err(GateFailure::StandardizedRange { a: gate.a_kn, delta }.into());
    }

    let s = standardize(params, k);
    let npq = params.npq();
    let f = params.f();
    let one_minus_f = params.unsampled() as f64 / params.population() as f64;
    let log_main = -s.x_kn * s.x_kn / (2.0 * one_minus_f)
        - 0.5 * (2.0 * std::f64::consts::PI * npq * one_minus_f).ln();
    let rem_bound = remainder_bound(npq, f, s.a_kn, delta) * (1.0 + REM_SLACK_REL) + REM_SLACK_ABS;
    let value = log_main.exp();
    Ok(CertifiedProb {
        k,
        log_main,
        rem_bound,
        value,
        lo: (log_main - rem_bound).exp(),
        hi: (log_main + rem_bound).exp(),
    })
}

/// `phi(x_tilde) / sigma`, the same main term written through `sigma`.
pub fn gaussian_main_term(params: &HypParams, k: i64) -> f64 {
    gaussian::phi(params.standardized(k)) / params.sigma()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact;
    use num_rational::BigRational;

    fn hp(n: u64, m: u64, pop: u64) -> HypParams {
        HypParams::new(n, m, pop).unwrap()
    }

    #[test]
    fn standardize_examples() {
        let s = standardize(&hp(100, 100, 200), 55);
        assert!((s.x_kn - 1.0).abs() < 1e-15);
        assert!((s.a_kn - 0.4).abs() < 1e-15);
        assert!((s.x_tilde - 2f64.sqrt()).abs() < 1e-15);

        let s = standardize(&hp(100, 100, 200), 50);
        assert_eq!((s.x_kn, s.a_kn, s.x_tilde), (0.0, 0.0, 0.0));

        let s = standardize(&hp(2, 2, 4), 2);
        assert!((s.x_kn - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.x_tilde - 2.0).abs() < 1e-15);
    }

    #[test]
    fn standardize_identities() {
        for h in [hp(37, 912, 1999), hp(5, 3, 11), hp(400, 80, 1000)] {
            let one_minus_f = 1.0 - h.f();
            for k in h.support() {
                let s = standardize(&h, k as i64);
                let via = s.x_kn / one_minus_f.sqrt();
                assert!((s.x_tilde - via).abs() <= 1e-14 * s.x_tilde.abs().max(1e-300));
                let back = s.a_kn * one_minus_f * h.npq().sqrt();
                assert!((back - s.x_kn).abs() <= 1e-14 * s.x_kn.abs().max(1e-300));
                assert!((s.x_tilde * h.sigma() + h.mean() - k as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn stirling_bounds() {
        let e = stirling_eps_bounds(1).unwrap();
        assert_eq!((e.lo, e.hi), (1.0 / 13.0, 1.0 / 12.0));
        let true_eps1 = 1.0 - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!(e.lo < true_eps1 && true_eps1 < e.hi);
        let e = stirling_eps_bounds(2).unwrap();
        assert_eq!((e.lo, e.hi), (1.0 / 25.0, 1.0 / 24.0));
        assert!(e.lo < 0.0413406959554 && 0.0413406959554 < e.hi);
        assert!(stirling_eps_bounds(1_000_000).unwrap().hi < 1e-7);
        assert!(stirling_eps_bounds(0).is_err());
    }

    #[test]
    fn applicability_examples() {
        let h = hp(100, 100, 200);
        assert!(check_applicability(&h, 55, 0.5).unwrap().all_pass());
        let g = check_applicability(&h, 80, 0.5).unwrap();
        assert!(!g.standardized_ok && g.support_ok && g.min_count_ok);
        assert!((g.a_kn - 2.4).abs() < 1e-14);
        assert!(check_applicability(&hp(2, 1, 4), 1, 0.5).unwrap().min_count_ok);
        assert!(check_applicability(&h, 50, 0.0).is_err());
        assert!(check_applicability(&h, 50, 0.6).is_err());
    }

    #[test]
    fn certified_center_value() {
        let h = hp(100, 100, 200);
        let c = certified_pmf(&h, 50, 0.5).unwrap();
        assert!((c.rem_bound - 2.0 / 75.0).abs() < 1e-13);
        assert!((c.value - 0.1128379167095513).abs() < 1e-15);
        let exact = exact::pmf_exact(&h, 50);
        let e = exact.to_f64();
        assert!((e - 0.11241557570404212).abs() < 1e-15);
        assert!(c.contains(e));
        // exact rational comparison against the float endpoints
        let r = exact.as_rational().unwrap();
        assert!(&BigRational::from_float(c.lo).unwrap() <= r);
        assert!(r <= &BigRational::from_float(c.hi).unwrap());
        assert!(certified_pmf(&h, 55, 0.5).unwrap().contains(exact::pmf_exact(&h, 55).to_f64()));
    }

    #[test]
    fn refusals_name_the_gate() {
        let h = hp(100, 100, 200);
        match certified_pmf(&h, 80, 0.5) {
            Err(Error::Gate(GateFailure::StandardizedRange { .. })) => {}
            other => panic!("unexpected {other:?}"),
        }
        match certified_pmf(&hp(2, 1, 400), 0, 0.5) {
            Err(Error::Gate(GateFailure::MinExpectedCount { .. })) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn main_term_identity() {
        let h = hp(100, 100, 200);
        assert!((gaussian_main_term(&h, 50) - 0.112838).abs() < 1e-6);
        assert!((gaussian_main_term(&hp(2, 2, 4), 1) - 0.797885).abs() < 1e-6);
        for h in [hp(100, 100, 200), hp(300, 70, 1000), hp(60, 500, 2000)] {
            for k in h.support() {
                let k = k as i64;
                let log_main = {
                    let s = standardize(&h, k);
                    let omf = 1.0 - h.f();
                    -s.x_kn * s.x_kn / (2.0 * omf) - 0.5 * (2.0 * std::f64::consts::PI * h.npq() * omf).ln()
                };
                let g = gaussian_main_term(&h, k);
                let tol = if h.standardized(k).abs() <= 4.0 { 1e-14 } else { 1e-12 };
                if g > 1e-290 {
                    assert!(((log_main.exp() - g) / g).abs() < tol, "{h} k={k}");
                }
            }
        }
    }

    #[test]
    fn remainder_monotone_in_a() {
        let mut prev = 0.0;
        for i in 0..=100 {
            let a = i as f64 * 0.005;
            let r = remainder_bound(25.0, 0.3, a, 0.5);
            assert!(r >= prev);
            assert_eq!(r, remainder_bound(25.0, 0.3, -a, 0.5));
            prev = r;
        }
    }
}
