//! Stirling remainder `eps_m = ln m! - ln sqrt(2 pi) + m - (m + 1/2) ln m`
//! in 256-bit floating point, checked against `1/(12m+1) <= eps_m <= 1/(12m)`.

use astro_float::{BigFloat, Consts, RoundingMode};
use serde::Serialize;

use crate::error::{Error, Result};

const PRECISION: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub m_max: u64,
    pub violations: Vec<u64>,
    /// `eps_m` rounded to `f64`, for `m = 1..=m_max`.
    pub eps: Vec<f64>,
}

impl SandwichReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

fn to_f64(x: &BigFloat) -> f64 {
    // decimal rendering carries far more digits than f64 needs
    x.to_string().parse().unwrap_or(f64::NAN)
}

pub fn stirling_sandwich(m_max: u64) -> Result<SandwichReport> {
    if m_max == 0 {
        return Err(Error::InvalidArgument("m_max must be at least 1".into()));
    }
    let mut cc = Consts::new().map_err(|e| Error::InvalidArgument(format!("astro-float: {e:?}")))?;
    let p = PRECISION;
    let half = BigFloat::from_f64(0.5, p);
    let two = BigFloat::from_u64(2, p);
    let half_ln_2pi = cc.pi(p, RM).mul(&two, p, RM).ln(p, RM, &mut cc).mul(&half, p, RM);

    let mut ln_fact = BigFloat::from_u64(0, p);
    let mut violations = Vec::new();
    let mut eps = Vec::with_capacity(m_max as usize);
    for m in 1..=m_max {
        let bm = BigFloat::from_u64(m, p);
        let ln_m = bm.ln(p, RM, &mut cc);
        ln_fact = ln_fact.add(&ln_m, p, RM);
        let e = ln_fact
            .sub(&half_ln_2pi, p, RM)
            .add(&bm, p, RM)
            .sub(&bm.add(&half, p, RM).mul(&ln_m, p, RM), p, RM);
        let one = BigFloat::from_u64(1, p);
        let lo = one.div(&BigFloat::from_u64(12 * m + 1, p), p, RM);
        let hi = one.div(&BigFloat::from_u64(12 * m, p), p, RM);
        let inside = matches!(e.cmp(&lo), Some(c) if c >= 0) && matches!(e.cmp(&hi), Some(c) if c <= 0);
        if !inside {
            violations.push(m);
        }
        eps.push(to_f64(&e));
    }
    Ok(SandwichReport {
        m_max,
        violations,
        eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_terms() {
        let r = stirling_sandwich(3).unwrap();
        assert!(r.passes());
        assert!((r.eps[0] - 0.0810614667953272582196702635944).abs() < 1e-16);
        assert!((r.eps[1] - 0.0413406959554092940938220814072).abs() < 1e-16);
        assert!(r.eps[0] > 1.0 / 13.0 && r.eps[0] < 1.0 / 12.0);
    }

    #[test]
    fn matches_f64_identity() {
        let r = stirling_sandwich(50).unwrap();
        for (i, e) in r.eps.iter().enumerate() {
            let s = crate::stirling::stirling_eps_bounds(i as u64 + 1).unwrap();
            assert!(*e >= s.lo && *e <= s.hi);
        }
        assert!(stirling_sandwich(0).is_err());
    }
}
