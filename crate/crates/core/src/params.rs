use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported population. Keeps `n*M*(N-M)*(N-n)` inside `u128`.
pub const MAX_POPULATION: u64 = 4_000_000_000;

/// Parameters of `Hyp(n; M, N)`: a sample of `n` drawn without replacement
/// from `N` objects of which `M` are of type A.
///
/// Construction enforces `1 <= M < N` and `1 <= n < N`, so `p`, `q` and `f`
/// are all strictly inside `(0, 1)` and `sigma2 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HypParams {
    n: u64,
    #[serde(rename = "M")]
    m: u64,
    #[serde(rename = "N")]
    pop: u64,
}

impl HypParams {
    pub fn new(n: u64, m: u64, pop: u64) -> Result<Self> {
        let bad = |reason| Err(Error::InvalidParams { n, m, pop, reason });
        if pop > MAX_POPULATION {
            return bad("population exceeds the supported maximum of 4e9");
        }
        if m < 1 || m >= pop {
            return bad("need 1 <= M < N");
        }
        if n < 1 || n >= pop {
            return bad("need 1 <= n < N");
        }
        Ok(HypParams { n, m, pop })
    }

    /// Sample size `n`.
    pub fn sample(&self) -> u64 {
        self.n
    }

    /// Number of type-A objects `M`.
    pub fn marked(&self) -> u64 {
        self.m
    }

    /// Population size `N`.
    pub fn population(&self) -> u64 {
        self.pop
    }

    /// Number of type-B objects `N - M`.
    pub fn unmarked(&self) -> u64 {
        self.pop - self.m
    }

    /// Objects left unsampled, `N - n`.
    pub fn unsampled(&self) -> u64 {
        self.pop - self.n
    }

    pub fn p(&self) -> f64 {
        self.m as f64 / self.pop as f64
    }

    pub fn q(&self) -> f64 {
        self.unmarked() as f64 / self.pop as f64
    }

    pub fn f(&self) -> f64 {
        self.n as f64 / self.pop as f64
    }

    /// `n * p`, computed as `(n*M)/N` so it is symmetric in `n <-> M`.
    pub fn mean(&self) -> f64 {
        (self.n as u128 * self.m as u128) as f64 / self.pop as f64
    }

    /// `n p q`.
    pub fn npq(&self) -> f64 {
        let num = self.n as u128 * self.m as u128 * self.unmarked() as u128;
        num as f64 / (self.pop as f64 * self.pop as f64)
    }

    /// `sigma^2 = N p q f (1-f) = n M (N-M) (N-n) / N^3`.
    ///
    /// The integer numerator is exact, so the value is bit-identical under
    /// the symmetries `n <-> M`, `M <-> N-M` and `n <-> N-n`.
    pub fn sigma2(&self) -> f64 {
        let num = self.n as u128 * self.m as u128 * self.unmarked() as u128 * self.unsampled() as u128;
        let pop = self.pop as f64;
        num as f64 / (pop * pop * pop)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2().sqrt()
    }

    pub fn support_lo(&self) -> u64 {
        self.n.saturating_sub(self.unmarked())
    }

    pub fn support_hi(&self) -> u64 {
        self.n.min(self.m)
    }

    pub fn support(&self) -> RangeInclusive<u64> {
        self.support_lo()..=self.support_hi()
    }

    pub fn in_support(&self, k: i64) -> bool {
        k >= 0 && (k as u64) >= self.support_lo() && (k as u64) <= self.support_hi()
    }

    /// `k*N - n*M`, the exact numerator of `k - np` over `N`.
    pub(crate) fn centered_numerator(&self, k: i64) -> i128 {
        k as i128 * self.pop as i128 - self.n as i128 * self.m as i128
    }

    /// Lattice coordinate `(k - np) / sigma`.
    pub fn standardized(&self, k: i64) -> f64 {
        self.centered_numerator(k) as f64 / (self.pop as f64 * self.sigma())
    }
}

impl fmt::Display for HypParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hyp(n={}, M={}, N={})", self.n, self.m, self.pop)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_trivial_parameters() {
        assert!(HypParams::new(0, 2, 4).is_err());
        assert!(HypParams::new(4, 2, 4).is_err());
        assert!(HypParams::new(2, 0, 4).is_err());
        assert!(HypParams::new(2, 4, 4).is_err());
        assert!(HypParams::new(1, 1, 2).is_ok());
        assert!(HypParams::new(1, 1, MAX_POPULATION + 1).is_err());
    }

    #[test]
    fn derived_quantities() {
        let h = HypParams::new(100, 100, 200).unwrap();
        assert_eq!(h.sigma2(), 12.5);
        assert_eq!(h.npq(), 25.0);
        assert_eq!(h.mean(), 50.0);
        assert_eq!(h.support(), 0..=100);

        let h = HypParams::new(2, 2, 4).unwrap();
        assert_eq!(h.sigma(), 0.5);
        assert_eq!(h.standardized(2), 2.0);
        assert_eq!(h.standardized(1), 0.0);
    }

    #[test]
    fn support_bounds() {
        let h = HypParams::new(8, 7, 10).unwrap();
        assert_eq!(h.support(), 5..=7);
        assert!(!h.in_support(4));
        assert!(h.in_support(5));
        assert!(!h.in_support(-1));
    }

    #[test]
    fn sigma2_symmetries_are_bitwise() {
        let a = HypParams::new(37, 912, 1999).unwrap();
        let b = HypParams::new(912, 37, 1999).unwrap();
        let c = HypParams::new(37, 1999 - 912, 1999).unwrap();
        let d = HypParams::new(1999 - 37, 912, 1999).unwrap();
        assert_eq!(a.sigma2().to_bits(), b.sigma2().to_bits());
        assert_eq!(a.sigma2().to_bits(), c.sigma2().to_bits());
        assert_eq!(a.sigma2().to_bits(), d.sigma2().to_bits());
    }
}
