//! Exact Kolmogorov distance by lattice enumeration.
//!
//! `F` is a right-continuous step function with jumps at the standardized
//! lattice points `x_k`, and `Phi` is continuous and increasing, so
//! `sup_x |F(x) - Phi(x)|` is the largest of `|F(k) - Phi(x_k)|` (at the
//! point) and `|F(k-1) - Phi(x_k)|` (the left limit) over the support.
//!
//! Deviations are formed from whichever tail is small: `F - Phi` left of the
//! mean and `(1 - Phi) - (1 - F)` right of it, so far-tail values keep their
//! relative accuracy.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{Backend, Distribution};
use crate::gaussian::{normal_cdf, normal_sf};
use crate::params::HypParams;

/// Absolute error budget of the log-space backend.
pub const LOG_SPACE_BUDGET: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    LeftLimit,
    AtPoint,
}

/// Signed deviations at one lattice jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpDeviation {
    pub k: u64,
    pub x: f64,
    /// `F(k) - Phi(x_k)`.
    pub at_point: f64,
    /// `F(k-1) - Phi(x_k)`.
    pub left_limit: f64,
}

impl JumpDeviation {
    pub fn worst(&self) -> (f64, Side) {
        if self.left_limit.abs() > self.at_point.abs() {
            (self.left_limit.abs(), Side::LeftLimit)
        } else {
            (self.at_point.abs(), Side::AtPoint)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaReport {
    pub params: HypParams,
    pub backend: Backend,
    pub sigma: f64,
    pub delta_sup: f64,
    pub argmax_k: u64,
    pub side: Side,
    pub delta_times_sigma: f64,
    pub jumps: Vec<JumpDeviation>,
}

/// The distribution plus cdf and survival values at every relevant jump.
///
/// The rational backend covers the full support. The log-space backend covers
/// its window plus one point on each side; beyond that both tails are below
/// `e^-700` and the deviation is dominated by the neighbouring jump.
#[derive(Debug, Clone)]
pub struct JumpTable {
    dist: Distribution,
    first: u64,
    /// `(x_k, F(k), 1 - F(k))` for `k = first..`.
    points: Vec<(f64, f64, f64)>,
    before: (f64, f64),
}

impl JumpTable {
    pub fn new(params: &HypParams) -> Self {
        Self::from_distribution(Distribution::new(params))
    }

    pub fn from_distribution(dist: Distribution) -> Self {
        let params = *dist.params();
        let (first, last) = match dist.backend() {
            Backend::Rational => (params.support_lo(), params.support_hi()),
            Backend::LogSpace => {
                let w = dist.window();
                (
                    w.start().saturating_sub(1).max(params.support_lo()),
                    (w.end() + 1).min(params.support_hi()),
                )
            }
        };
        let points = (first..=last)
            .map(|k| {
                let k = k as i64;
                (params.standardized(k), dist.cdf_f64(k), dist.sf_f64(k))
            })
            .collect();
        let b = first as i64 - 1;
        let before = (dist.cdf_f64(b), dist.sf_f64(b));
        JumpTable {
            dist,
            first,
            points,
            before,
        }
    }

    pub fn params(&self) -> &HypParams {
        self.dist.params()
    }

    pub fn distribution(&self) -> &Distribution {
        &self.dist
    }

    pub fn backend(&self) -> Backend {
        self.dist.backend()
    }

    pub fn sigma(&self) -> f64 {
        self.params().sigma()
    }

    /// Signed deviations at every tabulated jump, in increasing `k`.
    pub fn deviations(&self) -> Vec<JumpDeviation> {
        let mut prev = self.before;
        self.points
            .iter()
            .enumerate()
            .map(|(i, &(x, cdf, sf))| {
                let d = JumpDeviation {
                    k: self.first + i as u64,
                    x,
                    at_point: signed_gap(x, cdf, sf),
                    left_limit: signed_gap(x, prev.0, prev.1),
                };
                prev = (cdf, sf);
                d
            })
            .collect()
    }

    /// `P((X - np)/sigma <= x) - Phi(x)`.
    pub fn delta_star(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        let k = self.floor_index(x);
        let (cdf, sf) = (self.dist.cdf_f64(k), self.dist.sf_f64(k));
        signed_gap(x, cdf, sf)
    }

    /// Largest `k` (possibly `support_lo - 1`) with `x_k <= x`.
    fn floor_index(&self, x: f64) -> i64 {
        let p = self.params();
        let (lo, hi) = (p.support_lo() as i64, p.support_hi() as i64);
        let guess = (p.mean() + x * p.sigma()).floor();
        let mut k = if guess.is_nan() {
            lo
        } else {
            guess.clamp(lo as f64 - 1.0, hi as f64) as i64
        };
        while k < hi && p.standardized(k + 1) <= x {
            k += 1;
        }
        while k >= lo && p.standardized(k) > x {
            k -= 1;
        }
        k
    }

    /// Smallest `k` (possibly `support_hi + 1`) with `x_k >= x`.
    fn ceil_index(&self, x: f64) -> i64 {
        let p = self.params();
        let (lo, hi) = (p.support_lo() as i64, p.support_hi() as i64);
        let guess = (p.mean() + x * p.sigma()).ceil();
        let mut k = if guess.is_nan() {
            hi
        } else {
            guess.clamp(lo as f64, hi as f64 + 1.0) as i64
        };
        while k > lo && p.standardized(k - 1) >= x {
            k -= 1;
        }
        while k <= hi && p.standardized(k) < x {
            k += 1;
        }
        k
    }

    /// `P(|X - np|/sigma >= x)` for `x > 0`.
    pub fn two_sided_tail(&self, x: f64) -> f64 {
        let upper = self.dist.sf_f64(self.ceil_index(x) - 1);
        let lower = self.dist.cdf_f64(self.floor_index(-x));
        (upper + lower).min(1.0)
    }

    /// Distinct jump locations `|x_k| > 0` of the two-sided tail with the
    /// tail value there, in increasing `x`. The tail is left-continuous and
    /// nonincreasing, so these points carry its supremum against any
    /// decreasing bound.
    pub fn tail_jumps(&self) -> Vec<(f64, f64)> {
        let mut xs: Vec<f64> = self
            .points
            .iter()
            .map(|&(x, _, _)| x.abs())
            .filter(|&x| x > 0.0)
            .collect();
        xs.sort_by(|a, b| a.total_cmp(b));
        xs.dedup();
        xs.into_iter().map(|x| (x, self.two_sided_tail(x))).collect()
    }
}

fn signed_gap(x: f64, cdf: f64, sf: f64) -> f64 {
    if x <= 0.0 {
        cdf - normal_cdf(x)
    } else {
        normal_sf(x) - sf
    }
}

impl DeltaReport {
    pub fn from_table(table: &JumpTable) -> Result<Self> {
        let jumps = table.deviations();
        let mut best = (0.0, 0, Side::AtPoint);
        for j in &jumps {
            let (v, side) = j.worst();
            if v > best.0 {
                best = (v, j.k, side);
            }
        }
        let sigma = table.sigma();
        if table.backend() == Backend::LogSpace && best.0 < 10.0 * LOG_SPACE_BUDGET {
            return Err(Error::ErrorBudget {
                delta: best.0,
                budget: LOG_SPACE_BUDGET,
            });
        }
        Ok(DeltaReport {
            params: *table.params(),
            backend: table.backend(),
            sigma,
            delta_sup: best.0,
            argmax_k: best.1,
            side: best.2,
            delta_times_sigma: best.0 * sigma,
            jumps,
        })
    }
}

/// Exact `sup_x |F(x) - Phi(x)|` with the jump attaining it.
pub fn delta_exact(params: &HypParams) -> Result<DeltaReport> {
    DeltaReport::from_table(&JumpTable::new(params))
}

/// `P((X - np)/sigma <= x) - Phi(x)` for a single `x`.
pub fn delta_star_at(params: &HypParams, x: f64) -> f64 {
    JumpTable::new(params).delta_star(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(n: u64, m: u64, pop: u64) -> HypParams {
        HypParams::new(n, m, pop).unwrap()
    }

    #[test]
    fn smallest_case_by_hand() {
        let r = delta_exact(&hp(2, 2, 4)).unwrap();
        assert!((r.delta_sup - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.argmax_k, 1);
        let j = r.jumps[1];
        assert!((j.at_point - 1.0 / 3.0).abs() < 1e-15);
        assert!((j.left_limit + 1.0 / 3.0).abs() < 1e-15);
        assert!((r.delta_times_sigma - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn delta_star_examples() {
        let h = hp(2, 2, 4);
        assert!((delta_star_at(&h, 0.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((delta_star_at(&h, -3.0) + 0.0013498980316300946).abs() < 1e-15);
        assert!(delta_star_at(&h, 12.0).abs() < 1e-10);
        assert!(delta_star_at(&hp(100, 100, 200), 12.0).abs() < 1e-10);
        assert_eq!(delta_star_at(&h, f64::INFINITY), 0.0);
    }

    #[test]
    fn center_case_in_band() {
        let r = delta_exact(&hp(100, 100, 200)).unwrap();
        assert!(r.delta_times_sigma > 0.05 && r.delta_times_sigma < 1.0);
    }

    #[test]
    fn backends_agree() {
        for h in [hp(100, 100, 200), hp(300, 1000, 5000), hp(37, 411, 1200)] {
            let a = DeltaReport::from_table(&JumpTable::from_distribution(Distribution::rational(&h))).unwrap();
            let b = DeltaReport::from_table(&JumpTable::from_distribution(Distribution::log_space(&h))).unwrap();
            assert!((a.delta_sup - b.delta_sup).abs() < 1e-10, "{h}");
        }
    }

    #[test]
    fn off_lattice_probes_never_exceed_sup() {
        for h in [hp(2, 2, 4), hp(10, 3, 30), hp(40, 60, 150)] {
            let t = JumpTable::new(&h);
            let r = DeltaReport::from_table(&t).unwrap();
            let xs: Vec<f64> = r.jumps.iter().map(|j| j.x).collect();
            for w in xs.windows(2) {
                for i in 1..=10 {
                    let x = w[0] + (w[1] - w[0]) * i as f64 / 11.0;
                    assert!(t.delta_star(x).abs() <= r.delta_sup + 1e-15);
                }
            }
        }
    }

    #[test]
    fn two_sided_tail_matches_enumeration() {
        let h = hp(40, 60, 150);
        let t = JumpTable::new(&h);
        for x in [0.3, 1.0, 2.0, 3.0] {
            let mut want = 0.0;
            for k in h.support() {
                if h.standardized(k as i64).abs() >= x {
                    want += t.distribution().pmf_f64(k as i64);
                }
            }
            assert!((t.two_sided_tail(x) - want).abs() < 1e-15, "x = {x}");
        }
        // jump locations are included in the tail
        let x = h.standardized(*h.support().end() as i64);
        assert!(t.two_sided_tail(x) > 0.0);
        assert_eq!(t.two_sided_tail(x * 1.0001), t.distribution().cdf_f64(h.support_lo() as i64 - 1));
    }

    #[test]
    fn log_space_large_population_within_budget() {
        // sigma ~ 3e4 puts Delta near 1e-5, well above the budget
        assert!(delta_exact(&hp(1_000_000_000, 2_000_000_000, 4_000_000_000)).is_ok());
    }
}
