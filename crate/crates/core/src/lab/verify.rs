//! Seeded randomized checks and the property suite behind `verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::calibrate::{nonuniform_check, tail_check};
use super::delta::{DeltaReport, JumpTable};
use super::experiments::{duality_suite, mode_law};
use super::grid::SweepGrid;
use super::stirling_check::stirling_sandwich;
use crate::bounds::{bound_profile, ConstantSet};
use crate::error::Result;
use crate::exact::{Distribution, RATIONAL_MAX_POPULATION};
use crate::lattice::{monotone_sum_bound, phi_riemann_bound, InequalityCheck, LatticeSumCase, Shape};
use crate::params::HypParams;
use crate::stirling::{certified_pmf, standardize};

pub const DEFAULT_SEED: u64 = 0x5eed_2024;

/// Outcome of a batch of inequality cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityOutcome {
    pub cases: usize,
    /// Cases whose quadrature did not settle under step halving.
    pub unstable: usize,
    pub violations: usize,
    pub max_lhs_over_rhs: f64,
}

impl InequalityOutcome {
    pub fn passes(&self) -> bool {
        self.unstable == 0 && self.violations == 0
    }

    fn collect(checks: impl Iterator<Item = InequalityCheck>) -> Self {
        let mut o = InequalityOutcome {
            cases: 0,
            unstable: 0,
            violations: 0,
            max_lhs_over_rhs: 0.0,
        };
        for c in checks {
            o.cases += 1;
            if !c.quadrature_stable() {
                o.unstable += 1;
                continue;
            }
            if !c.holds() {
                o.violations += 1;
            }
            if c.rhs > 0.0 {
                o.max_lhs_over_rhs = o.max_lhs_over_rhs.max(c.lhs / c.rhs);
            }
        }
        o
    }
}

/// A random lattice and shape: `b in [-10, 10]`, `h in (0, 2]`, `k <= 500`.
pub fn random_sum_case(rng: &mut impl Rng) -> (LatticeSumCase, Shape) {
    let b = rng.gen_range(-10.0..=10.0);
    let h = 2.0 - rng.gen_range(0.0..2.0);
    let k = rng.gen_range(0..=500u64);
    let center = rng.gen_range(-15.0..=15.0);
    let shape = match rng.gen_range(0..3) {
        0 => Shape::Gaussian { center },
        1 => Shape::Triangle {
            center,
            half_width: rng.gen_range(0.1..=10.0),
            height: rng.gen_range(0.1..=5.0),
        },
        _ => Shape::TruncatedQuadratic {
            center,
            height: rng.gen_range(0.1..=25.0),
        },
    };
    (LatticeSumCase { b, h, k }, shape)
}

pub fn random_sum_cases(count: usize, seed: u64) -> Result<InequalityOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<_> = (0..count).map(|_| random_sum_case(&mut rng)).collect();
    let checks = cases
        .par_iter()
        .map(|(c, g)| monotone_sum_bound(c, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(InequalityOutcome::collect(checks.into_iter()))
}

/// `b in [0, 6]`, `h in (0, 1]`, `1 <= j0 <= 200`.
pub fn random_riemann_cases(count: usize, seed: u64) -> Result<InequalityOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(f64, f64, u64)> = (0..count)
        .map(|_| {
            (
                rng.gen_range(0.0..=6.0),
                1.0 - rng.gen_range(0.0..1.0),
                rng.gen_range(1..=200u64),
            )
        })
        .collect();
    let checks = cases
        .par_iter()
        .map(|&(b, h, j0)| phi_riemann_bound(b, h, j0))
        .collect::<Result<Vec<_>>>()?;
    Ok(InequalityOutcome::collect(checks.into_iter()))
}

/// Random rational-backend parameters.
pub fn random_rational_params(count: usize, seed: u64) -> Vec<HypParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let pop = rng.gen_range(3..=RATIONAL_MAX_POPULATION / 5);
            let m = rng.gen_range(1..pop);
            let n = rng.gen_range(1..pop);
            HypParams::new(n, m, pop).expect("drawn inside the valid range")
        })
        .collect()
}

/// Enclosure check over a grid: every `k` with `|a_kn| <= delta` must have
/// its exact rational pmf inside `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnclosureOutcome {
    pub instances: usize,
    pub checks: usize,
    pub violations: usize,
}

pub fn enclosure_suite(grid: &SweepGrid, deltas: &[f64]) -> Result<EnclosureOutcome> {
    use num_rational::BigRational;
    let inst = grid.instances()?;
    let per: Vec<(usize, usize, bool)> = inst
        .par_iter()
        .map(|i| {
            let h = &i.params;
            let dist = Distribution::rational(h);
            let mut checks = 0;
            let mut bad = 0;
            let mut any = false;
            for &delta in deltas {
                for k in h.support() {
                    let k = k as i64;
                    if standardize(h, k).a_kn.abs() > delta {
                        continue;
                    }
                    let Ok(c) = certified_pmf(h, k, delta) else { continue };
                    any = true;
                    checks += 1;
                    let exact = dist.pmf(k);
                    let r = exact.as_rational().expect("rational backend");
                    // a large cubic remainder overflows `hi` to +inf, which
                    // is a vacuous but valid upper end
                    let below = BigRational::from_float(c.lo).is_some_and(|lo| &lo <= r);
                    let above = c.hi == f64::INFINITY
                        || BigRational::from_float(c.hi).is_some_and(|hi| r <= &hi);
                    if !(below && above) {
                        bad += 1;
                    }
                }
            }
            (checks, bad, any)
        })
        .collect();
    Ok(EnclosureOutcome {
        instances: per.iter().filter(|p| p.2).count(),
        checks: per.iter().map(|p| p.0).sum(),
        violations: per.iter().map(|p| p.1).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub property: String,
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(property: &str, passed: bool, detail: String) -> Self {
        Outcome {
            property: property.into(),
            passed,
            detail,
        }
    }
}

/// Checks that the given constants hold on every instance of `grid`.
pub fn constants_suite(grid: &SweepGrid, consts: &ConstantSet) -> Result<Vec<Outcome>> {
    let tables: Vec<JumpTable> = grid
        .instances()?
        .par_iter()
        .map(|i| JumpTable::new(&i.params))
        .collect();
    let reports = tables
        .par_iter()
        .map(DeltaReport::from_table)
        .collect::<Result<Vec<_>>>()?;
    let uniform_bad = reports
        .iter()
        .filter(|r| r.delta_times_sigma > consts.c1)
        .count();
    let gated: Vec<&JumpTable> = tables
        .iter()
        .filter(|t| bound_profile(t.params()).gate_ok)
        .collect();
    let nu_bad: usize = gated
        .par_iter()
        .map(|t| nonuniform_check(t, consts.c3, consts.c4).violations)
        .sum();
    let tail_bad: usize = gated
        .par_iter()
        .map(|t| tail_check(t, consts.c5, consts.c6).violations)
        .sum();
    Ok(vec![
        Outcome::new(
            "uniform-bound",
            uniform_bad == 0,
            format!("{uniform_bad} of {} instances exceed C1/sigma", reports.len()),
        ),
        Outcome::new(
            "nonuniform-bound",
            nu_bad == 0,
            format!("{nu_bad} jump violations over {} gate-passing instances", gated.len()),
        ),
        Outcome::new(
            "tail-bound",
            tail_bad == 0,
            format!("{tail_bad} tail violations over {} gate-passing instances", gated.len()),
        ),
    ])
}

/// The built-in property suite, sized to run in well under a minute.
pub fn verify_suite(seed: u64) -> Result<Vec<Outcome>> {
    let mut out = Vec::new();

    let enc_grid = SweepGrid::lists("enclosure", &[50, 100, 200, 500], &[0.05, 0.1, 0.3, 0.5], &[0.05, 0.1, 0.3, 0.5]);
    let e = enclosure_suite(&enc_grid, &[0.05, 0.25, 0.5])?;
    out.push(Outcome::new(
        "certified-enclosure",
        e.violations == 0 && e.checks > 0,
        format!("{} checks, {} violations", e.checks, e.violations),
    ));

    let s = stirling_sandwich(500)?;
    out.push(Outcome::new(
        "stirling-sandwich",
        s.passes(),
        format!("m = 1..{}, {} violations", s.m_max, s.violations.len()),
    ));

    let l2 = random_sum_cases(1000, seed)?;
    out.push(Outcome::new(
        "monotone-sum-inequality",
        l2.passes(),
        format!("{} cases, {} unstable, {} violations", l2.cases, l2.unstable, l2.violations),
    ));
    let l3 = random_riemann_cases(1000, seed.wrapping_add(1))?;
    out.push(Outcome::new(
        "phi-riemann-inequality",
        l3.passes(),
        format!("{} cases, {} unstable, {} violations", l3.cases, l3.unstable, l3.violations),
    ));

    let params = random_rational_params(50, seed.wrapping_add(2));
    let d = duality_suite(&params)?;
    out.push(Outcome::new(
        "duality",
        d.passes(),
        format!("{} pmf identities, {} failures", d.pmf_checks, d.failures.len()),
    ));
    let m = mode_law(&params)?;
    out.push(Outcome::new(
        "mode-law",
        m.passes(),
        format!(
            "{} instances, {} argmax and {} pattern mismatches",
            m.instances,
            m.argmax_mismatches.len(),
            m.pattern_mismatches.len()
        ),
    ));

    let backend_bad = [(100u64, 100u64, 200u64), (300, 1000, 5000), (37, 411, 1200)]
        .par_iter()
        .filter(|&&(n, mm, pop)| {
            let h = HypParams::new(n, mm, pop).expect("valid");
            let a = DeltaReport::from_table(&JumpTable::from_distribution(Distribution::rational(&h)));
            let b = DeltaReport::from_table(&JumpTable::from_distribution(Distribution::log_space(&h)));
            match (a, b) {
                (Ok(a), Ok(b)) => (a.delta_sup - b.delta_sup).abs() > 1e-10,
                _ => true,
            }
        })
        .count();
    out.push(Outcome::new(
        "backend-agreement",
        backend_bad == 0,
        format!("{backend_bad} of 3 instances disagree beyond 1e-10"),
    ));

    let law_grid = SweepGrid::lists(
        "delta-law",
        &[50, 200, 1000, 10_000, 100_000],
        &[0.05, 0.1, 0.3, 0.5, 0.7, 0.9],
        &[0.05, 0.1, 0.3, 0.4, 0.5, 0.6, 0.9],
    );
    let mut law_bad = 0;
    let inst = law_grid.instances()?;
    for i in &inst {
        let b = bound_profile(&i.params);
        let in_range = b.delta > 1.0 / 25.0 && b.delta <= 1.0 / 20.0;
        let flat = b.f_bar > 4.0 / 9.0 || b.delta == 1.0 / 20.0;
        let gate = b.sigma < 25.0 || b.gate_ok;
        if !(in_range && flat && gate) {
            law_bad += 1;
        }
    }
    out.push(Outcome::new(
        "delta-law",
        law_bad == 0,
        format!("{law_bad} of {} instances break the delta law", inst.len()),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_cases_are_seeded() {
        let a = random_sum_cases(50, 7).unwrap();
        let b = random_sum_cases(50, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.passes());
        assert!(random_riemann_cases(50, 7).unwrap().passes());
    }

    #[test]
    fn rational_params_stay_small() {
        for p in random_rational_params(100, 1) {
            assert!(p.population() <= RATIONAL_MAX_POPULATION);
        }
    }

    #[test]
    fn enclosure_small_grid() {
        let g = SweepGrid::lists("e", &[100, 200], &[0.3, 0.5], &[0.3, 0.5]);
        let e = enclosure_suite(&g, &[0.25, 0.5]).unwrap();
        assert!(e.checks > 0);
        assert_eq!(e.violations, 0);
    }
}
