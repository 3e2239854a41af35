//! Rate, CLT, duality and mode experiments over grids.

use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;

use super::delta::{delta_exact, DeltaReport};
use super::grid::SweepGrid;
use crate::error::{Error, Result};
use crate::exact::{dual_leftover, dual_reflect, mode, mode_threshold, Backend, RationalTable};
use crate::params::HypParams;

/// Floor on `min Delta * sigma` fixed after a pilot enumeration.
pub const OPTIMALITY_FLOOR: f64 = 0.05;

/// Tolerance for `Delta` equality across the duality transforms; the
/// transforms mirror the lattice, so only the last bit of `Phi` may differ.
pub const DUALITY_DELTA_TOLERANCE: f64 = 1e-15;

/// Per-instance `Delta` with grid coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaPoint {
    pub id: usize,
    pub params: HypParams,
    pub sigma2: f64,
    pub delta: f64,
    pub delta_times_sigma: f64,
}

impl DeltaPoint {
    fn from_report(id: usize, r: &DeltaReport) -> Self {
        DeltaPoint {
            id,
            params: r.params,
            sigma2: r.params.sigma2(),
            delta: r.delta_sup,
            delta_times_sigma: r.delta_times_sigma,
        }
    }
}

/// `Delta` for every grid instance, in grid order.
pub fn delta_points(grid: &SweepGrid) -> Result<Vec<DeltaPoint>> {
    grid.instances()?
        .par_iter()
        .map(|i| delta_exact(&i.params).map(|r| DeltaPoint::from_report(i.id, &r)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityReport {
    pub points: Vec<DeltaPoint>,
    pub min_delta_times_sigma: f64,
    pub argmin_id: usize,
    pub floor: f64,
    /// Smallest `Delta * sigma` at the largest population over that at the
    /// smallest; near or above 1 means no trend to zero.
    pub trend_ratio: f64,
    pub passes: bool,
}

pub fn optimality_check(grid: &SweepGrid) -> Result<OptimalityReport> {
    let points = delta_points(grid)?;
    optimality_from_points(points)
}

pub fn optimality_from_points(points: Vec<DeltaPoint>) -> Result<OptimalityReport> {
    let first = points
        .first()
        .ok_or_else(|| Error::InvalidArgument("optimality check on an empty grid".into()))?;
    let (mut min, mut arg) = (first.delta_times_sigma, first.id);
    for p in &points {
        if p.delta_times_sigma < min {
            min = p.delta_times_sigma;
            arg = p.id;
        }
    }
    let min_at = |pop: u64| {
        points
            .iter()
            .filter(|p| p.params.population() == pop)
            .map(|p| p.delta_times_sigma)
            .fold(f64::INFINITY, f64::min)
    };
    let lo = points.iter().map(|p| p.params.population()).min().unwrap_or(0);
    let hi = points.iter().map(|p| p.params.population()).max().unwrap_or(0);
    Ok(OptimalityReport {
        trend_ratio: min_at(hi) / min_at(lo),
        min_delta_times_sigma: min,
        argmin_id: arg,
        floor: OPTIMALITY_FLOOR,
        passes: min >= OPTIMALITY_FLOOR,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltReport {
    pub points: Vec<DeltaPoint>,
    pub sigma2_increasing: bool,
    pub delta_strictly_decreasing: bool,
    pub min_delta: f64,
    pub max_delta_times_sigma: f64,
    /// `Delta(N_i) / Delta(N_{i+1})`.
    pub step_ratios: Vec<f64>,
}

pub fn clt_experiment(traj: &SweepGrid) -> Result<CltReport> {
    let points = delta_points(traj)?;
    if points.len() < 2 {
        return Err(Error::InvalidArgument("a trajectory needs at least two instances".into()));
    }
    let step_ratios = points.windows(2).map(|w| w[0].delta / w[1].delta).collect();
    Ok(CltReport {
        sigma2_increasing: points.windows(2).all(|w| w[1].sigma2 > w[0].sigma2),
        delta_strictly_decreasing: points.windows(2).all(|w| w[1].delta < w[0].delta),
        min_delta: points.iter().map(|p| p.delta).fold(f64::INFINITY, f64::min),
        max_delta_times_sigma: points.iter().map(|p| p.delta_times_sigma).fold(0.0, f64::max),
        step_ratios,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityFailure {
    pub params: HypParams,
    pub what: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub instances: usize,
    pub pmf_checks: usize,
    pub max_delta_difference: f64,
    pub failures: Vec<DualityFailure>,
}

impl DualityReport {
    pub fn passes(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Exact pmf identities `P(X=k) = P(Y=M-k) = P(V=n-k)` with
/// `Y ~ Hyp(N-n; M, N)` and `V ~ Hyp(n; N-M, N)`, plus equality of `Delta`.
pub fn duality_check(params: &HypParams) -> Result<(usize, f64, Vec<DualityFailure>)> {
    if params.population() > crate::exact::RATIONAL_MAX_POPULATION {
        return Err(Error::InvalidArgument(format!(
            "duality check needs the rational backend, {params} is too large"
        )));
    }
    let (m, n) = (params.marked() as i64, params.sample() as i64);
    let x = RationalTable::new(params);
    let y_params = dual_leftover(params);
    let v_params = dual_reflect(params);
    let y = RationalTable::new(&y_params);
    let v = RationalTable::new(&v_params);
    let mut failures = Vec::new();
    let mut checks = 0;
    for k in params.support() {
        let k = k as i64;
        let px = x.pmf(k);
        for (label, other) in [("leftover", y.pmf(m - k)), ("reflection", v.pmf(n - k))] {
            checks += 1;
            if px != other {
                failures.push(DualityFailure {
                    params: *params,
                    what: format!("{label} pmf differs at k = {k}"),
                });
            }
        }
    }
    let dx = delta_exact(params)?.delta_sup;
    let mut worst: f64 = 0.0;
    for (label, p) in [("leftover", y_params), ("reflection", v_params)] {
        let d = (delta_exact(&p)?.delta_sup - dx).abs();
        worst = worst.max(d);
        if d > DUALITY_DELTA_TOLERANCE {
            failures.push(DualityFailure {
                params: *params,
                what: format!("{label} Delta differs by {d:e}"),
            });
        }
    }
    Ok((checks, worst, failures))
}

pub fn duality_suite(instances: &[HypParams]) -> Result<DualityReport> {
    let results = instances
        .par_iter()
        .map(duality_check)
        .collect::<Result<Vec<_>>>()?;
    let mut report = DualityReport {
        instances: instances.len(),
        pmf_checks: 0,
        max_delta_difference: 0.0,
        failures: Vec::new(),
    };
    for (checks, worst, failures) in results {
        report.pmf_checks += checks;
        report.max_delta_difference = report.max_delta_difference.max(worst);
        report.failures.extend(failures);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeReport {
    pub instances: usize,
    pub argmax_mismatches: Vec<HypParams>,
    pub pattern_mismatches: Vec<HypParams>,
}

impl ModeReport {
    pub fn passes(&self) -> bool {
        self.argmax_mismatches.is_empty() && self.pattern_mismatches.is_empty()
    }
}

/// `(mode is a maximizer, every step P(j+1) vs P(j) matches the threshold)`.
pub fn mode_check(params: &HypParams) -> (bool, bool) {
    let t = RationalTable::new(params);
    let w = t.weights();
    let lo = params.support_lo();
    let max = w.iter().max().expect("support is never empty");
    let md = mode(params);
    let argmax_ok = &w[(md - lo) as usize] == max;
    let thr = mode_threshold(params);
    let pattern_ok = w.windows(2).enumerate().all(|(i, pair)| {
        let j = BigRational::from_integer((lo + i as u64).into());
        match j.cmp(&thr) {
            std::cmp::Ordering::Less => pair[1] > pair[0],
            std::cmp::Ordering::Equal => pair[1] == pair[0],
            std::cmp::Ordering::Greater => pair[1] < pair[0],
        }
    });
    (argmax_ok, pattern_ok)
}

pub fn mode_law(instances: &[HypParams]) -> Result<ModeReport> {
    if let Some(p) = instances
        .iter()
        .find(|p| crate::exact::Distribution::new(p).backend() != Backend::Rational)
    {
        return Err(Error::InvalidArgument(format!(
            "mode law check needs the rational backend, {p} is too large"
        )));
    }
    let results: Vec<(bool, bool)> = instances.par_iter().map(mode_check).collect();
    let mut report = ModeReport {
        instances: instances.len(),
        argmax_mismatches: Vec::new(),
        pattern_mismatches: Vec::new(),
    };
    for (p, (a, b)) in instances.iter().zip(results) {
        if !a {
            report.argmax_mismatches.push(*p);
        }
        if !b {
            report.pattern_mismatches.push(*p);
        }
    }
    Ok(report)
}
