//! Parallel per-instance sweep with deterministic row order.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::calibrate::nonuniform_check;
use super::delta::{DeltaReport, JumpTable};
use super::grid::{GridInstance, SweepGrid};
use crate::bounds::{bound_profile, tail_value, ConstantSet};
use crate::error::{Error, Result};

/// Environment variable capping sweep parallelism; `0` or unset means auto.
pub const THREADS_ENV: &str = "HYPERBERRY_THREADS";

/// One CSV row. Column order is fixed by field order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub instance_id: usize,
    pub n: u64,
    #[serde(rename = "M")]
    pub m: u64,
    #[serde(rename = "N")]
    pub pop: u64,
    pub p: f64,
    pub f: f64,
    pub sigma2: f64,
    pub sigma: f64,
    pub delta_r: Option<f64>,
    pub delta_times_sigma: Option<f64>,
    pub gate_ok: bool,
    pub delta_param: f64,
    pub a1: f64,
    pub uniform_bound: Option<f64>,
    /// Largest `|Delta*(x)| - bound` over jumps; `<= 0` means the bound holds.
    pub max_nonuniform_violation: Option<f64>,
    pub tail_bound_at_3: Option<f64>,
}

pub fn sweep_row(inst: &GridInstance, consts: Option<&ConstantSet>) -> Result<SweepRow> {
    let h = &inst.params;
    let profile = bound_profile(h);
    let table = JumpTable::new(h);
    let delta = match DeltaReport::from_table(&table) {
        Ok(r) => Some(r),
        Err(Error::ErrorBudget { .. }) => None,
        Err(e) => return Err(e),
    };
    let m = h.p().min(h.q());
    Ok(SweepRow {
        instance_id: inst.id,
        n: h.sample(),
        m: h.marked(),
        pop: h.population(),
        p: h.p(),
        f: h.f(),
        sigma2: h.sigma2(),
        sigma: h.sigma(),
        delta_r: delta.as_ref().map(|r| r.delta_sup),
        delta_times_sigma: delta.as_ref().map(|r| r.delta_times_sigma),
        gate_ok: profile.gate_ok,
        delta_param: profile.delta,
        a1: profile.a1,
        uniform_bound: consts.map(|c| c.c1 / h.sigma()),
        max_nonuniform_violation: match consts {
            Some(c) if profile.gate_ok => Some(nonuniform_check(&table, c.c3, c.c4).max_violation),
            _ => None,
        },
        tail_bound_at_3: match consts {
            Some(c) if profile.gate_ok => Some(tail_value(m, 3.0, c.c5, c.c6)),
            _ => None,
        },
    })
}

/// Thread count from `HYPERBERRY_THREADS`; `0`, unset or empty means auto.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(s) if s.trim().is_empty() => Ok(0),
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV} must be a count, got `{s}`"))),
    }
}

/// Evaluate every instance on a pool of `threads` workers (0 = auto). Rows
/// come back sorted by instance id whatever the scheduling.
pub fn run_sweep(grid: &SweepGrid, consts: Option<&ConstantSet>, threads: usize) -> Result<Vec<SweepRow>> {
    let inst = grid.instances()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let mut rows = pool.install(|| {
        inst.par_iter()
            .map(|i| sweep_row(i, consts))
            .collect::<Result<Vec<_>>>()
    })?;
    rows.sort_by_key(|r| r.instance_id);
    Ok(rows)
}

/// Floats as `%.12g`, absent values as empty cells.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "instance_id",
        "n",
        "M",
        "N",
        "p",
        "f",
        "sigma2",
        "sigma",
        "delta_r",
        "delta_times_sigma",
        "gate_ok",
        "delta_param",
        "a1",
        "uniform_bound",
        "max_nonuniform_violation",
        "tail_bound_at_3",
    ])
    .map_err(csv_err)?;
    let g = crate::fmt::sig12;
    let opt = |v: Option<f64>| v.map(g).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.instance_id.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.pop.to_string(),
            g(r.p),
            g(r.f),
            g(r.sigma2),
            g(r.sigma),
            opt(r.delta_r),
            opt(r.delta_times_sigma),
            r.gate_ok.to_string(),
            g(r.delta_param),
            g(r.a1),
            opt(r.uniform_bound),
            opt(r.max_nonuniform_violation),
            opt(r.tail_bound_at_3),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_threads() {
        let g = SweepGrid::lists("s", &[100, 400, 2000], &[0.1, 0.5], &[0.3, 0.5]);
        let one = run_sweep(&g, None, 1).unwrap();
        let many = run_sweep(&g, None, 4).unwrap();
        assert_eq!(one, many);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&one, &mut a).unwrap();
        write_csv(&many, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("instance_id,n,M,N,p,f,sigma2,sigma,delta_r,"));
        assert_eq!(text.lines().count(), one.len() + 1);
    }

    #[test]
    fn centre_row_values() {
        let g = SweepGrid::lists("c", &[200], &[0.5], &[0.5]);
        let rows = run_sweep(&g, None, 1).unwrap();
        let r = &rows[0];
        assert_eq!((r.n, r.m, r.pop), (100, 100, 200));
        assert_eq!(r.sigma2, 12.5);
        assert!(!r.gate_ok);
        assert!((r.delta_param - 1.0 / 22.5).abs() < 1e-15);
        assert!(r.uniform_bound.is_none() && r.tail_bound_at_3.is_none());
    }
}
