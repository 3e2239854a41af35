//! Parameter grids and their flat key-value config format.
//!
//! ```text
//! # one assignment per line
//! name = uniform-rate
//! N = 50, 100, 200          # or: N = 100..2000 step 100
//! p = 0.05, 0.1, 0.5        # or: powerlaw a=0.6 [c=1], or: constant 0.5
//! f = powerlaw a=0.6
//! min_sigma = 3
//! require_gate = true
//! ```
//!
//! Instances are generated with `N` outermost, then `p`, then `f`. Targets are
//! realized as `M = max(1, min(N-1, round(p N)))` and likewise for `n`.
//! Identifiers are assigned after filtering, starting at 0.

use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::bounds::bound_profile;
use crate::error::{Error, Result};
use crate::params::{HypParams, MAX_POPULATION};

/// How a proportion is chosen for each population size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Rule {
    List(Vec<f64>),
    /// `coef * N^(-exponent)`.
    PowerLaw { exponent: f64, coef: f64 },
    Constant(f64),
}

impl Rule {
    fn values(&self, pop: u64) -> Vec<f64> {
        match self {
            Rule::List(v) => v.clone(),
            Rule::PowerLaw { exponent, coef } => vec![coef * (pop as f64).powf(-exponent)],
            Rule::Constant(c) => vec![*c],
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::List(v) => {
                let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                f.write_str(&items.join(", "))
            }
            Rule::PowerLaw { exponent, coef } if *coef == 1.0 => write!(f, "powerlaw a={exponent}"),
            Rule::PowerLaw { exponent, coef } => write!(f, "powerlaw a={exponent} c={coef}"),
            Rule::Constant(c) => write!(f, "constant {c}"),
        }
    }
}

/// Round a target proportion of `pop` into `[1, pop-1]`.
pub fn realize(target: f64, pop: u64) -> u64 {
    let v = (target * pop as f64).round();
    let v = if v.is_finite() { v.max(1.0) } else { 1.0 };
    (v as u64).min(pop - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub name: String,
    #[serde(rename = "N_values")]
    pub n_values: Vec<u64>,
    pub p_rule: Rule,
    pub f_rule: Rule,
    pub min_sigma: Option<f64>,
    pub require_gate: bool,
}

/// One realized grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridInstance {
    pub id: usize,
    pub params: HypParams,
    pub p_target: f64,
    pub f_target: f64,
}

impl SweepGrid {
    /// A grid over explicit lists with no filters.
    pub fn lists(name: &str, n_values: &[u64], p: &[f64], f: &[f64]) -> Self {
        SweepGrid {
            name: name.to_string(),
            n_values: n_values.to_vec(),
            p_rule: Rule::List(p.to_vec()),
            f_rule: Rule::List(f.to_vec()),
            min_sigma: None,
            require_gate: false,
        }
    }

    /// A power-law trajectory `f ~ N^-a`, `p ~ N^-b`.
    pub fn trajectory(name: &str, n_values: &[u64], a: f64, b: f64) -> Self {
        SweepGrid {
            name: name.to_string(),
            n_values: n_values.to_vec(),
            p_rule: Rule::PowerLaw { exponent: b, coef: 1.0 },
            f_rule: Rule::PowerLaw { exponent: a, coef: 1.0 },
            min_sigma: None,
            require_gate: false,
        }
    }

    pub fn with_min_sigma(mut self, s: f64) -> Self {
        self.min_sigma = Some(s);
        self
    }

    pub fn with_gate(mut self) -> Self {
        self.require_gate = true;
        self
    }

    /// Realized, filtered instances in generation order.
    pub fn instances(&self) -> Result<Vec<GridInstance>> {
        let mut out = Vec::new();
        for &pop in &self.n_values {
            if !(3..=MAX_POPULATION).contains(&pop) {
                return Err(Error::InvalidArgument(format!(
                    "grid population {pop} outside [3, {MAX_POPULATION}]"
                )));
            }
            for p in self.p_rule.values(pop) {
                for f in self.f_rule.values(pop) {
                    let params = HypParams::new(realize(f, pop), realize(p, pop), pop)?;
                    if let Some(s) = self.min_sigma {
                        if params.sigma() < s {
                            continue;
                        }
                    }
                    if self.require_gate && !bound_profile(&params).gate_ok {
                        continue;
                    }
                    out.push(GridInstance {
                        id: out.len(),
                        params,
                        p_target: p,
                        f_target: f,
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut n_values: Option<Vec<u64>> = None;
        let mut p_rule = None;
        let mut f_rule = None;
        let mut min_sigma = None;
        let mut require_gate = false;

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| Error::Config {
                line: line_no,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "name" => name = Some(value.to_string()),
                "N" => {
                    if n_values.is_some() {
                        return Err(err("N assigned twice".into()));
                    }
                    n_values = Some(parse_populations(value).map_err(err)?);
                }
                "p" => p_rule = Some(parse_rule(value).map_err(err)?),
                "f" => f_rule = Some(parse_rule(value).map_err(err)?),
                "min_sigma" => {
                    let s = parse_real(value).map_err(err)?;
                    if !(s >= 0.0) {
                        return Err(err(format!("min_sigma must be >= 0, got {s}")));
                    }
                    min_sigma = Some(s);
                }
                "require_gate" => {
                    require_gate = match value {
                        "true" | "yes" | "1" => true,
                        "false" | "no" | "0" => false,
                        _ => return Err(err(format!("require_gate must be true or false, got `{value}`"))),
                    }
                }
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }

        let missing = |k: &str| Error::Config {
            line: 0,
            message: format!("missing required key `{k}`"),
        };
        Ok(SweepGrid {
            name: name.unwrap_or_else(|| "grid".into()),
            n_values: n_values.ok_or_else(|| missing("N"))?,
            p_rule: p_rule.ok_or_else(|| missing("p"))?,
            f_rule: f_rule.ok_or_else(|| missing("f"))?,
            min_sigma,
            require_gate,
        })
    }

    /// Canonical config text; parsing it back yields an equal grid.
    pub fn to_config(&self) -> String {
        let ns: Vec<String> = self.n_values.iter().map(|n| n.to_string()).collect();
        let mut s = format!(
            "name = {}\nN = {}\np = {}\nf = {}\n",
            self.name,
            ns.join(", "),
            self.p_rule,
            self.f_rule
        );
        if let Some(m) = self.min_sigma {
            s.push_str(&format!("min_sigma = {m}\n"));
        }
        s.push_str(&format!("require_gate = {}\n", self.require_gate));
        s
    }

    /// One-line descriptor for reports.
    pub fn descriptor(&self) -> String {
        self.to_config().trim_end().replace('\n', "; ")
    }
}

fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: `{s}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not finite: `{s}`"))
    }
}

fn parse_count(s: &str) -> std::result::Result<u64, String> {
    let s = s.trim();
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v = parse_real(s)?;
    if v >= 0.0 && v.fract() == 0.0 && v <= MAX_POPULATION as f64 {
        Ok(v as u64)
    } else {
        Err(format!("not a population size: `{s}`"))
    }
}

fn parse_populations(value: &str) -> std::result::Result<Vec<u64>, String> {
    let out = if let Some((range, step)) = value.split_once("step") {
        let (a, b) = range
            .split_once("..")
            .ok_or_else(|| format!("expected `a..b step s`, got `{value}`"))?;
        let (a, b, step) = (parse_count(a)?, parse_count(b)?, parse_count(step)?);
        if step == 0 || b < a {
            return Err(format!("empty or invalid range `{value}`"));
        }
        (a..=b).step_by(step as usize).collect()
    } else {
        value
            .split(',')
            .map(parse_count)
            .collect::<std::result::Result<Vec<_>, _>>()?
    };
    if out.is_empty() {
        return Err("N list is empty".into());
    }
    Ok(out)
}

fn parse_rule(value: &str) -> std::result::Result<Rule, String> {
    let mut words = value.split_whitespace();
    match words.next() {
        Some("powerlaw") => {
            let mut exponent = None;
            let mut coef = 1.0;
            for w in words {
                let (k, v) = w
                    .split_once('=')
                    .ok_or_else(|| format!("expected `key=value` after powerlaw, got `{w}`"))?;
                match k {
                    "a" | "b" => exponent = Some(parse_real(v)?),
                    "c" => coef = parse_real(v)?,
                    _ => return Err(format!("unknown powerlaw parameter `{k}`")),
                }
            }
            let exponent = exponent.ok_or("powerlaw needs an exponent a=...")?;
            if !(coef > 0.0) {
                return Err(format!("powerlaw coefficient must be > 0, got {coef}"));
            }
            Ok(Rule::PowerLaw { exponent, coef })
        }
        Some("constant") => {
            let v = words.next().ok_or("constant needs a value")?;
            let v = parse_real(v)?;
            check_proportion(v)?;
            Ok(Rule::Constant(v))
        }
        Some(_) => {
            let v = value
                .split(',')
                .map(parse_real)
                .collect::<std::result::Result<Vec<_>, _>>()?;
            for x in &v {
                check_proportion(*x)?;
            }
            Ok(Rule::List(v))
        }
        None => Err("empty rule".into()),
    }
}

fn check_proportion(v: f64) -> std::result::Result<(), String> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(format!("proportion must lie in (0, 1), got {v}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lists_ranges_and_rules() {
        let g = SweepGrid::parse(
            "# demo\nname = demo\nN = 100..300 step 100\np = 0.1, 0.5 # two\nf = constant 0.5\nmin_sigma = 3\n",
        )
        .unwrap();
        assert_eq!(g.n_values, vec![100, 200, 300]);
        assert_eq!(g.p_rule, Rule::List(vec![0.1, 0.5]));
        assert_eq!(g.f_rule, Rule::Constant(0.5));
        assert_eq!(g.min_sigma, Some(3.0));
        assert_eq!(SweepGrid::parse(&g.to_config()).unwrap(), g);

        let t = SweepGrid::parse("N = 1e4, 1e5\np = powerlaw b=0.6\nf = powerlaw a=0.6 c=2\n").unwrap();
        assert_eq!(t.n_values, vec![10_000, 100_000]);
        assert_eq!(t.f_rule, Rule::PowerLaw { exponent: 0.6, coef: 2.0 });
        assert_eq!(SweepGrid::parse(&t.to_config()).unwrap(), t);
    }

    #[test]
    fn errors_name_the_line() {
        match SweepGrid::parse("N = 10\np = 0.5\nf = 1.5\n") {
            Err(Error::Config { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(SweepGrid::parse("N = 10\nbogus\n"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(SweepGrid::parse("N = 10\np = 0.5\n"), Err(Error::Config { line: 0, .. })));
        assert!(SweepGrid::parse("N = 10..5 step 1\np = 0.5\nf = 0.5").is_err());
    }

    #[test]
    fn rounding_preserves_invariants() {
        assert_eq!(realize(0.001, 100), 1);
        assert_eq!(realize(0.999, 100), 99);
        assert_eq!(realize(0.5, 5), 3);
        let g = SweepGrid::trajectory("t", &[10_000, 100_000, 1_000_000], 0.6, 0.6);
        let inst = g.instances().unwrap();
        assert_eq!(inst.len(), 3);
        assert_eq!(inst[0].params.sample(), 40);
        assert_eq!(inst[2].params.marked(), 251);
    }

    #[test]
    fn filters_and_ids() {
        let g = SweepGrid::lists("g", &[50, 2000], &[0.05, 0.5], &[0.05, 0.5]).with_min_sigma(3.0);
        let inst = g.instances().unwrap();
        assert!(inst.iter().all(|i| i.params.sigma() >= 3.0));
        assert!(inst.iter().enumerate().all(|(k, i)| i.id == k));
        let gated = SweepGrid::lists("g", &[100, 20_000], &[0.5], &[0.5]).with_gate();
        let inst = gated.instances().unwrap();
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].params.population(), 20_000);
    }
}
