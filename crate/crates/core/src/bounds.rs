//! Berry-Esseen style bounds for the standardized hypergeometric law.
//!
//! The bound shapes are fixed; their constants `C1..C6` exist but carry no
//! closed-form values. A [`ConstantSet`] therefore records, per constant,
//! whether the value was traced from the proof or calibrated against exact
//! enumeration, and every evaluated [`Bound`] carries that tag along.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, GateFailure, Result};
use crate::params::HypParams;

/// The only explicit exponent rate in the non-uniform argument.
pub const PROOF_EXPONENT_RATE: f64 = 0.07;

/// Far-tail exponent rate `0.07 * delta^2 * (1-f)^2` at its worst case over
/// all gate-passing instances: `delta > 1/25` and, after folding, `1-f >= 1/2`.
/// The remaining `q^2` factor is the `lambda^2` of the bound itself.
pub const PROOF_TRACED_RATE: f64 = PROOF_EXPONENT_RATE / (25.0 * 25.0 * 4.0);

/// `delta_r`, `a_1r`, folded sampling fraction and the `delta*sigma > 1` gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundProfile {
    pub f_bar: f64,
    pub a1: f64,
    pub delta: f64,
    pub sigma: f64,
    pub gate_ok: bool,
}

pub fn bound_profile(params: &HypParams) -> BoundProfile {
    let folded = params.sample().min(params.unsampled());
    let f_bar = folded as f64 / params.population() as f64;
    let a1 = (f_bar + 4.0) / (4.0 * (1.0 - f_bar));
    let delta = 1.0 / (10.0 * a1.max(2.0));
    let sigma = params.sigma();
    BoundProfile {
        f_bar,
        a1,
        delta,
        sigma,
        gate_ok: delta * sigma > 1.0,
    }
}

fn require_gate(params: &HypParams) -> Result<BoundProfile> {
    let profile = bound_profile(params);
    if profile.gate_ok {
        Ok(profile)
    } else {
        Err(GateFailure::DeltaSigma {
            delta: profile.delta,
            sigma: profile.sigma,
        }
        .into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ProofTraced,
    Calibrated,
}

impl Provenance {
    /// Calibrated wins: a bound is only proof-traced if all its inputs are.
    pub fn combine(self, other: Provenance) -> Provenance {
        if self == Provenance::ProofTraced && other == Provenance::ProofTraced {
            Provenance::ProofTraced
        } else {
            Provenance::Calibrated
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::ProofTraced => "proof-traced",
            Provenance::Calibrated => "calibrated",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceMap {
    #[serde(rename = "C1")]
    pub c1: Provenance,
    #[serde(rename = "C2")]
    pub c2: Provenance,
    #[serde(rename = "C3")]
    pub c3: Provenance,
    #[serde(rename = "C4")]
    pub c4: Provenance,
    #[serde(rename = "C5")]
    pub c5: Provenance,
    #[serde(rename = "C6")]
    pub c6: Provenance,
}

impl ProvenanceMap {
    pub fn all(p: Provenance) -> Self {
        ProvenanceMap {
            c1: p,
            c2: p,
            c3: p,
            c4: p,
            c5: p,
            c6: p,
        }
    }
}

/// The six bound constants with provenance and the grid that produced them.
///
/// Serializes to a flat JSON object; floats round-trip bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantSet {
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "C3")]
    pub c3: f64,
    #[serde(rename = "C4")]
    pub c4: f64,
    #[serde(rename = "C5")]
    pub c5: f64,
    #[serde(rename = "C6")]
    pub c6: f64,
    pub provenance: ProvenanceMap,
    /// Descriptor of the calibration grid.
    pub grid: String,
    /// Unix seconds of calibration; `None` for reproducible artifacts.
    #[serde(default)]
    pub calibrated_at: Option<u64>,
}

impl ConstantSet {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("C1", self.c1),
            ("C2", self.c2),
            ("C3", self.c3),
            ("C4", self.c4),
            ("C5", self.c5),
            ("C6", self.c6),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "constant {name} must be finite and positive, got {v}"
                )));
            }
        }
        let p = &self.provenance;
        let calibrated = [p.c1, p.c2, p.c3, p.c4, p.c5, p.c6].contains(&Provenance::Calibrated);
        if calibrated && self.grid.trim().is_empty() {
            return Err(Error::InvalidArgument(
                "calibrated constants must name the grid that produced them".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: ConstantSet = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("constant sets always serialize")
    }

    /// Replace the two exponent rates by the proof-traced value.
    pub fn with_proof_traced_rates(mut self) -> Self {
        self.c4 = PROOF_TRACED_RATE;
        self.c6 = PROOF_TRACED_RATE;
        self.provenance.c4 = Provenance::ProofTraced;
        self.provenance.c6 = Provenance::ProofTraced;
        self
    }
}

/// An evaluated bound and the provenance of the constants behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bound {
    pub value: f64,
    pub provenance: Provenance,
}

/// `C1 / sigma`.
pub fn uniform_bound(params: &HypParams, consts: &ConstantSet) -> Bound {
    Bound {
        value: consts.c1 / params.sigma(),
        provenance: consts.provenance.c1,
    }
}

fn require_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("x must be finite, got {x}")))
    }
}

/// `q` for `x < 0`, `p` for `x > 0` and `min(p, q)` at `x = 0`.
pub fn lambda(params: &HypParams, x: f64) -> Result<f64> {
    require_finite(x)?;
    Ok(lambda_value(params.p(), params.q(), x))
}

pub(crate) fn lambda_value(p: f64, q: f64, x: f64) -> f64 {
    if x < 0.0 {
        q
    } else if x > 0.0 {
        p
    } else {
        p.min(q)
    }
}

/// `(C3/sigma) (1+x^2)/lambda exp(-C4 x^2 lambda^2)` without any gate check.
pub fn nonuniform_value(sigma: f64, lam: f64, x: f64, c3: f64, c4: f64) -> f64 {
    c3 / sigma * (1.0 + x * x) / lam * (-c4 * x * x * lam * lam).exp()
}

pub fn nonuniform_bound(params: &HypParams, x: f64, consts: &ConstantSet) -> Result<Bound> {
    require_finite(x)?;
    let profile = require_gate(params)?;
    let lam = lambda_value(params.p(), params.q(), x);
    Ok(Bound {
        value: nonuniform_value(profile.sigma, lam, x, consts.c3, consts.c4),
        provenance: consts.provenance.c3.combine(consts.provenance.c4),
    })
}

/// `min(1, C5/m^3 exp(-C6 x^2 m^2))` with `m = min(p, q)`, no gate check.
pub fn tail_value(m: f64, x: f64, c5: f64, c6: f64) -> f64 {
    (c5 / (m * m * m) * (-c6 * x * x * m * m).exp()).min(1.0)
}

/// Bound on `P(|X - np|/sigma >= x)`.
pub fn tail_bound(params: &HypParams, x: f64, consts: &ConstantSet) -> Result<Bound> {
    require_finite(x)?;
    if x <= 0.0 {
        return Err(Error::InvalidArgument(format!("tail bound needs x > 0, got {x}")));
    }
    require_gate(params)?;
    let m = params.p().min(params.q());
    Ok(Bound {
        value: tail_value(m, x, consts.c5, consts.c6),
        provenance: consts.provenance.c5.combine(consts.provenance.c6),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltItem {
    pub params: HypParams,
    pub sigma2: f64,
    pub n: u64,
    pub unsampled: u64,
    pub marked: u64,
    pub unmarked: u64,
}

/// Divergence diagnostics along a sequence of parameter sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltConditionReport {
    pub items: Vec<CltItem>,
    /// `sigma^2` strictly increasing from item to item.
    pub sigma2_increasing: bool,
    /// `n`, `N-n`, `M`, `N-M` each strictly increasing.
    pub counts_increasing: bool,
    /// Evidence of divergence: at least two items and increasing `sigma^2`.
    pub diverging: bool,
}

pub fn clt_condition(seq: &[HypParams]) -> Result<CltConditionReport> {
    if seq.is_empty() {
        return Err(Error::InvalidArgument("CLT diagnostics need a non-empty sequence".into()));
    }
    let items: Vec<CltItem> = seq
        .iter()
        .map(|h| CltItem {
            params: *h,
            sigma2: h.sigma2(),
            n: h.sample(),
            unsampled: h.unsampled(),
            marked: h.marked(),
            unmarked: h.unmarked(),
        })
        .collect();
    let sigma2_increasing = items.windows(2).all(|w| w[1].sigma2 > w[0].sigma2);
    let counts_increasing = items.windows(2).all(|w| {
        w[1].n > w[0].n
            && w[1].unsampled > w[0].unsampled
            && w[1].marked > w[0].marked
            && w[1].unmarked > w[0].unmarked
    });
    Ok(CltConditionReport {
        diverging: items.len() >= 2 && sigma2_increasing,
        items,
        sigma2_increasing,
        counts_increasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(n: u64, m: u64, pop: u64) -> HypParams {
        HypParams::new(n, m, pop).unwrap()
    }

    pub(crate) fn unit_constants() -> ConstantSet {
        ConstantSet {
            c1: 1.0,
            c2: 0.1,
            c3: 1.0,
            c4: 0.07,
            c5: 1.0,
            c6: 0.07,
            provenance: ProvenanceMap::all(Provenance::Calibrated),
            grid: "unit-test".into(),
            calibrated_at: None,
        }
    }

    #[test]
    fn profile_examples() {
        let b = bound_profile(&hp(100, 100, 200));
        assert_eq!(b.a1, 2.25);
        assert_eq!(b.delta, 1.0 / 22.5);
        assert!(!b.gate_ok);

        let b = bound_profile(&hp(10, 50, 100));
        assert!((b.a1 - 4.1 / 3.6).abs() < 1e-15);
        assert_eq!(b.delta, 1.0 / 20.0);

        let a = bound_profile(&hp(90, 50, 100));
        assert_eq!(a.f_bar, b.f_bar);
        assert_eq!(a.delta, b.delta);
    }

    #[test]
    fn gate_threshold() {
        // sigma >= 25 always opens the gate
        let h = hp(5000, 5000, 10_000);
        assert!(h.sigma() >= 25.0);
        assert!(bound_profile(&h).gate_ok);
    }

    #[test]
    fn uniform_scaling() {
        let c = unit_constants();
        let h = hp(5000, 5000, 10_000);
        let b = uniform_bound(&h, &c);
        assert!((b.value - 1.0 / h.sigma()).abs() < 1e-16);
        let h4 = hp(20_000, 20_000, 40_000);
        assert!((uniform_bound(&h4, &c).value * 2.0 - b.value).abs() < 1e-15);
        assert_eq!(b.provenance, Provenance::Calibrated);
    }

    #[test]
    fn lambda_branches() {
        let h = hp(10, 30, 100);
        assert_eq!(lambda(&h, -1.0).unwrap(), h.q());
        assert_eq!(lambda(&h, 2.0).unwrap(), h.p());
        assert_eq!(lambda(&h, 0.0).unwrap(), 0.3);
        assert!(lambda(&h, f64::INFINITY).is_err());
    }

    #[test]
    fn nonuniform_properties() {
        let c = unit_constants();
        let h = hp(20_000, 30_000, 100_000);
        let at0 = nonuniform_bound(&h, 0.0, &c).unwrap().value;
        assert!((at0 - 1.0 / (h.sigma() * 0.3)).abs() < 1e-15);
        let r = dual_p(&h);
        for x in [0.5, 1.0, 3.0, 7.5] {
            let a = nonuniform_bound(&h, x, &c).unwrap().value;
            let b = nonuniform_bound(&r, -x, &c).unwrap().value;
            assert_eq!(a, b);
        }
        assert!(matches!(
            nonuniform_bound(&hp(100, 100, 200), 1.0, &c),
            Err(Error::Gate(GateFailure::DeltaSigma { .. }))
        ));
        assert!(nonuniform_bound(&h, f64::NAN, &c).is_err());
    }

    fn dual_p(h: &HypParams) -> HypParams {
        hp(h.sample(), h.unmarked(), h.population())
    }

    #[test]
    fn nonuniform_nonincreasing_in_sigma() {
        let c = unit_constants();
        let mut prev = f64::INFINITY;
        for scale in 1..10u64 {
            let h = hp(20_000 * scale, 30_000 * scale, 100_000 * scale);
            let v = nonuniform_bound(&h, 1.5, &c).unwrap().value;
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn tail_properties() {
        let c = unit_constants();
        let h = hp(50_000, 50_000, 100_000);
        assert_eq!(tail_bound(&h, 0.1, &c).unwrap().value, 1.0);
        let mut prev = 1.0;
        for i in 1..100 {
            let v = tail_bound(&h, i as f64 * 0.5, &c).unwrap().value;
            assert!(v <= prev);
            prev = v;
        }
        // x -> 2x with m = 1/2: log bound drops by 3 C6 x^2 m^2
        let x = 40.0;
        let a = tail_bound(&h, x, &c).unwrap().value.ln();
        let b = tail_bound(&h, 2.0 * x, &c).unwrap().value.ln();
        assert!(((a - b) - 3.0 * c.c6 * x * x * 0.25).abs() < 1e-9);
        assert!(tail_bound(&h, 0.0, &c).is_err());
        assert!(tail_bound(&hp(100, 100, 200), 1.0, &c).is_err());
    }

    #[test]
    fn clt_examples() {
        let seq: Vec<_> = [100, 400, 1600].iter().map(|&n| hp(n / 2, n / 2, n)).collect();
        let r = clt_condition(&seq).unwrap();
        let s: Vec<f64> = r.items.iter().map(|i| i.sigma2).collect();
        assert_eq!(s, vec![6.25, 25.0, 100.0]);
        assert!(r.diverging && r.counts_increasing);

        let seq: Vec<_> = [1e4, 1e5, 1e6]
            .iter()
            .map(|&n: &f64| {
                let k = n.powf(0.4).round() as u64;
                hp(k, k, n as u64)
            })
            .collect();
        let r = clt_condition(&seq).unwrap();
        assert!(!r.sigma2_increasing && !r.diverging);
        assert!(r.items.windows(2).all(|w| w[1].sigma2 < w[0].sigma2));

        let r = clt_condition(&[hp(5, 5, 10); 3]).unwrap();
        assert!(!r.diverging);
        assert!(clt_condition(&[]).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut c = unit_constants();
        c.c3 = 0.1 + 0.2;
        c.c4 = PROOF_TRACED_RATE;
        c.calibrated_at = Some(1_700_000_000);
        let s = c.to_json();
        assert!(s.contains("\"C1\"") && s.contains("proof-traced") == false);
        let back = ConstantSet::from_json(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.c3.to_bits(), c.c3.to_bits());
        let traced = c.with_proof_traced_rates();
        assert!(traced.to_json().contains("proof-traced"));
    }

    #[test]
    fn rejects_nonpositive_constants() {
        let mut c = unit_constants();
        c.c5 = 0.0;
        assert!(ConstantSet::from_json(&c.to_json()).is_err());
    }
}
