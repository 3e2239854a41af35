//! Sum-versus-integral inequalities on a lattice `b, b+h, ..., b+kh`.
//!
//! * [`monotone_sum_bound`]: for a nonnegative unimodal `g`,
//!   `sum_i g(b+ih) <= (1/h) int_b^{b+hk} g + 2 max_i g(b+ih)`.
//! * [`phi_riemann_bound`]: the midpoint Riemann sum of the normal density
//!   differs from the integral by at most
//!   `(h^2/12) [int |phi''| + (4+h) max |phi''|]`.
//!
//! Integrals use composite Gauss-Legendre quadrature with panel doubling;
//! every result reports the change seen under the last halving of the step.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{phi, phi_dd};

/// Required stability of a quadrature value under step halving.
pub const HALVING_TOLERANCE: f64 = 1e-10;

/// Samples used to certify the monotonicity pattern of `g`.
pub const UNIMODAL_SAMPLES: usize = 10_000;

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// A quadrature value with its step-halving change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: f64,
    pub halving_change: f64,
}

fn gauss_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let mid = a + (i as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            s += w * f(mid + half * x);
        }
        total += s * half;
    }
    total
}

/// Integrate `f` over `[a, b]`, splitting at the given kinks and doubling
/// panels until the halving change falls below `1e-13` (or 2^16 panels).
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, kinks: &[f64]) -> Quadrature {
    if b <= a {
        return Quadrature {
            value: 0.0,
            halving_change: 0.0,
        };
    }
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = kinks.iter().copied().filter(|&c| c > a && c < b).collect();
    inner.sort_by(|x, y| x.total_cmp(y));
    cuts.extend(inner);
    cuts.push(b);

    let mut value = 0.0;
    let mut change = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mut panels = 4;
        let mut prev = gauss_legendre(f, lo, hi, panels);
        loop {
            panels *= 2;
            let next = gauss_legendre(f, lo, hi, panels);
            let d = (next - prev).abs();
            prev = next;
            if d < 1e-13 || panels >= 1 << 16 {
                change += d;
                break;
            }
        }
        value += prev;
    }
    Quadrature {
        value,
        halving_change: change,
    }
}

/// A nonnegative function, nondecreasing left of `peak()` and nonincreasing
/// right of it.
pub trait Unimodal {
    fn eval(&self, x: f64) -> f64;
    fn peak(&self) -> f64;
    /// Points where `eval` is not smooth, for quadrature splitting.
    fn kinks(&self) -> Vec<f64> {
        vec![self.peak()]
    }
}

/// Built-in unimodal shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Shape {
    /// `phi(x - center)`.
    Gaussian { center: f64 },
    /// Tent of the given height and half-width.
    Triangle { center: f64, half_width: f64, height: f64 },
    /// `max(0, height - (x - center)^2)`.
    TruncatedQuadratic { center: f64, height: f64 },
    Constant { value: f64, peak: f64 },
}

impl Unimodal for Shape {
    fn eval(&self, x: f64) -> f64 {
        match *self {
            Shape::Gaussian { center } => phi(x - center),
            Shape::Triangle {
                center,
                half_width,
                height,
            } => (height * (1.0 - (x - center).abs() / half_width)).max(0.0),
            Shape::TruncatedQuadratic { center, height } => (height - (x - center).powi(2)).max(0.0),
            Shape::Constant { value, .. } => value,
        }
    }

    fn peak(&self) -> f64 {
        match *self {
            Shape::Gaussian { center } => center,
            Shape::Triangle { center, .. } => center,
            Shape::TruncatedQuadratic { center, .. } => center,
            Shape::Constant { peak, .. } => peak,
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match *self {
            Shape::Gaussian { center } => vec![center],
            Shape::Triangle {
                center, half_width, ..
            } => vec![center - half_width, center, center + half_width],
            Shape::TruncatedQuadratic { center, height } => {
                let r = height.max(0.0).sqrt();
                vec![center - r, center, center + r]
            }
            Shape::Constant { .. } => vec![],
        }
    }
}

/// A lattice `b + i h`, `i = 0..=k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeSumCase {
    pub b: f64,
    pub h: f64,
    pub k: u64,
}

/// Both sides of a lattice inequality (`lhs <= rhs` is the claim).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// Largest step-halving change among the integrals behind `rhs`.
    pub halving_change: f64,
}

impl InequalityCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }

    pub fn quadrature_stable(&self) -> bool {
        self.halving_change < HALVING_TOLERANCE
    }
}

/// Checks by dense sampling that `g` is nonnegative and follows the declared
/// monotonicity pattern on `[lo, hi]`.
pub fn certify_unimodal(g: &dyn Unimodal, lo: f64, hi: f64) -> Result<()> {
    let peak = g.peak();
    let n = UNIMODAL_SAMPLES;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=n {
        let x = if hi > lo { lo + (hi - lo) * i as f64 / n as f64 } else { lo };
        let y = g.eval(x);
        if !(y >= 0.0) {
            return Err(Error::InvalidArgument(format!("g({x}) = {y} is negative")));
        }
        if let Some((px, py)) = prev {
            let ok = if x <= peak {
                y >= py
            } else if px >= peak {
                y <= py
            } else {
                true
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "g is not unimodal about declared peak {peak}: g({px}) = {py}, g({x}) = {y}"
                )));
            }
        }
        prev = Some((x, y));
    }
    Ok(())
}

/// `lhs = sum_{i=0}^{k} g(b+ih)`, `rhs = (1/h) int_b^{b+hk} g + 2 max_i g(b+ih)`.
pub fn monotone_sum_bound(case: &LatticeSumCase, g: &dyn Unimodal) -> Result<InequalityCheck> {
    if !(case.h > 0.0) || !case.h.is_finite() || !case.b.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lattice needs finite b and h > 0, got b = {}, h = {}",
            case.b, case.h
        )));
    }
    let end = case.b + case.h * case.k as f64;
    certify_unimodal(g, case.b, end)?;
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for i in 0..=case.k {
        let v = g.eval(case.b + i as f64 * case.h);
        sum += v;
        max = max.max(v);
    }
    let integral = integrate(&|x| g.eval(x), case.b, end, &g.kinks());
    Ok(InequalityCheck {
        lhs: sum,
        rhs: integral.value / case.h + 2.0 * max,
        halving_change: integral.halving_change,
    })
}

/// `int_a^b |phi''|` by quadrature split at the roots `+-1`.
pub fn abs_phi_dd_integral(a: f64, b: f64) -> Quadrature {
    integrate(&|x| phi_dd(x).abs(), a, b, &[-1.0, 0.0, 1.0])
}

/// `max |phi''|` over `[a, b]`: endpoints plus the interior critical points
/// `0` and `+-sqrt(3)`.
pub fn max_abs_phi_dd(a: f64, b: f64) -> f64 {
    let r3 = 3f64.sqrt();
    [a, b, 0.0, r3, -r3]
        .into_iter()
        .filter(|&x| x >= a && x <= b)
        .map(|x| phi_dd(x).abs())
        .fold(0.0, f64::max)
}

/// `lhs = |h sum_{i=0}^{j0} phi(b+ih) - int_{b-h/2}^{b+(j0+1/2)h} phi|`,
/// `rhs = (h^2/12)[int |phi''| + (4+h) max |phi''|]` over the same interval.
pub fn phi_riemann_bound(b: f64, h: f64, j0: u64) -> Result<InequalityCheck> {
    if !(b >= 0.0) || !b.is_finite() {
        return Err(Error::InvalidArgument(format!("need finite b >= 0, got {b}")));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("need finite h > 0, got {h}")));
    }
    if j0 < 1 {
        return Err(Error::InvalidArgument("need j0 >= 1".into()));
    }
    let lo = b - 0.5 * h;
    let hi = b + (j0 as f64 + 0.5) * h;
    // panel-wise differences keep the O(h^3) terms free of cancellation
    let lhs = (0..=j0)
        .map(|i| {
            let x = b + i as f64 * h;
            h * phi(x) - gauss_legendre(&phi, x - 0.5 * h, x + 0.5 * h, 4)
        })
        .sum::<f64>()
        .abs();
    let curvature = abs_phi_dd_integral(lo, hi);
    let rhs = h * h / 12.0 * (curvature.value + (4.0 + h) * max_abs_phi_dd(lo, hi));
    Ok(InequalityCheck {
        lhs,
        rhs,
        halving_change: curvature.halving_change,
    })
}
