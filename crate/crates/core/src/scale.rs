//! Scale functions stored through their Stieltjes measure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{Approx, Interval, IntervalSet, MeasureComponent, MeasureError, RadonMeasure};

pub use crate::measure::{cantor_function, enumerate_rationals};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("scale measure has an atom")]
    Atom,
    #[error("scale measure is not fully supported: no mass on {0}")]
    NotStrictlyIncreasing(Interval),
    #[error("base point {0} is not a finite point of the closure of {1}")]
    BadBase(f64, Interval),
    #[error("value {0} is outside the range of the scale function")]
    OutOfRange(f64),
    #[error("restricted scale is constant on {0}")]
    ConstantOnGap(Interval),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// `s(x) = base_val + sign(x - base_x) * ds(between base_x and x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleFunction {
    pub base_x: f64,
    pub base_val: f64,
    pub ds: RadonMeasure,
}

/// A Borel set for [`restrict_scale`]: a finite union of intervals plus the
/// supports of Cantor components that are marked as a whole.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MarkedSet {
    #[serde(default)]
    pub intervals: IntervalSet,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cantor_supports: Vec<Interval>,
}

impl MarkedSet {
    pub fn from_intervals(intervals: IntervalSet) -> Self {
        MarkedSet { intervals, cantor_supports: Vec::new() }
    }

    pub fn cantor(support: Interval) -> Self {
        MarkedSet { intervals: IntervalSet::empty(), cantor_supports: vec![support] }
    }
}

impl ScaleFunction {
    pub fn new(base_x: f64, base_val: f64, ds: RadonMeasure) -> Self {
        ScaleFunction { base_x, base_val, ds }
    }

    /// `s(x) = x` on the whole line.
    pub fn identity() -> Self {
        Self::new(0.0, 0.0, RadonMeasure::lebesgue())
    }

    /// `s(x) = x` with `ds` restricted to `[lo, hi]`.
    pub fn identity_on(lo: f64, hi: f64) -> Self {
        let base = if lo.is_finite() { lo } else if hi.is_finite() { hi } else { 0.0 };
        Self::new(base, base, RadonMeasure::single(MeasureComponent::lebesgue_on(lo, hi)))
    }

    /// `s(x) = x + c(x)` on `[0, 1]`, `c` the Cantor function.
    pub fn lebesgue_plus_cantor() -> Self {
        Self::new(
            0.0,
            0.0,
            RadonMeasure {
                components: vec![MeasureComponent::lebesgue_on(0.0, 1.0), MeasureComponent::cantor_unit()],
            },
        )
    }

    /// `s(x) = λ(G ∩ (0, x))` with `G` the union of rational windows.
    pub fn rational_windows(signed: bool) -> Self {
        Self::new(0.0, 0.0, RadonMeasure::single(MeasureComponent::windows(None, signed)))
    }

    /// Checks that `s` belongs to the strictly increasing continuous
    /// functions on `i`.
    pub fn validate_on(&self, i: &Interval) -> Result<(), ScaleError> {
        self.ds.validate_on(i)?;
        if self.ds.has_atoms() {
            return Err(ScaleError::Atom);
        }
        if !self.base_x.is_finite() || !self.base_val.is_finite() || !i.closure_contains(self.base_x) {
            return Err(ScaleError::BadBase(self.base_x, *i));
        }
        if let Some(gap) = self.ds.support_gap(i) {
            return Err(ScaleError::NotStrictlyIncreasing(gap));
        }
        Ok(())
    }

    /// `s(y) - s(x)` for `x <= y`, certified; infinite when an endpoint is a
    /// divergent limit.
    pub fn increment(&self, x: f64, y: f64, tol: f64) -> Approx {
        if x >= y {
            return Approx::ZERO;
        }
        self.ds.mass(&Interval::open(x, y), tol)
    }

    /// Certified `s(x)`; at an infinite or excluded endpoint this is the
    /// monotone limit, possibly a certified infinity.
    pub fn eval(&self, x: f64, tol: f64) -> Approx {
        if x == self.base_x {
            return Approx::exact(self.base_val);
        }
        if x > self.base_x {
            let d = self.increment(self.base_x, x, tol);
            if d.is_infinite() {
                return Approx::infinite();
            }
            Approx::exact(self.base_val) + d
        } else {
            let d = self.increment(x, self.base_x, tol);
            if d.is_infinite() {
                return Approx::exact(f64::NEG_INFINITY);
            }
            Approx::exact(self.base_val) - d
        }
    }

    /// `x` in `within` with `|s(x) - y| <= tol`, by bisection. The returned
    /// error bounds the distance to the exact preimage.
    pub fn inverse(&self, y: f64, tol: f64, within: &Interval) -> Result<Approx, ScaleError> {
        let probe = tol / 4.0;
        let at = |x: f64| self.eval(x, probe);
        let (mut lo, mut hi) = (within.lo, within.hi);
        // Replace infinite ends by finite brackets.
        if lo.is_infinite() {
            let mut step = 1.0;
            let mut x = self.base_x.min(hi) - step;
            while at(x).value > y {
                step *= 2.0;
                x = self.base_x.min(hi) - step;
                if step > 1e300 {
                    return Err(ScaleError::OutOfRange(y));
                }
            }
            lo = x;
        }
        if hi.is_infinite() {
            let mut step = 1.0;
            let mut x = self.base_x.max(lo) + step;
            while at(x).value < y {
                step *= 2.0;
                x = self.base_x.max(lo) + step;
                if step > 1e300 {
                    return Err(ScaleError::OutOfRange(y));
                }
            }
            hi = x;
        }
        if at(lo).lo() > y + tol || at(hi).hi() < y - tol {
            return Err(ScaleError::OutOfRange(y));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.increment(lo, hi, probe).hi() <= tol {
                break;
            }
            let v = at(mid);
            if v.value < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Approx::from_bounds(lo, hi))
    }

    /// `x -> -s(-x)`, the scale function of the mirrored diffusion.
    pub fn reflect(&self) -> Self {
        Self::new(-self.base_x, -self.base_val, self.ds.reflect())
    }

    /// `α s + β` for `α > 0`.
    pub fn affine(&self, alpha: f64, beta: f64) -> Self {
        Self::new(self.base_x, alpha * self.base_val + beta, self.ds.scaled(alpha))
    }
}

/// The scale with `ds₀ = 1_{A^c} ds`, provided it remains strictly
/// increasing on `i`.
pub fn restrict_scale(s: &ScaleFunction, a: &MarkedSet, i: &Interval) -> Result<ScaleFunction, ScaleError> {
    let mut components = Vec::new();
    for c in &s.ds.components {
        if let MeasureComponent::CantorCopy { support, .. } = c {
            if a.cantor_supports.contains(support) {
                continue;
            }
        }
        match c.without(&a.intervals) {
            Some(v) => components.extend(v),
            None => {
                return Err(ScaleError::Unsupported(format!(
                    "restricting a {} component to part of its support",
                    component_kind(c)
                )))
            }
        }
    }
    let ds = RadonMeasure { components };
    if let Some(gap) = ds.support_gap(i) {
        return Err(ScaleError::ConstantOnGap(gap));
    }
    let s0 = ScaleFunction::new(s.base_x, s.base_val, ds);
    s0.validate_on(i)?;
    Ok(s0)
}

pub(crate) fn component_kind(c: &MeasureComponent) -> &'static str {
    match c {
        MeasureComponent::LebesgueDensity { .. } => "density",
        MeasureComponent::Atom { .. } => "atom",
        MeasureComponent::CantorCopy { .. } => "Cantor",
        MeasureComponent::RationalWindows { .. } => "rational-windows",
        MeasureComponent::PowerDensity { .. } => "power-density",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_eval() {
        assert_eq!(ScaleFunction::identity().eval(0.25, 1e-12), Approx::exact(0.25));
    }

    #[test]
    fn cantor_scale_at_one_third() {
        let s = ScaleFunction::lebesgue_plus_cantor();
        let v = s.eval(1.0 / 3.0, 1e-12);
        assert!((v.value - 5.0 / 6.0).abs() < 1e-10, "{v}");
        assert!(v.error <= 1e-10);
    }

    #[test]
    fn windows_scale_bounded_at_infinity() {
        let s = ScaleFunction::rational_windows(false);
        let v = s.eval(f64::INFINITY, 1e-9);
        assert!(!v.is_infinite() && v.hi() <= 1.0 + 1e-12);
    }

    #[test]
    fn linear_inverse() {
        let s = ScaleFunction::identity().affine(2.0, 0.0);
        let x = s.inverse(3.0, 1e-12, &Interval::real_line()).unwrap();
        assert!((x.value - 1.5).abs() < 1e-11);
    }

    #[test]
    fn cantor_inverse_hits_target() {
        let s = ScaleFunction::lebesgue_plus_cantor();
        let tol = 1e-9;
        let x = s.inverse(1.0, tol, &Interval::closed(0.0, 1.0)).unwrap();
        let y = s.eval(x.value, 1e-12);
        assert!((y.value - 1.0).abs() <= tol + y.error, "{x} -> {y}");
    }

    #[test]
    fn inverse_out_of_range() {
        let s = ScaleFunction::identity_on(0.0, 1.0);
        assert!(matches!(s.inverse(2.0, 1e-9, &Interval::closed(0.0, 1.0)), Err(ScaleError::OutOfRange(_))));
    }

    #[test]
    fn restriction_gap_is_named() {
        let s = ScaleFunction::identity_on(0.0, 3.0);
        let a = MarkedSet::from_intervals(IntervalSet::canonicalize([Interval::open(1.0, 2.0)]));
        let err = restrict_scale(&s, &a, &Interval::open(0.0, 3.0)).unwrap_err();
        assert_eq!(err, ScaleError::ConstantOnGap(Interval::open(1.0, 2.0)));
    }

    #[test]
    fn dropping_cantor_gives_identity() {
        let s = ScaleFunction::lebesgue_plus_cantor();
        let i = Interval::closed(0.0, 1.0);
        let s0 = restrict_scale(&s, &MarkedSet::cantor(i), &i).unwrap();
        assert_eq!(s0.ds, ScaleFunction::identity_on(0.0, 1.0).ds);
    }

    #[test]
    fn atoms_rejected() {
        let s = ScaleFunction::new(0.0, 0.0, RadonMeasure::single(MeasureComponent::Atom { location: 0.5, mass: 1.0 }));
        assert_eq!(s.validate_on(&Interval::closed(0.0, 1.0)), Err(ScaleError::Atom));
    }
}
