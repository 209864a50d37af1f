use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// A value with a certified absolute error bound.
///
/// An infinite `value` with zero `error` is a certified infinite verdict.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Approx {
    #[serde(with = "crate::serde_ext::ext_f64")]
    pub value: f64,
    pub error: f64,
}

/// Rounds an error bound upward so that its own rounding cannot make it unsound.
fn widen(e: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else {
        e * (1.0 + 4.0 * f64::EPSILON) + f64::MIN_POSITIVE
    }
}

impl Approx {
    pub const ZERO: Approx = Approx { value: 0.0, error: 0.0 };

    pub fn exact(value: f64) -> Self {
        Approx { value, error: 0.0 }
    }

    pub fn new(value: f64, error: f64) -> Self {
        debug_assert!(error >= 0.0, "negative error bound");
        Approx { value, error }
    }

    pub fn infinite() -> Self {
        Approx { value: f64::INFINITY, error: 0.0 }
    }

    /// Builds the midpoint representation of `[lo, hi]`.
    pub fn from_bounds(lo: f64, hi: f64) -> Self {
        if hi.is_infinite() && lo.is_infinite() && hi.signum() == lo.signum() {
            return Approx { value: hi, error: 0.0 };
        }
        let value = 0.5 * (lo + hi);
        Approx { value, error: (0.5 * (hi - lo)).max(0.0) }
    }

    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }

    pub fn lo(&self) -> f64 {
        self.value - self.error
    }

    pub fn hi(&self) -> f64 {
        self.value + self.error
    }

    pub fn contains(&self, x: f64) -> bool {
        if self.is_infinite() {
            return x == self.value;
        }
        (x - self.value).abs() <= self.error
    }

    pub fn scale(self, k: f64) -> Self {
        if self.is_infinite() {
            return if k == 0.0 { Approx::ZERO } else { Approx::exact(self.value * k) };
        }
        let v = self.value * k;
        let r = self.value.mul_add(k, -v).abs();
        Approx { value: v, error: widen(self.error * k.abs() + r) }
    }

    /// Sums with pairwise-free compensation: the error of the result covers
    /// the summands' errors plus rounding.
    pub fn sum<I: IntoIterator<Item = Approx>>(items: I) -> Approx {
        items.into_iter().fold(Approx::ZERO, |a, b| a + b)
    }

    pub fn abs_hi(&self) -> f64 {
        self.value.abs() + self.error
    }
}

impl Add for Approx {
    type Output = Approx;

    fn add(self, rhs: Approx) -> Approx {
        if self.is_infinite() || rhs.is_infinite() {
            return Approx::exact(self.value + rhs.value);
        }
        let (a, b) = (self.value, rhs.value);
        let v = a + b;
        // two-sum: exact rounding error of the addition
        let bb = v - a;
        let r = ((a - (v - bb)) + (b - bb)).abs();
        Approx { value: v, error: widen(self.error + rhs.error + r) }
    }
}

impl Sub for Approx {
    type Output = Approx;

    fn sub(self, rhs: Approx) -> Approx {
        self + (-rhs)
    }
}

impl Neg for Approx {
    type Output = Approx;

    fn neg(self) -> Approx {
        Approx { value: -self.value, error: self.error }
    }
}

impl Mul for Approx {
    type Output = Approx;

    fn mul(self, rhs: Approx) -> Approx {
        if self.is_infinite() || rhs.is_infinite() {
            return Approx::exact(self.value * rhs.value);
        }
        let v = self.value * rhs.value;
        let r = self.value.mul_add(rhs.value, -v).abs();
        let err = self.value.abs() * rhs.error + rhs.value.abs() * self.error + self.error * rhs.error;
        Approx { value: v, error: widen(err + r) }
    }
}

impl fmt::Display for Approx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ± {:e}", self.value, self.error)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_round_trip() {
        let a = Approx::from_bounds(1.0, 3.0);
        assert_eq!(a.value, 2.0);
        assert_eq!(a.error, 1.0);
        assert_eq!(a.lo(), 1.0);
        assert_eq!(a.hi(), 3.0);
    }

    #[test]
    fn product_encloses() {
        let a = Approx::new(2.0, 0.1);
        let b = Approx::new(-3.0, 0.2);
        let p = a * b;
        for x in [1.9, 2.0, 2.1] {
            for y in [-3.2, -3.0, -2.8] {
                assert!(p.contains(x * y));
            }
        }
    }

    #[test]
    fn infinity_absorbs() {
        let a = Approx::infinite() + Approx::new(1.0, 0.5);
        assert!(a.is_infinite());
    }
}
