use serde::{Deserialize, Serialize};
use std::fmt;

use super::MeasureError;

/// An interval of the extended real line with per-endpoint inclusion flags.
///
/// Infinite endpoints are never included. A degenerate interval `[x, x]`
/// is only valid with both endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "crate::serde_ext::ext_f64")]
    pub lo: f64,
    #[serde(with = "crate::serde_ext::ext_f64")]
    pub hi: f64,
    pub lo_included: bool,
    pub hi_included: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_included: bool, hi_included: bool) -> Result<Self, MeasureError> {
        let iv = Interval { lo, hi, lo_included, hi_included };
        iv.validate()?;
        Ok(iv)
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_included: false, hi_included: false }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_included: true, hi_included: true }
    }

    pub fn real_line() -> Self {
        Self::open(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        let bad = |why: &str| Err(MeasureError::InvalidInterval(format!("{self}: {why}")));
        if self.lo.is_nan() || self.hi.is_nan() {
            return bad("NaN endpoint");
        }
        if self.lo > self.hi {
            return bad("lo > hi");
        }
        if (self.lo.is_infinite() && self.lo_included) || (self.hi.is_infinite() && self.hi_included) {
            return bad("infinite endpoint marked as included");
        }
        if self.lo == self.hi && !(self.lo_included && self.hi_included) {
            return bad("degenerate interval must be closed");
        }
        Ok(())
    }

    /// Same endpoints, both flags cleared.
    pub fn interior(&self) -> Self {
        Self::open(self.lo, self.hi)
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_included && self.hi_included))
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi && self.lo_included && self.hi_included
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn length(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = x > self.lo || (x == self.lo && self.lo_included);
        let below = x < self.hi || (x == self.hi && self.hi_included);
        above && below
    }

    /// Membership in the closure, allowing the infinite endpoints themselves.
    pub fn closure_contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let (lo, lo_included) = if self.lo > other.lo {
            (self.lo, self.lo_included)
        } else if other.lo > self.lo {
            (other.lo, other.lo_included)
        } else {
            (self.lo, self.lo_included && other.lo_included)
        };
        let (hi, hi_included) = if self.hi < other.hi {
            (self.hi, self.hi_included)
        } else if other.hi < self.hi {
            (other.hi, other.hi_included)
        } else {
            (self.hi, self.hi_included && other.hi_included)
        };
        Interval { lo, hi, lo_included, hi_included }
    }

    /// True when `self ∪ other` is a single interval.
    pub fn mergeable(&self, other: &Interval) -> bool {
        if self.is_empty() || other.is_empty() {
            return true;
        }
        let (a, b) = if self.lo <= other.lo { (self, other) } else { (other, self) };
        b.lo < a.hi || (b.lo == a.hi && (a.hi_included || b.lo_included))
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        let (lo, lo_included) = if self.lo < other.lo {
            (self.lo, self.lo_included)
        } else if other.lo < self.lo {
            (other.lo, other.lo_included)
        } else {
            (self.lo, self.lo_included || other.lo_included)
        };
        let (hi, hi_included) = if self.hi > other.hi {
            (self.hi, self.hi_included)
        } else if other.hi > self.hi {
            (other.hi, other.hi_included)
        } else {
            (self.hi, self.hi_included || other.hi_included)
        };
        Interval { lo, hi, lo_included, hi_included }
    }

    pub fn reflect(&self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo, lo_included: self.hi_included, hi_included: self.lo_included }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lo_included { '[' } else { '(' };
        let r = if self.hi_included { ']' } else { ')' };
        write!(f, "{l}{}, {}{r}", self.lo, self.hi)
    }
}

/// Finite union of intervals in canonical form: sorted, pairwise disjoint
/// and never mergeable.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalSet {
    pieces: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn canonicalize(pieces: impl IntoIterator<Item = Interval>) -> Self {
        let mut v: Vec<Interval> = pieces.into_iter().filter(|p| !p.is_empty()).collect();
        v.sort_by(|a, b| {
            a.lo.partial_cmp(&b.lo)
                .unwrap()
                .then_with(|| b.lo_included.cmp(&a.lo_included))
        });
        let mut out: Vec<Interval> = Vec::with_capacity(v.len());
        for p in v {
            match out.last_mut() {
                Some(last) if last.mergeable(&p) => *last = last.hull(&p),
                _ => out.push(p),
            }
        }
        IntervalSet { pieces: out }
    }

    pub fn pieces(&self) -> &[Interval] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.pieces.iter().any(|p| p.contains(x))
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        Self::canonicalize(self.pieces.iter().chain(other.pieces.iter()).copied())
    }

    pub fn intersect_interval(&self, j: &Interval) -> IntervalSet {
        Self::canonicalize(self.pieces.iter().map(|p| p.intersect(j)))
    }

    /// Complement relative to `within`.
    pub fn complement_in(&self, within: &Interval) -> IntervalSet {
        let mut out = Vec::new();
        let mut cur_lo = within.lo;
        let mut cur_inc = within.lo_included;
        for p in self.intersect_interval(within).pieces {
            out.push(Interval { lo: cur_lo, hi: p.lo, lo_included: cur_inc, hi_included: !p.lo_included });
            cur_lo = p.hi;
            cur_inc = !p.hi_included;
        }
        out.push(Interval { lo: cur_lo, hi: within.hi, lo_included: cur_inc, hi_included: within.hi_included });
        Self::canonicalize(out.into_iter().filter(|p| p.validate().is_ok()))
    }

    pub fn total_length(&self) -> f64 {
        self.pieces.iter().map(Interval::length).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_neighbours_stay_apart() {
        let s = IntervalSet::canonicalize([Interval::open(0.0, 1.0), Interval::open(1.0, 2.0)]);
        assert_eq!(s.pieces(), &[Interval::open(0.0, 1.0), Interval::open(1.0, 2.0)]);
    }

    #[test]
    fn closed_neighbours_merge() {
        let s = IntervalSet::canonicalize([Interval::closed(0.0, 1.0), Interval::closed(1.0, 2.0)]);
        assert_eq!(s.pieces(), &[Interval::closed(0.0, 2.0)]);
    }

    #[test]
    fn empty_input() {
        assert!(IntervalSet::canonicalize([]).is_empty());
    }

    #[test]
    fn half_open_touching_merges() {
        let a = Interval::new(0.0, 1.0, true, false).unwrap();
        let b = Interval::new(1.0, 2.0, true, false).unwrap();
        let s = IntervalSet::canonicalize([b, a]);
        assert_eq!(s.pieces(), &[Interval::new(0.0, 2.0, true, false).unwrap()]);
    }

    #[test]
    fn rejects_bad_intervals() {
        assert!(Interval::new(1.0, 0.0, false, false).is_err());
        assert!(Interval::new(0.0, f64::INFINITY, false, true).is_err());
        assert!(Interval::new(1.0, 1.0, true, false).is_err());
        assert!(Interval::new(1.0, 1.0, true, true).is_ok());
    }

    #[test]
    fn complement_of_middle() {
        let a = IntervalSet::canonicalize([Interval::open(1.0, 2.0)]);
        let c = a.complement_in(&Interval::open(0.0, 3.0));
        assert_eq!(c.pieces(), &[Interval::new(0.0, 1.0, false, true).unwrap(), Interval::new(2.0, 3.0, true, false).unwrap()]);
    }
}
