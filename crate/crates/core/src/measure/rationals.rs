//! Enumeration of the positive rationals and the window set built on it.

use std::fmt;

use super::interval::{Interval, IntervalSet};

/// A positive rational `num/den` in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rational {
    pub num: u64,
    pub den: u64,
}

impl Rational {
    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Positive rationals `q/p` in lowest terms, ordered by `p + q` and then by
/// increasing numerator.
#[derive(Clone, Debug)]
pub struct PositiveRationals {
    sum: u64,
    num: u64,
}

impl Default for PositiveRationals {
    fn default() -> Self {
        PositiveRationals { sum: 2, num: 0 }
    }
}

impl Iterator for PositiveRationals {
    type Item = Rational;

    fn next(&mut self) -> Option<Rational> {
        loop {
            self.num += 1;
            if self.num >= self.sum {
                self.sum += 1;
                self.num = 1;
            }
            let den = self.sum - self.num;
            if gcd(self.num, den) == 1 {
                return Some(Rational { num: self.num, den });
            }
        }
    }
}

/// The `n`-th positive rational (1-based). Panics on `n == 0`.
pub fn enumerate_rationals(n: u64) -> Rational {
    assert!(n >= 1, "rationals are indexed from 1");
    PositiveRationals::default().nth((n - 1) as usize).unwrap()
}

/// Windows with index above this are never materialised: their float
/// endpoints no longer resolve the width `2^-(n+1)`.
pub const MAX_EXPLICIT_WINDOWS: u64 = 50;

/// Centres of the first `count` windows. In the signed variant positions
/// alternate `r_1, -r_1, r_2, -r_2, ...`.
pub fn window_centres(count: u64, signed: bool) -> Vec<f64> {
    let mut out = Vec::with_capacity(count as usize);
    let mut it = PositiveRationals::default();
    while (out.len() as u64) < count {
        let r = it.next().unwrap().to_f64();
        out.push(r);
        if signed && (out.len() as u64) < count {
            out.push(-r);
        }
    }
    out
}

/// The `n`-th open window (1-based): centre ± 2^-(n+1).
pub fn window(n: u64, centre: f64) -> Interval {
    let half = 0.5f64.powi(n as i32 + 1);
    Interval::open(centre - half, centre + half)
}

/// Canonical union of the first `count` windows, optionally mirrored.
pub fn window_union(count: u64, signed: bool, reflected: bool) -> IntervalSet {
    let sign = if reflected { -1.0 } else { 1.0 };
    IntervalSet::canonicalize(
        window_centres(count, signed)
            .into_iter()
            .enumerate()
            .map(|(i, c)| window(i as u64 + 1, sign * c)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn first_terms() {
        assert_eq!(enumerate_rationals(1), Rational { num: 1, den: 1 });
        assert_eq!(enumerate_rationals(2), Rational { num: 1, den: 2 });
        assert_eq!(enumerate_rationals(3), Rational { num: 2, den: 1 });
        assert_eq!(enumerate_rationals(9), Rational { num: 4, den: 1 });
    }

    #[test]
    fn bounded_by_index() {
        for (i, r) in PositiveRationals::default().take(10_000).enumerate() {
            assert!(r.to_f64() <= (i + 1) as f64);
        }
    }

    #[test]
    fn bijective_on_prefix() {
        let first: Vec<Rational> = PositiveRationals::default().take(10_000).collect();
        let set: HashSet<(u64, u64)> = first.iter().map(|r| (r.num, r.den)).collect();
        assert_eq!(set.len(), first.len());
        for s in 2..=20u64 {
            for q in 1..s {
                let p = s - q;
                if gcd(q, p) == 1 {
                    assert!(set.contains(&(q, p)), "missing {q}/{p}");
                }
            }
        }
    }

    #[test]
    fn signed_centres_alternate() {
        assert_eq!(window_centres(5, true), vec![1.0, -1.0, 0.5, -0.5, 2.0]);
    }
}
