//! The standard Cantor function and its antiderivative, evaluated from the
//! exact ternary expansion of an `f64` argument.

/// log 2 / log 3, the Hölder exponent of the Cantor function.
pub const GAMMA: f64 = std::f64::consts::LN_2 / 1.098_612_288_668_109_8;

/// Deepest expansion we ever request; beyond this f64 cannot resolve the
/// increments anyway.
pub const MAX_DEPTH: u32 = 64;

/// Exact ternary digit stream of a dyadic rational in `(0, 1)`.
struct Ternary {
    rem: u128,
    den_shift: u32,
}

impl Ternary {
    /// `None` when `x` is too small to expand exactly in 128-bit arithmetic.
    fn new(x: f64) -> Option<Ternary> {
        debug_assert!(x > 0.0 && x < 1.0);
        let bits = x.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
        // x = mant * 2^e with e < 0
        let shift = (-e) as u32;
        if shift > 124 {
            return None;
        }
        Some(Ternary { rem: mant as u128, den_shift: shift })
    }

    fn next_digit(&mut self) -> u8 {
        let three_r = self.rem * 3;
        let d = (three_r >> self.den_shift) as u8;
        self.rem = three_r - ((d as u128) << self.den_shift);
        d
    }

    fn is_zero(&self) -> bool {
        self.rem == 0
    }

    fn remainder(&self) -> f64 {
        self.rem as f64 / 2f64.powi(self.den_shift as i32)
    }
}

/// Certified bounds `(lo, hi)` on the Cantor function at `x`, expanding at
/// most `depth` ternary digits. `lo` is the depth-`depth` iterate and
/// `hi - lo <= 2^-depth`.
pub fn cantor_bounds(x: f64, depth: u32) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 1.0);
    }
    let depth = depth.min(MAX_DEPTH);
    let Some(mut t) = Ternary::new(x) else {
        // c(x) <= (3x)^gamma for all x in [0, 1].
        return (0.0, (3.0 * x).powf(GAMMA).min(1.0));
    };
    let mut acc = 0.0;
    let mut bit = 0.5;
    for _ in 0..depth {
        match t.next_digit() {
            0 => {}
            1 => {
                acc += bit;
                return (acc, acc);
            }
            _ => acc += bit,
        }
        bit *= 0.5;
        if t.is_zero() {
            return (acc, acc);
        }
    }
    (acc, acc + 2.0 * bit)
}

/// The depth-`depth` Cantor iterate `c_d(x)`; `|c_d(x) - c(x)| <= 2^-depth`.
pub fn cantor_function(x: f64, depth: u32) -> f64 {
    cantor_bounds(x, depth).0
}

/// Certified bounds on `∫_0^x c(t) dt`.
pub fn cantor_antiderivative_bounds(x: f64, depth: u32) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0);
    }
    if x >= 1.0 {
        return (0.5 + (x - 1.0), 0.5 + (x - 1.0));
    }
    let depth = depth.min(MAX_DEPTH);
    let Some(mut t) = Ternary::new(x) else {
        let c_hi = (3.0 * x).powf(GAMMA).min(1.0);
        return (0.0, x * c_hi);
    };
    let mut acc = 0.0;
    let mut mult = 1.0;
    let slop = 4.0 * f64::EPSILON;
    for _ in 0..depth {
        let d = t.next_digit();
        let rem = t.remainder();
        match d {
            0 => mult /= 6.0,
            1 => {
                acc += mult * (1.0 / 12.0 + rem / 6.0);
                return (acc * (1.0 - slop), acc * (1.0 + slop));
            }
            _ => {
                acc += mult * (0.25 + rem / 6.0);
                mult /= 6.0;
            }
        }
        if t.is_zero() {
            return (acc * (1.0 - slop), acc * (1.0 + slop));
        }
    }
    (acc * (1.0 - slop), (acc + 0.5 * mult) * (1.0 + slop))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: the classical recursive definition evaluated in
    /// floating point with explicit depth.
    fn recursive_cantor(x: f64, depth: u32) -> f64 {
        if depth == 0 {
            return 0.0;
        }
        if x < 1.0 / 3.0 {
            0.5 * recursive_cantor(3.0 * x, depth - 1)
        } else if x <= 2.0 / 3.0 {
            0.5
        } else {
            0.5 + 0.5 * recursive_cantor(3.0 * x - 2.0, depth - 1)
        }
    }

    #[test]
    fn endpoints_exact() {
        assert_eq!(cantor_function(0.0, 5), 0.0);
        assert_eq!(cantor_function(1.0, 5), 1.0);
    }

    #[test]
    fn one_third_is_one_half() {
        // the f64 nearest 1/3 sits about 2e-17 below it, which moves c by ~1e-11
        let (lo, hi) = cantor_bounds(1.0 / 3.0, 40);
        assert!(lo <= 0.5 && hi >= 0.5 - 1e-10, "[{lo}, {hi}]");
        assert!((lo - 0.5).abs() <= 1e-10);
    }

    #[test]
    fn one_quarter_is_one_third() {
        // 1/4 = 0.0202..._3 -> 0.0101..._2 = 1/3
        for d in [10, 20, 40] {
            let v = cantor_function(0.25, d);
            assert!((v - 1.0 / 3.0).abs() <= 2f64.powi(-(d as i32)), "depth {d}: {v}");
        }
    }

    #[test]
    fn agrees_with_recursive_oracle() {
        for i in 1..200 {
            let x = i as f64 / 201.0;
            let (lo, hi) = cantor_bounds(x, 40);
            let o = recursive_cantor(x, 30);
            assert!(o >= lo - 2f64.powi(-29) && o <= hi + 2f64.powi(-29), "x={x}: oracle {o} not in [{lo},{hi}]");
        }
    }

    #[test]
    fn antiderivative_total_is_half() {
        let (lo, hi) = cantor_antiderivative_bounds(1.0 - f64::EPSILON, 60);
        assert!(lo <= 0.5 && hi >= 0.5 - 1e-15);
        let (lo, hi) = cantor_antiderivative_bounds(0.5, 60);
        // ∫_0^{1/2} c = 1/12 + (1/2)(1/2 - 1/3) = 1/6
        assert!((lo - 1.0 / 6.0).abs() < 1e-14 && (hi - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn antiderivative_matches_riemann_sum() {
        let n = 200_000;
        let mut acc = 0.0;
        let x = 0.8;
        for i in 0..n {
            let t = (i as f64 + 0.5) * x / n as f64;
            acc += recursive_cantor(t, 40) * x / n as f64;
        }
        let (lo, hi) = cantor_antiderivative_bounds(x, 60);
        assert!((acc - 0.5 * (lo + hi)).abs() < 1e-5);
    }
}
