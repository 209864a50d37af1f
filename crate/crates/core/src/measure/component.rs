use serde::{Deserialize, Serialize};

use super::approx::Approx;
use super::cantor::{cantor_antiderivative_bounds, cantor_bounds, GAMMA, MAX_DEPTH};
use super::interval::{Interval, IntervalSet};
use super::pwa::AffinePiece;
use super::rationals::{window_union, MAX_EXPLICIT_WINDOWS};
use super::MeasureError;

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One summand of a [`super::RadonMeasure`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureComponent {
    /// Piecewise-constant density: `values[i]` on `(breakpoints[i], breakpoints[i+1])`,
    /// zero outside. The outer breakpoints may be infinite.
    LebesgueDensity {
        #[serde(with = "crate::serde_ext::ext_f64_vec")]
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    Atom { location: f64, mass: f64 },
    /// The standard Cantor measure mapped affinely onto `support`, total mass `weight`.
    CantorCopy { support: Interval, weight: f64 },
    /// `weight * 1_G(y) dy` where `G` is the union of windows of length `2^-n`
    /// around the `n`-th enumerated rational.
    RationalWindows {
        count_cutoff: Option<u64>,
        signed: bool,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        weight: f64,
        #[serde(default, skip_serializing_if = "is_false")]
        reflected: bool,
    },
    /// Density `coeff * |x - anchor|^exponent` on `support`, which lies on one
    /// side of `anchor`.
    PowerDensity { anchor: f64, exponent: f64, coeff: f64, support: Interval },
}

use MeasureComponent::*;

const SLOP: f64 = 16.0 * f64::EPSILON;

/// `∫_{du}^{dv} t^q dt` for `0 <= du <= dv <= ∞`.
pub(crate) fn power_integral(q: f64, du: f64, dv: f64) -> f64 {
    if du >= dv {
        return 0.0;
    }
    if q == -1.0 {
        if du == 0.0 || dv.is_infinite() {
            return f64::INFINITY;
        }
        return (dv / du).ln();
    }
    let e = q + 1.0;
    if (du == 0.0 && e <= 0.0) || (dv.is_infinite() && e >= 0.0) {
        return f64::INFINITY;
    }
    let pv = if dv.is_infinite() { 0.0 } else { dv.powf(e) };
    let pu = if du == 0.0 { 0.0 } else { du.powf(e) };
    (pv - pu) / e
}

/// Depth of the Cantor expansion achieving absolute error `tol` on mass `scale`.
pub(crate) fn cantor_depth(scale: f64, tol: f64) -> u32 {
    if scale <= 0.0 || !tol.is_finite() {
        return 1;
    }
    let d = (scale / tol).log2().ceil() + 2.0;
    d.clamp(1.0, MAX_DEPTH as f64) as u32
}

/// Number of explicit windows for absolute error `tol` on mass `weight`.
pub(crate) fn window_depth(weight: f64, tol: f64) -> u64 {
    let n = (weight / tol).log2().ceil() + 1.0;
    n.clamp(1.0, MAX_EXPLICIT_WINDOWS as f64) as u64
}

/// `(x - from) / (to - from)` is computed without rounding.
fn exact_offset(from: f64, x: f64, to: f64) -> bool {
    let exact_diff = |p: f64, q: f64| {
        let d = p - q;
        let bb = d - p;
        (p - (d - bb)) + (-q - bb) == 0.0
    };
    let len = (to - from).abs();
    len.is_finite()
        && len > 0.0
        && exact_diff(to, from)
        && exact_diff(x, from)
        && len.to_bits() & ((1u64 << 52) - 1) == 0
}

fn sum_signed(acc: f64, term: f64) -> Result<f64, MeasureError> {
    let r = acc + term;
    if r.is_nan() {
        Err(MeasureError::NonIntegrable("opposite infinite contributions".into()))
    } else {
        Ok(r)
    }
}

impl MeasureComponent {
    pub fn density(breakpoints: Vec<f64>, values: Vec<f64>) -> Self {
        LebesgueDensity { breakpoints, values }
    }

    pub fn lebesgue_on(lo: f64, hi: f64) -> Self {
        LebesgueDensity { breakpoints: vec![lo, hi], values: vec![1.0] }
    }

    pub fn cantor_unit() -> Self {
        CantorCopy { support: Interval::closed(0.0, 1.0), weight: 1.0 }
    }

    pub fn windows(count_cutoff: Option<u64>, signed: bool) -> Self {
        RationalWindows { count_cutoff, signed, weight: 1.0, reflected: false }
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        let bad = |m: String| Err(MeasureError::InvalidComponent(m));
        match self {
            LebesgueDensity { breakpoints, values } => {
                if breakpoints.len() != values.len() + 1 || values.is_empty() {
                    return bad("density needs n+1 breakpoints for n values".into());
                }
                if breakpoints.iter().any(|b| b.is_nan()) || breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
                    return bad("density breakpoints must be strictly increasing".into());
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return bad("density values must be finite and nonnegative".into());
                }
            }
            Atom { location, mass } => {
                if !location.is_finite() || !(mass.is_finite() && *mass > 0.0) {
                    return bad(format!("atom at {location} with mass {mass}"));
                }
            }
            CantorCopy { support, weight } => {
                support.validate()?;
                if !support.is_bounded() || support.length() <= 0.0 {
                    return bad("Cantor copy needs a bounded non-degenerate support".into());
                }
                if !(weight.is_finite() && *weight > 0.0) {
                    return bad("Cantor weight must be positive".into());
                }
            }
            RationalWindows { count_cutoff, weight, .. } => {
                if *count_cutoff == Some(0) {
                    return bad("window cutoff must be positive".into());
                }
                if !(weight.is_finite() && *weight > 0.0) {
                    return bad("window weight must be positive".into());
                }
            }
            PowerDensity { anchor, exponent, coeff, support } => {
                support.validate()?;
                if !anchor.is_finite() || !exponent.is_finite() || !(coeff.is_finite() && *coeff > 0.0) {
                    return bad("power density needs finite anchor/exponent and positive coefficient".into());
                }
                if !(support.lo >= *anchor || support.hi <= *anchor) {
                    return bad("power density support must lie on one side of its anchor".into());
                }
                if support.length() <= 0.0 {
                    return bad("power density support must be non-degenerate".into());
                }
            }
        }
        Ok(())
    }

    pub fn is_atom(&self) -> bool {
        matches!(self, Atom { .. })
    }

    /// Absolutely continuous with respect to Lebesgue measure.
    pub fn is_lebesgue_type(&self) -> bool {
        matches!(self, LebesgueDensity { .. } | RationalWindows { .. } | PowerDensity { .. })
    }

    /// `μ(J)` with a certified error of at most `tol` (or a certified infinity).
    pub fn mass(&self, j: &Interval, tol: f64) -> Approx {
        if j.is_empty() {
            return Approx::ZERO;
        }
        match self {
            LebesgueDensity { breakpoints, values } => {
                let mut acc = Approx::ZERO;
                for (i, v) in values.iter().enumerate() {
                    if *v == 0.0 {
                        continue;
                    }
                    let piece = Interval::open(breakpoints[i], breakpoints[i + 1]).intersect(j);
                    if piece.is_empty() {
                        continue;
                    }
                    if piece.length().is_infinite() {
                        return Approx::infinite();
                    }
                    acc = acc + (Approx::exact(piece.hi) - Approx::exact(piece.lo)).scale(*v);
                }
                acc
            }
            Atom { location, mass } => {
                if j.contains(*location) {
                    Approx::exact(*mass)
                } else {
                    Approx::ZERO
                }
            }
            CantorCopy { support, weight } => {
                let piece = support.intersect(j);
                if piece.is_empty() {
                    return Approx::ZERO;
                }
                if Self::mirror_is_exact(support, &piece) {
                    return self.reflect().mass(&piece.reflect(), tol);
                }
                let d = cantor_depth(*weight, tol);
                self.cantor_cdf(piece.hi, d) - self.cantor_cdf(piece.lo, d)
            }
            RationalWindows { count_cutoff, signed, weight, reflected } => {
                let n = window_depth(*weight, tol);
                let explicit = count_cutoff.map_or(n, |c| c.min(n));
                let union = window_union(explicit, *signed, *reflected).intersect_interval(j);
                let exact = weight * union.total_length();
                let tail = match count_cutoff {
                    Some(c) if *c <= explicit => 0.0,
                    Some(c) => weight * (0.5f64.powi(explicit as i32) - 0.5f64.powi(*c as i32)),
                    None => weight * 0.5f64.powi(explicit as i32),
                };
                let tail = tail.min(weight * j.length());
                let mag: f64 = union.pieces().iter().map(|p| p.lo.abs() + p.hi.abs()).sum();
                Approx::new(exact + 0.5 * tail, 0.5 * tail + SLOP * weight * mag)
            }
            PowerDensity { anchor, exponent, coeff, support } => {
                let piece = support.intersect(j);
                if piece.is_empty() {
                    return Approx::ZERO;
                }
                let (du, dv) = Self::anchor_distances(*anchor, support, &piece);
                let v = coeff * power_integral(*exponent, du, dv);
                if v.is_infinite() {
                    Approx::infinite()
                } else {
                    Approx::new(v, SLOP * v.abs())
                }
            }
        }
    }

    fn anchor_distances(anchor: f64, support: &Interval, piece: &Interval) -> (f64, f64) {
        if support.lo >= anchor {
            (piece.lo - anchor, piece.hi - anchor)
        } else {
            (anchor - piece.hi, anchor - piece.lo)
        }
    }

    /// Certified value of `μ((support.lo, x))` for a Cantor copy.
    fn cantor_cdf(&self, x: f64, depth: u32) -> Approx {
        let CantorCopy { support, weight } = self else { unreachable!() };
        let (t, holder) = Self::unit_coordinate(support, x);
        let (lo, hi) = cantor_bounds(t, depth);
        Approx::from_bounds(weight * lo, weight * hi) + Approx::new(0.0, weight * holder)
    }

    /// The unit coordinate of `piece`'s ends is exact measured from
    /// `support.hi` but not from `support.lo`.
    fn mirror_is_exact(support: &Interval, piece: &Interval) -> bool {
        let exact = |from: f64, to: f64| {
            [piece.lo, piece.hi].iter().all(|&x| x <= support.lo || x >= support.hi || exact_offset(from, x, to))
        };
        !exact(support.lo, support.hi) && exact(support.hi, support.lo)
    }

    /// Maps `x` into the unit coordinate of `support` and returns the Cantor
    /// error induced by rounding in that map.
    fn unit_coordinate(support: &Interval, x: f64) -> (f64, f64) {
        if x <= support.lo {
            return (0.0, 0.0);
        }
        if x >= support.hi {
            return (1.0, 0.0);
        }
        let len = support.hi - support.lo;
        if support.lo == 0.0 && len == 1.0 {
            return (x, 0.0);
        }
        if exact_offset(support.lo, x, support.hi) {
            return ((x - support.lo) / len, 0.0);
        }
        let t = (x - support.lo) / len;
        let delta = 2.0 * f64::EPSILON * (x.abs() + support.lo.abs()) / len + f64::EPSILON;
        (t, 2.0 * (3.0 * delta).powf(GAMMA))
    }

    /// `∫_{piece.on} (slope x + intercept) μ(dx)`.
    pub fn integrate_affine(&self, piece: &AffinePiece, tol: f64) -> Result<Approx, MeasureError> {
        let j = &piece.on;
        if j.is_empty() {
            return Ok(Approx::ZERO);
        }
        let (a, b) = (piece.slope, piece.intercept);
        match self {
            LebesgueDensity { breakpoints, values } => {
                let mut acc = 0.0;
                let mut err = Approx::ZERO;
                for (i, v) in values.iter().enumerate() {
                    if *v == 0.0 {
                        continue;
                    }
                    let o = Interval::open(breakpoints[i], breakpoints[i + 1]).intersect(j);
                    if o.is_empty() {
                        continue;
                    }
                    if o.length().is_infinite() {
                        if a == 0.0 && b == 0.0 {
                            continue;
                        }
                        let far = if o.hi.is_infinite() { o.hi } else { o.lo };
                        let sign = if a != 0.0 { (a * far).signum() } else { b.signum() };
                        acc = sum_signed(acc, sign * f64::INFINITY)?;
                        continue;
                    }
                    // (hi - lo) * (a (hi + lo) / 2 + b)
                    let (h, l) = (Approx::exact(o.hi), Approx::exact(o.lo));
                    let term = ((h - l) * ((h + l).scale(0.5 * a) + Approx::exact(b))).scale(*v);
                    acc = sum_signed(acc, term.value)?;
                    err = err + Approx::new(0.0, term.error);
                }
                if acc.is_infinite() {
                    return Ok(Approx::exact(acc));
                }
                Ok(Approx::exact(acc) + err)
            }
            Atom { location, mass } => {
                if j.contains(*location) {
                    Ok(Approx::exact(mass * piece.at(*location)))
                } else {
                    Ok(Approx::ZERO)
                }
            }
            CantorCopy { support, weight } => {
                let o = support.intersect(j);
                if o.is_empty() {
                    return Ok(Approx::ZERO);
                }
                if Self::mirror_is_exact(support, &o) {
                    let mirrored = AffinePiece { on: o.reflect(), slope: -a, intercept: b };
                    return self.reflect().integrate_affine(&mirrored, tol);
                }
                let scale = weight * (1.0 + a.abs() * (o.lo.abs() + o.hi.abs()) + b.abs());
                let d = cantor_depth(scale, tol);
                let fu = self.cantor_cdf(o.lo, d);
                let fv = self.cantor_cdf(o.hi, d);
                let len = support.hi - support.lo;
                let (tu, hu) = Self::unit_coordinate(support, o.lo);
                let (tv, hv) = Self::unit_coordinate(support, o.hi);
                let (pu_lo, pu_hi) = cantor_antiderivative_bounds(tu, d);
                let (pv_lo, pv_hi) = cantor_antiderivative_bounds(tv, d);
                // ∫_u^v F = w L (Φ(tv) - Φ(tu)); positional rounding moves Φ by at most δ.
                let int_f = Approx::from_bounds(pv_lo - pu_hi, pv_hi - pu_lo).scale(weight * len)
                    + Approx::new(0.0, weight * len * (hu + hv));
                let mut total = Approx::ZERO;
                if a != 0.0 {
                    let by_parts = Approx::exact(o.hi) * fv - Approx::exact(o.lo) * fu - int_f;
                    total = total + by_parts.scale(a);
                }
                if b != 0.0 {
                    total = total + (fv - fu).scale(b);
                }
                Ok(total)
            }
            RationalWindows { count_cutoff, signed, weight, reflected } => {
                let n = window_depth(*weight, tol);
                let explicit = count_cutoff.map_or(n, |c| c.min(n));
                let union = window_union(explicit, *signed, *reflected).intersect_interval(j);
                let mut acc = 0.0;
                let mut mag = 0.0;
                for o in union.pieces() {
                    acc += 0.5 * a * (o.hi * o.hi - o.lo * o.lo) + b * (o.hi - o.lo);
                    mag += 0.5 * a.abs() * (o.hi * o.hi + o.lo * o.lo) + b.abs() * (o.hi.abs() + o.lo.abs());
                }
                let tail_mass = match count_cutoff {
                    Some(c) if *c <= explicit => 0.0,
                    _ => 0.5f64.powi(explicit as i32),
                };
                // Windows past index N sit inside |x| <= n + 1.
                let growth = 0.5f64.powi(explicit as i32) * (a.abs() * (explicit as f64 + 3.0) + b.abs());
                let tail = if tail_mass == 0.0 { 0.0 } else { (tail_mass * piece.sup_abs()).min(growth) };
                Ok(Approx::new(weight * acc, weight * (tail + SLOP * mag)))
            }
            PowerDensity { anchor, exponent, coeff, support } => {
                let o = support.intersect(j);
                if o.is_empty() {
                    return Ok(Approx::ZERO);
                }
                let (du, dv) = Self::anchor_distances(*anchor, support, &o);
                let sigma = if support.lo >= *anchor { 1.0 } else { -1.0 };
                // x = anchor + σ t, so g = (a·anchor + b) + aσ t.
                let c0 = a * anchor + b;
                let c1 = a * sigma;
                let mut acc = 0.0;
                let mut mag = 0.0;
                if c0 != 0.0 {
                    let i0 = power_integral(*exponent, du, dv);
                    acc = sum_signed(acc, c0 * i0)?;
                    mag += (c0 * i0).abs();
                }
                if c1 != 0.0 {
                    let i1 = power_integral(exponent + 1.0, du, dv);
                    acc = sum_signed(acc, c1 * i1)?;
                    mag += (c1 * i1).abs();
                }
                if acc.is_infinite() {
                    return Ok(Approx::exact(acc));
                }
                Ok(Approx::new(coeff * acc, 4.0 * SLOP * coeff * mag))
            }
        }
    }

    /// Open intervals on which the component has a strictly positive density.
    /// Singular components contribute nothing (their supports are nowhere dense).
    pub fn open_support(&self) -> Vec<Interval> {
        match self {
            LebesgueDensity { breakpoints, values } => values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v > 0.0)
                .map(|(i, _)| Interval::open(breakpoints[i], breakpoints[i + 1]))
                .collect(),
            Atom { .. } | CantorCopy { .. } => Vec::new(),
            RationalWindows { count_cutoff: Some(c), signed, reflected, .. } => {
                window_union((*c).min(MAX_EXPLICIT_WINDOWS), *signed, *reflected).pieces().to_vec()
            }
            RationalWindows { count_cutoff: None, signed, reflected, .. } => {
                // Positive rationals are dense in (0, ∞).
                let iv = if *signed {
                    Interval::real_line()
                } else {
                    Interval::open(0.0, f64::INFINITY)
                };
                vec![if *reflected { iv.reflect() } else { iv }]
            }
            PowerDensity { support, .. } => vec![support.interior()],
        }
    }

    /// Closed hull of the points carrying mass.
    pub fn hull(&self) -> Option<Interval> {
        match self {
            Atom { location, .. } => Some(Interval::closed(*location, *location)),
            CantorCopy { support, .. } => Some(Interval::closed(support.lo, support.hi)),
            RationalWindows { signed: true, .. } => Some(Interval::real_line()),
            RationalWindows { count_cutoff: None, reflected, .. } => {
                let iv = Interval::new(0.0, f64::INFINITY, true, false).unwrap();
                Some(if *reflected { iv.reflect() } else { iv })
            }
            _ => {
                let s = IntervalSet::canonicalize(self.open_support());
                let p = s.pieces();
                let (first, last) = (p.first()?, p.last()?);
                Some(Interval {
                    lo: first.lo,
                    hi: last.hi,
                    lo_included: first.lo.is_finite(),
                    hi_included: last.hi.is_finite(),
                })
            }
        }
    }

    /// Image under `x -> -x`.
    pub fn reflect(&self) -> Self {
        match self {
            LebesgueDensity { breakpoints, values } => LebesgueDensity {
                breakpoints: breakpoints.iter().rev().map(|b| -b).collect(),
                values: values.iter().rev().copied().collect(),
            },
            Atom { location, mass } => Atom { location: -location, mass: *mass },
            CantorCopy { support, weight } => CantorCopy { support: support.reflect(), weight: *weight },
            RationalWindows { count_cutoff, signed, weight, reflected } => RationalWindows {
                count_cutoff: *count_cutoff,
                signed: *signed,
                weight: *weight,
                reflected: !reflected,
            },
            PowerDensity { anchor, exponent, coeff, support } => PowerDensity {
                anchor: -anchor,
                exponent: *exponent,
                coeff: *coeff,
                support: support.reflect(),
            },
        }
    }

    /// The component multiplied by `k > 0`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut c = self.clone();
        match &mut c {
            LebesgueDensity { values, .. } => values.iter_mut().for_each(|v| *v *= k),
            Atom { mass, .. } => *mass *= k,
            CantorCopy { weight, .. } => *weight *= k,
            RationalWindows { weight, .. } => *weight *= k,
            PowerDensity { coeff, .. } => *coeff *= k,
        }
        c
    }

    /// Explicit density form of a window component with a small finite cutoff.
    pub fn as_density(&self) -> Option<MeasureComponent> {
        let RationalWindows { count_cutoff: Some(c), signed, weight, reflected } = self else {
            return None;
        };
        if *c > MAX_EXPLICIT_WINDOWS {
            return None;
        }
        let union = window_union(*c, *signed, *reflected);
        let mut breakpoints = Vec::new();
        let mut values = Vec::new();
        for p in union.pieces() {
            match breakpoints.last() {
                None => breakpoints.push(p.lo),
                Some(last) if *last < p.lo => {
                    values.push(0.0);
                    breakpoints.push(p.lo);
                }
                _ => {}
            }
            values.push(*weight);
            breakpoints.push(p.hi);
        }
        Some(LebesgueDensity { breakpoints, values })
    }

    /// `1_{A^c}` times the component, or `None` when the product leaves the
    /// component algebra (partial overlap of `A` with a singular or infinite
    /// window component).
    pub fn without(&self, a: &IntervalSet) -> Option<Vec<MeasureComponent>> {
        if a.is_empty() {
            return Some(vec![self.clone()]);
        }
        match self {
            LebesgueDensity { breakpoints, .. } => {
                let lo = breakpoints[0];
                let hi = *breakpoints.last().unwrap();
                let mut cuts: Vec<f64> = breakpoints.clone();
                for p in a.pieces() {
                    for e in [p.lo, p.hi] {
                        if e > lo && e < hi {
                            cuts.push(e);
                        }
                    }
                }
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                let mut bp = vec![cuts[0]];
                let mut vals: Vec<f64> = Vec::new();
                for w in cuts.windows(2) {
                    let mid = match (w[0].is_finite(), w[1].is_finite()) {
                        (true, true) => 0.5 * (w[0] + w[1]),
                        (false, true) => w[1] - 1.0,
                        (true, false) => w[0] + 1.0,
                        (false, false) => 0.0,
                    };
                    let v = if a.contains(mid) { 0.0 } else { self.density_at(mid).unwrap_or(0.0) };
                    if vals.last() == Some(&v) {
                        *bp.last_mut().unwrap() = w[1];
                    } else {
                        vals.push(v);
                        bp.push(w[1]);
                    }
                }
                Some(vec![LebesgueDensity { breakpoints: bp, values: vals }])
            }
            Atom { location, .. } => Some(if a.contains(*location) { vec![] } else { vec![self.clone()] }),
            CantorCopy { support, .. } => {
                let inter = a.intersect_interval(support);
                if inter.is_empty() {
                    Some(vec![self.clone()])
                } else if inter.pieces().len() == 1 && inter.pieces()[0].interior() == support.interior() {
                    Some(vec![])
                } else {
                    None
                }
            }
            RationalWindows { .. } => {
                if let Some(d) = self.as_density() {
                    return d.without(a);
                }
                let hull = self.hull()?;
                if a.intersect_interval(&hull.interior()).total_length() == 0.0 {
                    Some(vec![self.clone()])
                } else {
                    None
                }
            }
            PowerDensity { anchor, exponent, coeff, support } => Some(
                a.complement_in(support)
                    .pieces()
                    .iter()
                    .filter(|p| p.length() > 0.0)
                    .map(|p| PowerDensity { anchor: *anchor, exponent: *exponent, coeff: *coeff, support: *p })
                    .collect(),
            ),
        }
    }

    /// Value of the density of a Lebesgue-type component at `x` (for
    /// `LebesgueDensity` and `PowerDensity` only).
    pub fn density_at(&self, x: f64) -> Option<f64> {
        match self {
            LebesgueDensity { breakpoints, values } => {
                let n = values.len();
                if x <= breakpoints[0] || x >= breakpoints[n] {
                    return Some(0.0);
                }
                let i = breakpoints.partition_point(|b| *b <= x) - 1;
                Some(values[i.min(n - 1)])
            }
            PowerDensity { anchor, exponent, coeff, support } => {
                if support.interior().contains(x) {
                    Some(coeff * (x - anchor).abs().powf(*exponent))
                } else {
                    Some(0.0)
                }
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::pwa::PiecewiseLinear;

    #[test]
    fn unit_density_mass() {
        let c = MeasureComponent::lebesgue_on(0.0, 2.0);
        let m = c.mass(&Interval::open(0.0, 1.0), 1e-12);
        assert_eq!(m.value, 1.0);
        assert!(m.error < 1e-14);
    }

    #[test]
    fn cantor_middle_third_is_empty() {
        let c = MeasureComponent::cantor_unit();
        for tol in [1e-3, 1e-6, 1e-9] {
            let m = c.mass(&Interval::open(1.0 / 3.0, 2.0 / 3.0), tol);
            assert!(m.contains(0.0), "{m}");
            assert!(m.error <= tol);
        }
    }

    #[test]
    fn cantor_total_mass_exact() {
        let c = MeasureComponent::cantor_unit();
        let m = c.mass(&Interval::closed(0.0, 1.0), 1e-3);
        assert_eq!(m, Approx::exact(1.0));
    }

    #[test]
    fn reflected_cantor_keeps_precision() {
        let c = MeasureComponent::cantor_unit();
        let r = c.reflect();
        let j = Interval::open(2.0 / 21.0, 20.0 / 63.0);
        let m = c.mass(&j, 1e-14);
        let mr = r.mass(&j.reflect(), 1e-14);
        assert!(m.error <= 1e-14 && mr.error <= 1e-14, "{m} {mr}");
        assert!((m.value - mr.value).abs() <= 2e-14);
        let g = PiecewiseLinear::affine(1.0, 0.0);
        let v = c.integrate_affine(&g.pieces_on(&j)[0], 1e-14).unwrap();
        let gr = PiecewiseLinear::affine(-1.0, 0.0);
        let vr = r.integrate_affine(&gr.pieces_on(&j.reflect())[0], 1e-14).unwrap();
        assert!(vr.error <= 1e-14 && (v.value - vr.value).abs() <= 2e-14, "{v} {vr}");
    }

    #[test]
    fn cantor_first_moment_is_half() {
        let c = MeasureComponent::cantor_unit();
        let g = PiecewiseLinear::affine(1.0, 0.0);
        let p = g.pieces_on(&Interval::closed(0.0, 1.0));
        let v = c.integrate_affine(&p[0], 1e-12).unwrap();
        assert!(v.contains(0.5) && v.error < 1e-12, "{v}");
    }

    #[test]
    fn windows_total_mass_at_most_one() {
        let c = MeasureComponent::windows(None, false);
        let m = c.mass(&Interval::open(0.0, f64::INFINITY), 1e-9);
        assert!(m.hi() <= 1.0 + 1e-12);
        assert!(m.error <= 1e-9);
    }

    #[test]
    fn power_density_log_divergence() {
        let c = PowerDensity { anchor: 0.0, exponent: -1.0, coeff: 1.0, support: Interval::open(0.0, 1.0) };
        assert!(c.mass(&Interval::open(0.0, 0.5), 1e-9).is_infinite());
        let m = c.mass(&Interval::open(0.25, 0.5), 1e-9);
        assert!(m.contains(2f64.ln()));
    }

    #[test]
    fn power_density_moment_matches_closed_form() {
        // ∫_1^2 x * 3 x^2 dx = 3 (16 - 1) / 4
        let c = PowerDensity { anchor: 0.0, exponent: 2.0, coeff: 3.0, support: Interval::open(0.0, 5.0) };
        let p = PiecewiseLinear::affine(1.0, 0.0).pieces_on(&Interval::open(1.0, 2.0));
        let v = c.integrate_affine(&p[0], 1e-12).unwrap();
        assert!((v.value - 45.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn reflected_windows_mirror_mass() {
        let c = MeasureComponent::windows(Some(7), true);
        let j = Interval::open(0.2, 3.1);
        let a = c.mass(&j, 1e-12);
        let b = c.reflect().mass(&j.reflect(), 1e-12);
        assert!((a.value - b.value).abs() < 1e-12);
    }
}
